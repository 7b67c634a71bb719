//! The `logvec-v1` embedding file: one JSON header line followed by one JSON
//! record per template.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parser::TemplateId;

use super::{Embedding, EmbeddingStore};

pub const FORMAT_TAG: &str = "logvec-v1";

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    dim: usize,
    model: String,
    parser_hash: String,
    count: usize,
}

#[derive(Deserialize)]
struct Record {
    template_id: TemplateId,
    template: String,
    vector: Vec<f64>,
}

/// 17 significant digits round-trip every f64 exactly.
fn push_float(out: &mut String, x: f64) {
    write!(out, "{x:.16e}").unwrap();
}

pub fn save_store(store: &EmbeddingStore, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let header = Header {
        format: FORMAT_TAG.into(),
        dim: store.dim(),
        model: store.model_name().into(),
        parser_hash: store.parser_hash().into(),
        count: store.len(),
    };
    let mut out = serde_json::to_string(&header).map_err(|e| Error::format(e.to_string()))?;
    out.push('\n');
    for (id, entry) in store.iter() {
        let template =
            serde_json::to_string(&entry.template).map_err(|e| Error::format(e.to_string()))?;
        write!(
            out,
            "{{\"template_id\":{id},\"template\":{template},\"vector\":["
        )
        .unwrap();
        for (i, x) in entry.vector.as_slice().iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            push_float(&mut out, *x);
        }
        out.push_str("]}\n");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_store(path: impl AsRef<Path>) -> Result<EmbeddingStore> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_store(&text).map_err(|e| match e {
        Error::Format(msg) => Error::format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn parse_store(text: &str) -> Result<EmbeddingStore> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines
        .next()
        .ok_or_else(|| Error::format("missing header"))?;
    let header: Header =
        serde_json::from_str(first).map_err(|e| Error::format(format!("bad header: {e}")))?;
    if header.format != FORMAT_TAG {
        return Err(Error::format(format!(
            "unsupported format {:?}",
            header.format
        )));
    }
    let mut store = EmbeddingStore::new(header.dim, header.model, header.parser_hash);
    let mut seen = HashSet::new();
    for (i, line) in lines {
        let rec: Record = serde_json::from_str(line)
            .map_err(|e| Error::format(format!("line {}: {e}", i + 1)))?;
        if rec.vector.len() != header.dim {
            return Err(Error::format(format!(
                "line {}: vector has {} values, header declares {}",
                i + 1,
                rec.vector.len(),
                header.dim
            )));
        }
        if !seen.insert(rec.template_id) {
            return Err(Error::format(format!(
                "line {}: duplicate template id {}",
                i + 1,
                rec.template_id
            )));
        }
        let vector = Embedding::new(rec.vector)
            .map_err(|_| Error::format(format!("line {}: non-finite value", i + 1)))?;
        store
            .insert(rec.template_id, rec.template, vector)
            .map_err(|e| Error::format(format!("line {}: {e}", i + 1)))?;
    }
    if store.len() != header.count {
        return Err(Error::format(format!(
            "header declares {} records, found {}",
            header.count,
            store.len()
        )));
    }
    Ok(store)
}
