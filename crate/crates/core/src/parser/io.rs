use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

use super::{ParsedEvent, ParserState, TemplateId};

/// `line_no <TAB> template_id <TAB> json-array-of-variables`
pub fn write_events(events: &[ParsedEvent], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for e in events {
        let vars = serde_json::to_string(&e.variables).map_err(|e| Error::format(e.to_string()))?;
        writeln!(out, "{}\t{}\t{}", e.line_no, e.template_id, vars).unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_events(path: impl AsRef<Path>) -> Result<Vec<ParsedEvent>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let bad = |what: &str| Error::format(format!("{}:{}: {what}", path.display(), i + 1));
            let mut parts = l.splitn(3, '\t');
            let line_no = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("bad line number"))?;
            let template_id = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("bad template id"))?;
            let variables = parts
                .next()
                .and_then(|s| serde_json::from_str(s).ok())
                .ok_or_else(|| bad("bad variables array"))?;
            Ok(ParsedEvent {
                line_no,
                template_id,
                variables,
                timestamp: None,
            })
        })
        .collect()
}

/// `template_id <TAB> canonical template string`
pub fn write_templates(state: &ParserState, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for t in state.templates() {
        writeln!(out, "{}\t{}", t.id, t.render()).unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_templates(path: impl AsRef<Path>) -> Result<Vec<(TemplateId, String)>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let (id, template) = l.split_once('\t').ok_or_else(|| {
                Error::format(format!("{}:{}: missing tab", path.display(), i + 1))
            })?;
            let id = id.parse().map_err(|_| {
                Error::format(format!("{}:{}: bad template id", path.display(), i + 1))
            })?;
            Ok((id, template.to_owned()))
        })
        .collect()
}
