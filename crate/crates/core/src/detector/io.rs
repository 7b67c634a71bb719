use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

use super::decide::{Label, Verdict};

/// `line_no <TAB> label <TAB> score <TAB> reason`, with `-` for no reason.
pub fn write_verdicts(verdicts: &[Verdict], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render_verdicts(verdicts)).map_err(|e| Error::io(path, e))
}

pub fn render_verdicts(verdicts: &[Verdict]) -> String {
    let mut out = String::new();
    for v in verdicts {
        let reason = v
            .reason
            .map(|r| r.to_string())
            .unwrap_or_else(|| "-".into());
        writeln!(out, "{}\t{}\t{}\t{}", v.line_no, v.label, v.score, reason).unwrap();
    }
    out
}

pub fn read_verdicts(path: impl AsRef<Path>) -> Result<Vec<Verdict>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let bad = |what: &str| Error::format(format!("{}:{}: {what}", path.display(), i + 1));
            let f: Vec<&str> = l.split('\t').collect();
            if f.len() != 4 {
                return Err(bad("expected 4 fields"));
            }
            Ok(Verdict {
                line_no: f[0].parse().map_err(|_| bad("bad line number"))?,
                label: f[1].parse()?,
                score: f[2].parse().map_err(|_| bad("bad score"))?,
                reason: if f[3] == "-" {
                    None
                } else {
                    Some(f[3].parse()?)
                },
            })
        })
        .collect()
}

/// Ground truth: `line_no <TAB> label`.
pub fn write_labels(labels: &BTreeMap<u64, Label>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for (line_no, label) in labels {
        writeln!(out, "{line_no}\t{label}").unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<BTreeMap<u64, Label>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let (no, label) = l.split_once('\t').ok_or_else(|| {
                Error::format(format!("{}:{}: missing tab", path.display(), i + 1))
            })?;
            let no = no.trim().parse().map_err(|_| {
                Error::format(format!("{}:{}: bad line number", path.display(), i + 1))
            })?;
            Ok((no, label.trim().parse()?))
        })
        .collect()
}
