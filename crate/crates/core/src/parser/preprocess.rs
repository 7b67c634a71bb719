use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Marker written in place of variable tokens.
pub const WILDCARD: &str = "<*>";

pub const IPV4_MASK: &str = r"\b\d{1,3}(?:\.\d{1,3}){3}(?::\d+)?\b";
pub const HEX_MASK: &str = r"\b(?:0[xX])?[0-9a-fA-F]{8,}\b";
pub const INT_MASK: &str = r"\b\d+\b";

/// An ordered list of regular expressions whose matches become wildcards.
///
/// Masks are applied token by token, so masking never changes the number of
/// whitespace-separated tokens in a line.
#[derive(Debug, Clone)]
pub struct MaskSet {
    patterns: Vec<String>,
    compiled: Vec<Regex>,
}

impl MaskSet {
    pub fn new<S: AsRef<str>>(patterns: &[S]) -> Result<Self> {
        let patterns: Vec<String> = patterns.iter().map(|p| p.as_ref().to_owned()).collect();
        let compiled = patterns
            .iter()
            .map(|p| Regex::new(p).map_err(|e| Error::config(format!("bad mask {p:?}: {e}"))))
            .collect::<Result<_>>()?;
        Ok(MaskSet { patterns, compiled })
    }

    pub fn empty() -> Self {
        MaskSet {
            patterns: Vec::new(),
            compiled: Vec::new(),
        }
    }

    pub fn patterns(&self) -> &[String] {
        &self.patterns
    }

    pub fn mask_token(&self, token: &str) -> String {
        let mut out = token.to_owned();
        for re in &self.compiled {
            if re.is_match(&out) {
                out = re.replace_all(&out, WILDCARD).into_owned();
            }
        }
        out
    }
}

impl Default for MaskSet {
    /// IPv4 addresses, hex strings of at least 8 digits, decimal integers.
    fn default() -> Self {
        MaskSet::new(&[IPV4_MASK, HEX_MASK, INT_MASK]).expect("built-in masks compile")
    }
}

impl PartialEq for MaskSet {
    fn eq(&self, other: &Self) -> bool {
        self.patterns == other.patterns
    }
}

/// Masks variables and normalizes whitespace.
pub fn preprocess(line: &str, masks: &MaskSet) -> Result<String> {
    let tokens = mask_tokens(line, masks);
    if tokens.is_empty() {
        return Err(Error::EmptyAfterMask);
    }
    Ok(tokens.join(" "))
}

pub(crate) fn mask_tokens(line: &str, masks: &MaskSet) -> Vec<String> {
    line.split_whitespace()
        .map(|t| masks.mask_token(t))
        .collect()
}

/// How the fixed header (timestamp, severity, ...) is removed from a raw line.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HeaderRule {
    /// Number of leading whitespace-delimited fields to drop.
    pub fields: usize,
    /// Header field holding a numeric timestamp, if any.
    pub timestamp_field: Option<usize>,
}

impl HeaderRule {
    /// Splits `text` into an optional timestamp and the message payload.
    pub fn split<'a>(&self, text: &'a str) -> (Option<f64>, &'a str) {
        let mut rest = text;
        let mut timestamp = None;
        for i in 0..self.fields {
            let trimmed = rest.trim_start();
            let end = trimmed.find(char::is_whitespace).unwrap_or(trimmed.len());
            if self.timestamp_field == Some(i) {
                timestamp = trimmed[..end].parse::<f64>().ok().filter(|t| t.is_finite());
            }
            rest = &trimmed[end..];
        }
        (timestamp, rest.trim())
    }
}

/// One input line after header stripping.
#[derive(Debug, Clone, PartialEq)]
pub struct RawLogLine {
    pub line_no: u64,
    pub timestamp: Option<f64>,
    pub content: String,
}

impl RawLogLine {
    pub fn new(line_no: u64, content: impl Into<String>) -> Result<Self> {
        let content = content.into();
        if content.trim().is_empty() {
            return Err(Error::EmptyAfterMask);
        }
        Ok(RawLogLine {
            line_no,
            timestamp: None,
            content,
        })
    }

    /// Builds a line from raw text, stripping the header. Returns `None` when
    /// nothing is left of the message.
    pub fn from_text(line_no: u64, text: &str, header: &HeaderRule) -> Option<Self> {
        let (timestamp, content) = header.split(text);
        if content.is_empty() {
            return None;
        }
        Some(RawLogLine {
            line_no,
            timestamp,
            content: content.to_owned(),
        })
    }
}
