//! Online template mining over a fixed-depth prefix tree (Drain).
//!
//! Lines are routed by token count, then by their leading tokens, to a leaf
//! holding a handful of candidate templates. The best candidate by positional
//! token agreement absorbs the line if it is similar enough; otherwise the
//! line seeds a new template.

mod io;
mod preprocess;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use io::{read_events, read_templates, write_events, write_templates};
pub use preprocess::{
    preprocess, HeaderRule, MaskSet, RawLogLine, HEX_MASK, INT_MASK, IPV4_MASK, WILDCARD,
};

pub type TemplateId = u32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParserConfig {
    pub depth: usize,
    pub similarity_threshold: f64,
    pub max_children: usize,
    pub masks: Vec<String>,
    pub header: HeaderRule,
}

impl Default for ParserConfig {
    fn default() -> Self {
        ParserConfig {
            depth: 4,
            similarity_threshold: 0.4,
            max_children: 100,
            masks: vec![IPV4_MASK.into(), HEX_MASK.into(), INT_MASK.into()],
            header: HeaderRule::default(),
        }
    }
}

impl ParserConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth < 3 {
            return Err(Error::config("parser depth must be at least 3"));
        }
        if !(self.similarity_threshold > 0.0 && self.similarity_threshold <= 1.0) {
            return Err(Error::config("similarity threshold must lie in (0, 1]"));
        }
        if self.max_children < 2 {
            return Err(Error::config("max_children must be at least 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogTemplate {
    pub id: TemplateId,
    pub tokens: Vec<String>,
    pub support: u64,
}

impl LogTemplate {
    pub fn render(&self) -> String {
        self.tokens.join(" ")
    }

    pub fn wildcard_count(&self) -> usize {
        self.tokens.iter().filter(|t| *t == WILDCARD).count()
    }

    /// Fraction of positions where the template token equals the line token.
    fn similarity(&self, tokens: &[String]) -> f64 {
        debug_assert_eq!(self.tokens.len(), tokens.len());
        let equal = self
            .tokens
            .iter()
            .zip(tokens)
            .filter(|(a, b)| a == b)
            .count();
        equal as f64 / self.tokens.len() as f64
    }

    /// Substitutes `variables` into the wildcard slots.
    pub fn fill(&self, variables: &[String]) -> Option<String> {
        if variables.len() != self.wildcard_count() {
            return None;
        }
        let mut vars = variables.iter();
        let filled: Vec<&str> = self
            .tokens
            .iter()
            .map(|t| {
                if t == WILDCARD {
                    vars.next().map(String::as_str).unwrap_or(WILDCARD)
                } else {
                    t.as_str()
                }
            })
            .collect();
        Some(filled.join(" "))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedEvent {
    pub line_no: u64,
    pub template_id: TemplateId,
    pub variables: Vec<String>,
    pub timestamp: Option<f64>,
}

/// SHA-256 over the templates-file rendering of `(id, template)` pairs.
pub fn template_set_hash<'a>(templates: impl IntoIterator<Item = (TemplateId, &'a str)>) -> String {
    let mut hasher = Sha256::new();
    for (id, template) in templates {
        hasher.update(format!("{id}\t{template}\n").as_bytes());
    }
    hex::encode(hasher.finalize())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct Node {
    children: BTreeMap<String, Node>,
    templates: Vec<TemplateId>,
}

/// Mutable parser state: configuration, templates and the routing tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParserState {
    config: ParserConfig,
    templates: BTreeMap<TemplateId, LogTemplate>,
    tree: BTreeMap<usize, Node>,
    next_id: TemplateId,
    #[serde(skip, default = "MaskSet::empty")]
    masks: MaskSet,
    #[serde(skip)]
    by_string: HashMap<String, TemplateId>,
}

impl ParserState {
    pub fn new(config: ParserConfig) -> Result<Self> {
        config.validate()?;
        let masks = MaskSet::new(&config.masks)?;
        Ok(ParserState {
            config,
            templates: BTreeMap::new(),
            tree: BTreeMap::new(),
            next_id: 0,
            masks,
            by_string: HashMap::new(),
        })
    }

    pub fn config(&self) -> &ParserConfig {
        &self.config
    }

    pub fn masks(&self) -> &MaskSet {
        &self.masks
    }

    pub fn templates(&self) -> impl Iterator<Item = &LogTemplate> {
        self.templates.values()
    }

    pub fn template(&self, id: TemplateId) -> Option<&LogTemplate> {
        self.templates.get(&id)
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    /// Number of token layers below the length layer.
    fn prefix_layers(&self, token_count: usize) -> usize {
        (self.config.depth - 3).min(token_count.saturating_sub(1))
    }

    fn candidates(&self, tokens: &[String]) -> &[TemplateId] {
        let Some(mut node) = self.tree.get(&tokens.len()) else {
            return &[];
        };
        for token in &tokens[..self.prefix_layers(tokens.len())] {
            node = match node
                .children
                .get(token)
                .or_else(|| node.children.get(WILDCARD))
            {
                Some(child) => child,
                None => return &[],
            };
        }
        &node.templates
    }

    fn best_match(&self, tokens: &[String]) -> Option<TemplateId> {
        let mut best: Option<(f64, TemplateId)> = None;
        for &id in self.candidates(tokens) {
            let sim = self.templates[&id].similarity(tokens);
            // strict comparison keeps the lowest id on ties (ids are sorted)
            if best.is_none_or(|(s, b)| sim > s || (sim == s && id < b)) {
                best = Some((sim, id));
            }
        }
        best.filter(|(s, _)| *s >= self.config.similarity_threshold)
            .map(|(_, id)| id)
    }

    fn insert_into_tree(&mut self, tokens: &[String], id: TemplateId) {
        let layers = self.prefix_layers(tokens.len());
        let max_children = self.config.max_children;
        let mut node = self.tree.entry(tokens.len()).or_default();
        for token in &tokens[..layers] {
            let key = if node.children.contains_key(token) {
                token.clone()
            } else if token.chars().any(|c| c.is_ascii_digit()) || token == WILDCARD {
                WILDCARD.to_owned()
            } else if node.children.contains_key(WILDCARD) {
                if node.children.len() < max_children {
                    token.clone()
                } else {
                    WILDCARD.to_owned()
                }
            } else if node.children.len() + 1 < max_children {
                token.clone()
            } else {
                WILDCARD.to_owned()
            };
            node = node.children.entry(key).or_default();
        }
        if !node.templates.contains(&id) {
            node.templates.push(id);
            node.templates.sort_unstable();
        }
    }

    /// Assigns a line to a template, creating one if nothing is similar
    /// enough. Variables are extracted against the template as it stands
    /// right after the assignment.
    pub fn parse_line(&mut self, line: &RawLogLine) -> ParsedEvent {
        let raw: Vec<&str> = line.content.split_whitespace().collect();
        let tokens: Vec<String> = raw.iter().map(|t| self.masks.mask_token(t)).collect();
        debug_assert!(!tokens.is_empty(), "RawLogLine content is non-empty");

        let id = match self.best_match(&tokens) {
            Some(id) => {
                let template = self.templates.get_mut(&id).expect("tree ids are live");
                let before = template.render();
                for (slot, token) in template.tokens.iter_mut().zip(&tokens) {
                    if slot != token {
                        *slot = WILDCARD.to_owned();
                    }
                }
                template.support += 1;
                let after = template.render();
                if after != before {
                    self.by_string.remove(&before);
                    self.by_string.entry(after).or_insert(id);
                }
                id
            }
            None => {
                let rendered = tokens.join(" ");
                if let Some(&existing) = self.by_string.get(&rendered) {
                    // same canonical string reached through another tree path
                    self.templates.get_mut(&existing).expect("indexed").support += 1;
                    self.insert_into_tree(&tokens, existing);
                    existing
                } else {
                    let id = self.next_id;
                    self.next_id += 1;
                    self.templates.insert(
                        id,
                        LogTemplate {
                            id,
                            tokens: tokens.clone(),
                            support: 1,
                        },
                    );
                    self.by_string.insert(rendered, id);
                    self.insert_into_tree(&tokens, id);
                    id
                }
            }
        };

        ParsedEvent {
            line_no: line.line_no,
            template_id: id,
            variables: self.extract_variables(id, &raw),
            timestamp: line.timestamp,
        }
    }

    /// Raw tokens sitting in the template's wildcard slots.
    pub fn extract_variables(&self, id: TemplateId, raw_tokens: &[&str]) -> Vec<String> {
        let Some(template) = self.templates.get(&id) else {
            return Vec::new();
        };
        template
            .tokens
            .iter()
            .zip(raw_tokens)
            .filter(|(t, _)| *t == WILDCARD)
            .map(|(_, raw)| (*raw).to_owned())
            .collect()
    }

    /// Looks up the template a line would join, without modifying the state.
    pub fn match_line(&self, content: &str) -> Option<TemplateId> {
        let tokens: Vec<String> = preprocess::mask_tokens(content, &self.masks);
        if tokens.is_empty() {
            return None;
        }
        self.best_match(&tokens)
    }

    /// Parses lines in order. Variables are re-extracted against the final
    /// templates so that every event agrees with the templates file.
    pub fn parse_stream<'a, I>(&mut self, lines: I) -> Vec<ParsedEvent>
    where
        I: IntoIterator<Item = &'a RawLogLine>,
    {
        let lines: Vec<&RawLogLine> = lines.into_iter().collect();
        let mut events: Vec<ParsedEvent> = lines.iter().map(|l| self.parse_line(l)).collect();
        for (event, line) in events.iter_mut().zip(&lines) {
            let raw: Vec<&str> = line.content.split_whitespace().collect();
            event.variables = self.extract_variables(event.template_id, &raw);
        }
        events
    }

    /// Stable digest of the current template set; embedding files carry it
    /// so that vectors are never paired with ids from another snapshot.
    pub fn snapshot_hash(&self) -> String {
        let rendered: Vec<(TemplateId, String)> = self
            .templates
            .values()
            .map(|t| (t.id, t.render()))
            .collect();
        template_set_hash(rendered.iter().map(|(id, s)| (*id, s.as_str())))
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string(self).map_err(|e| Error::format(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut state: ParserState = serde_json::from_str(&text)
            .map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
        state.config.validate()?;
        state.masks = MaskSet::new(&state.config.masks)?;
        state.by_string = state
            .templates
            .values()
            .map(|t| (t.render(), t.id))
            .collect();
        Ok(state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(no: u64, s: &str) -> RawLogLine {
        RawLogLine::new(no, s).unwrap()
    }

    fn state() -> ParserState {
        ParserState::new(ParserConfig::default()).unwrap()
    }

    #[test]
    fn vm_creation_example() {
        let mut st = state();
        let a = st.parse_line(&line(0, "VM Creation took 8 seconds"));
        assert_eq!(
            st.template(a.template_id).unwrap().render(),
            "VM Creation took <*> seconds"
        );
        assert_eq!(a.variables, vec!["8"]);

        let b = st.parse_line(&line(1, "VM Creation took 12 seconds"));
        assert_eq!(b.template_id, a.template_id);
        assert_eq!(b.variables, vec!["12"]);

        let c = st.parse_line(&line(2, "Fatal disk error"));
        assert_ne!(c.template_id, a.template_id);
        assert_eq!(st.len(), 2);
    }

    #[test]
    fn mismatches_become_wildcards() {
        let mut st = state();
        st.parse_line(&line(0, "user alice logged in"));
        let e = st.parse_line(&line(1, "user bob logged in"));
        assert_eq!(
            st.template(e.template_id).unwrap().render(),
            "user <*> logged in"
        );
        assert_eq!(e.variables, vec!["bob"]);
    }

    #[test]
    fn below_threshold_creates_new_template() {
        let mut st = state();
        let a = st.parse_line(&line(0, "alpha beta gamma delta epsilon"));
        // shares only the routing token: 1/5 < 0.4
        let b = st.parse_line(&line(1, "alpha one two three four"));
        assert_ne!(a.template_id, b.template_id);
    }

    #[test]
    fn tie_goes_to_lowest_id() {
        let mut st = state();
        st.parse_line(&line(0, "x p b z"));
        st.parse_line(&line(1, "x q r w"));
        assert_eq!(st.len(), 2);
        // equal agreement (2/4) with both templates
        let e = st.parse_line(&line(2, "x p r y"));
        assert_eq!(e.template_id, 0);
    }

    #[test]
    fn stream_preserves_order_and_handles_empty() {
        let mut st = state();
        assert!(st.parse_stream(&[]).is_empty());
        let lines = vec![line(3, "a b"), line(4, "c d e"), line(9, "a b")];
        let events = st.parse_stream(&lines);
        let nos: Vec<u64> = events.iter().map(|e| e.line_no).collect();
        assert_eq!(nos, vec![3, 4, 9]);
        assert_eq!(events[0].template_id, events[2].template_id);
    }

    #[test]
    fn max_children_overflow_routes_to_wildcard() {
        let cfg = ParserConfig {
            max_children: 3,
            ..ParserConfig::default()
        };
        let mut st = ParserState::new(cfg).unwrap();
        for (i, w) in ["aa", "bb", "cc", "dd"].iter().enumerate() {
            st.parse_line(&line(i as u64, &format!("{w} event happened here")));
        }
        let root = &st.tree[&4];
        assert!(root.children.len() <= 3);
        assert!(root.children.contains_key(WILDCARD));
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.json");
        let mut st = state();
        st.save(&path).unwrap();
        assert_eq!(ParserState::load(&path).unwrap(), st);

        for i in 0..50 {
            st.parse_line(&line(i, &format!("worker {} finished job {}", i % 3, i)));
            st.parse_line(&line(i, "disk quota exceeded"));
        }
        st.save(&path).unwrap();
        let loaded = ParserState::load(&path).unwrap();
        assert_eq!(loaded, st);
        assert_eq!(loaded.snapshot_hash(), st.snapshot_hash());
    }

    #[test]
    fn corrupt_state_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.json");
        std::fs::write(&path, "{not json").unwrap();
        assert!(matches!(ParserState::load(&path), Err(Error::Format(_))));
    }
}
