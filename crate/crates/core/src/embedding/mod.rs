//! Template embeddings, cosine geometry and nearest-template matching.

mod fallback;
mod logvec;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::parser::TemplateId;

pub use fallback::FallbackEmbedder;
pub use logvec::{load_store, save_store, FORMAT_TAG};

/// A finite real vector representing one template.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("embedding"));
        }
        Ok(Embedding(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for Embedding {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `1 - a.b / (|a| |b|)`, clamped to `[0, 2]`.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((1.0 - dot / (na * nb)).clamp(0.0, 2.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoreEntry {
    pub template: String,
    pub vector: Embedding,
}

/// Embeddings for the templates of one parser snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    model_name: String,
    parser_hash: String,
    entries: BTreeMap<TemplateId, StoreEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchResult {
    pub template_id: TemplateId,
    pub distance: f64,
}

/// Outcome of matching against a store with a distance cutoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TemplateMatch {
    Matched(MatchResult),
    /// Even the closest template is farther than the cutoff.
    NoMatch(MatchResult),
}

impl TemplateMatch {
    pub fn closest(&self) -> MatchResult {
        match *self {
            TemplateMatch::Matched(m) | TemplateMatch::NoMatch(m) => m,
        }
    }
}

impl EmbeddingStore {
    pub fn new(dim: usize, model_name: impl Into<String>, parser_hash: impl Into<String>) -> Self {
        EmbeddingStore {
            dim,
            model_name: model_name.into(),
            parser_hash: parser_hash.into(),
            entries: BTreeMap::new(),
        }
    }

    /// Embeds every `(id, template)` pair.
    pub fn from_templates<'a, E: TemplateEmbedder + ?Sized>(
        templates: impl IntoIterator<Item = (TemplateId, &'a str)>,
        embedder: &E,
        parser_hash: impl Into<String>,
    ) -> Result<Self> {
        let mut store = EmbeddingStore::new(embedder.dim(), embedder.model_name(), parser_hash);
        for (id, template) in templates {
            store.insert(id, template, embedder.embed_template(template)?)?;
        }
        Ok(store)
    }

    /// Entry whose template string is exactly `template`.
    pub fn find_template(&self, template: &str) -> Option<(TemplateId, &StoreEntry)> {
        self.iter().find(|(_, e)| e.template == template)
    }

    pub fn insert(
        &mut self,
        id: TemplateId,
        template: impl Into<String>,
        vector: Embedding,
    ) -> Result<()> {
        if vector.dim() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                found: vector.dim(),
            });
        }
        if norm(vector.as_slice()) == 0.0 {
            return Err(Error::ZeroVector);
        }
        self.entries.insert(
            id,
            StoreEntry {
                template: template.into(),
                vector,
            },
        );
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn model_name(&self) -> &str {
        &self.model_name
    }

    pub fn parser_hash(&self) -> &str {
        &self.parser_hash
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, id: TemplateId) -> bool {
        self.entries.contains_key(&id)
    }

    pub fn get(&self, id: TemplateId) -> Option<&StoreEntry> {
        self.entries.get(&id)
    }

    pub fn vector(&self, id: TemplateId) -> Option<&[f64]> {
        self.entries.get(&id).map(|e| e.vector.as_slice())
    }

    pub fn ids(&self) -> impl Iterator<Item = TemplateId> + '_ {
        self.entries.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (TemplateId, &StoreEntry)> {
        self.entries.iter().map(|(id, e)| (*id, e))
    }

    /// Closest stored template by cosine distance; ties go to the lowest id.
    pub fn nearest(&self, v: &[f64]) -> Result<MatchResult> {
        let mut best: Option<MatchResult> = None;
        for (&template_id, entry) in &self.entries {
            let distance = cosine_distance(v, entry.vector.as_slice())?;
            if best.is_none_or(|b| distance < b.distance) {
                best = Some(MatchResult {
                    template_id,
                    distance,
                });
            }
        }
        best.ok_or(Error::EmptyStore)
    }
}

/// Anything that can turn a template string into a vector.
pub trait TemplateEmbedder {
    fn dim(&self) -> usize;
    fn model_name(&self) -> String;
    fn embed_template(&self, template: &str) -> Result<Embedding>;
}

impl TemplateEmbedder for FallbackEmbedder {
    fn dim(&self) -> usize {
        FallbackEmbedder::dim(self)
    }

    fn model_name(&self) -> String {
        FallbackEmbedder::model_name(self)
    }

    fn embed_template(&self, template: &str) -> Result<Embedding> {
        Ok(self.embed_str(template))
    }
}

/// A store embeds exactly the template strings it holds, so externally
/// computed vectors can stand in for a live model.
impl TemplateEmbedder for EmbeddingStore {
    fn dim(&self) -> usize {
        self.dim
    }

    fn model_name(&self) -> String {
        self.model_name.clone()
    }

    fn embed_template(&self, template: &str) -> Result<Embedding> {
        self.find_template(template)
            .map(|(_, e)| e.vector.clone())
            .ok_or_else(|| Error::MissingEmbedding(template.to_owned()))
    }
}

/// Nearest stored template, or `NoMatch` when it lies beyond `max_distance`.
pub fn nearest_template(
    v: &[f64],
    store: &EmbeddingStore,
    max_distance: f64,
) -> Result<TemplateMatch> {
    let m = store.nearest(v)?;
    Ok(if m.distance > max_distance {
        TemplateMatch::NoMatch(m)
    } else {
        TemplateMatch::Matched(m)
    })
}
