//! Flat `section.key=value` experiment files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::alteration::{AlterationKind, Severity};
use crate::detector::Label;
use crate::error::{Error, Result};
use crate::nn::{Objective, OptimizerKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    /// Train on normal data, score the labelled test stream.
    Detection,
    /// Token-level alterations of test messages at several intensities.
    Semantic,
    /// Event-level alterations of test segments at several intensities.
    Sequential,
    Transfer,
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "detection" => Ok(Self::Detection),
            "semantic" => Ok(Self::Semantic),
            "sequential" => Ok(Self::Sequential),
            "transfer" => Ok(Self::Transfer),
            _ => Err(Error::config(format!("unknown experiment type {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DataSource {
    Synthetic,
    Files {
        train: PathBuf,
        test: PathBuf,
        labels: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EmbeddingSource {
    Fallback { dim: usize, seed: u64 },
    File(PathBuf),
}

/// Every tunable of an experiment. Keys missing from a spec file keep the
/// values of [`ExperimentSpec::default`], which is sized to finish in well
/// under a minute on the synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub objectives: Vec<Objective>,
    pub data: DataSource,
    pub header_fields: usize,
    pub timestamp_field: Option<usize>,
    pub synth_train_events: usize,
    pub synth_test_events: usize,
    pub synth_noise_pct: f64,
    pub synth_anomaly_pct: f64,
    pub embedding: EmbeddingSource,
    pub parser_depth: usize,
    pub parser_similarity: f64,
    pub parser_max_children: usize,
    pub window_delta: usize,
    pub window_stride: usize,
    pub hidden_size: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub optimizer: OptimizerKind,
    pub clip_norm: Option<f64>,
    pub top_k: usize,
    pub max_distance: f64,
    pub q: f64,
    pub repair_context: bool,
    pub snap_context: bool,
    pub alter_kind: Option<AlterationKind>,
    pub alter_intensities: Vec<usize>,
    /// Percent of test messages (semantic) or segments (sequential) altered.
    pub alter_fraction: f64,
    /// Ground truth for altered items; must be given explicitly.
    pub alter_label: Option<Label>,
    pub alter_block_len: usize,
    pub alter_seeds: usize,
    pub alter_segment: usize,
    pub transfer_severity: Severity,
    pub transfer_fraction: f64,
    pub transfer_few_shot_fraction: f64,
    pub transfer_few_shot_epochs: usize,
    pub transfer_pretrain_epochs: usize,
    pub transfer_zero_shot_only: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            kind: ExperimentKind::Detection,
            seed: 0,
            objectives: vec![Objective::Classification, Objective::Regression],
            data: DataSource::Synthetic,
            header_fields: 0,
            timestamp_field: None,
            synth_train_events: 3000,
            synth_test_events: 3000,
            synth_noise_pct: 5.0,
            synth_anomaly_pct: 2.0,
            embedding: EmbeddingSource::Fallback { dim: 32, seed: 0 },
            parser_depth: 4,
            parser_similarity: 0.4,
            parser_max_children: 100,
            window_delta: 5,
            window_stride: 1,
            hidden_size: 24,
            epochs: 15,
            batch_size: 32,
            lr: 0.01,
            optimizer: OptimizerKind::default(),
            clip_norm: Some(5.0),
            top_k: 3,
            max_distance: 0.3,
            q: 99.0,
            repair_context: true,
            snap_context: true,
            alter_kind: None,
            alter_intensities: vec![1, 2, 4],
            alter_fraction: 10.0,
            alter_label: None,
            alter_block_len: 1,
            alter_seeds: 5,
            alter_segment: 12,
            transfer_severity: Severity::Different,
            transfer_fraction: 15.0,
            transfer_few_shot_fraction: 0.1,
            transfer_few_shot_epochs: 5,
            transfer_pretrain_epochs: 15,
            transfer_zero_shot_only: false,
        }
    }
}

pub const KEYS: &[&str] = &[
    "experiment.type",
    "experiment.seed",
    "model.objective",
    "model.hidden",
    "data.source",
    "data.train",
    "data.test",
    "data.labels",
    "data.header_fields",
    "data.timestamp_field",
    "synth.train_events",
    "synth.test_events",
    "synth.noise_pct",
    "synth.anomaly_pct",
    "embedding.source",
    "embedding.dim",
    "embedding.seed",
    "embedding.path",
    "parser.depth",
    "parser.similarity_threshold",
    "parser.max_children",
    "window.delta",
    "window.stride",
    "train.epochs",
    "train.batch_size",
    "train.lr",
    "train.optimizer",
    "train.clip_norm",
    "detect.top_k",
    "detect.max_distance",
    "detect.q",
    "detect.repair_context",
    "detect.snap_context",
    "alter.kind",
    "alter.intensities",
    "alter.fraction",
    "alter.label",
    "alter.block_len",
    "alter.seeds",
    "alter.segment",
    "transfer.severity",
    "transfer.fraction",
    "transfer.few_shot_fraction",
    "transfer.few_shot_epochs",
    "transfer.pretrain_epochs",
    "transfer.zero_shot_only",
];

fn value<T: FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::config(format!("{key}: cannot parse {raw:?}")))
}

fn optional<T: FromStr>(key: &str, raw: &str) -> Result<Option<T>> {
    match raw {
        "none" | "" => Ok(None),
        _ => value(key, raw).map(Some),
    }
}

fn list<T: FromStr>(key: &str, raw: &str) -> Result<Vec<T>> {
    raw.split(',').map(|v| value(key, v.trim())).collect()
}

impl ExperimentSpec {
    /// Splits the text into `key -> value`, rejecting unknown or repeated
    /// keys. `#` starts a comment line.
    pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
        let mut pairs = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, val) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected key=value", n + 1)))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(Error::config(format!(
                    "line {}: unknown key {key:?}",
                    n + 1
                )));
            }
            if pairs
                .insert(key.to_owned(), val.trim().to_owned())
                .is_some()
            {
                return Err(Error::config(format!(
                    "line {}: duplicate key {key:?}",
                    n + 1
                )));
            }
        }
        Ok(pairs)
    }

    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self> {
        let mut spec = ExperimentSpec::default();
        let get = |k: &str| pairs.get(k).map(String::as_str);
        let mut emb_dim = 32;
        let mut emb_seed = None;
        for (key, raw) in pairs {
            let k = key.as_str();
            match k {
                "experiment.type" => spec.kind = value(k, raw)?,
                "experiment.seed" => spec.seed = value(k, raw)?,
                "model.objective" => {
                    spec.objectives = match raw.as_str() {
                        "both" => vec![Objective::Classification, Objective::Regression],
                        _ => list(k, raw)?,
                    }
                }
                "model.hidden" => spec.hidden_size = value(k, raw)?,
                "data.header_fields" => spec.header_fields = value(k, raw)?,
                "data.timestamp_field" => spec.timestamp_field = optional(k, raw)?,
                "synth.train_events" => spec.synth_train_events = value(k, raw)?,
                "synth.test_events" => spec.synth_test_events = value(k, raw)?,
                "synth.noise_pct" => spec.synth_noise_pct = value(k, raw)?,
                "synth.anomaly_pct" => spec.synth_anomaly_pct = value(k, raw)?,
                "embedding.dim" => emb_dim = value(k, raw)?,
                "embedding.seed" => emb_seed = Some(value(k, raw)?),
                "parser.depth" => spec.parser_depth = value(k, raw)?,
                "parser.similarity_threshold" => spec.parser_similarity = value(k, raw)?,
                "parser.max_children" => spec.parser_max_children = value(k, raw)?,
                "window.delta" => spec.window_delta = value(k, raw)?,
                "window.stride" => spec.window_stride = value(k, raw)?,
                "train.epochs" => spec.epochs = value(k, raw)?,
                "train.batch_size" => spec.batch_size = value(k, raw)?,
                "train.lr" => spec.lr = value(k, raw)?,
                "train.optimizer" => spec.optimizer = value(k, raw)?,
                "train.clip_norm" => spec.clip_norm = optional(k, raw)?,
                "detect.top_k" => spec.top_k = value(k, raw)?,
                "detect.max_distance" => spec.max_distance = value(k, raw)?,
                "detect.q" => spec.q = value(k, raw)?,
                "detect.repair_context" => spec.repair_context = value(k, raw)?,
                "detect.snap_context" => spec.snap_context = value(k, raw)?,
                "alter.kind" => spec.alter_kind = Some(value(k, raw)?),
                "alter.intensities" => spec.alter_intensities = list(k, raw)?,
                "alter.fraction" => spec.alter_fraction = value(k, raw)?,
                "alter.label" => spec.alter_label = Some(value(k, raw)?),
                "alter.block_len" => spec.alter_block_len = value(k, raw)?,
                "alter.seeds" => spec.alter_seeds = value(k, raw)?,
                "alter.segment" => spec.alter_segment = value(k, raw)?,
                "transfer.severity" => spec.transfer_severity = value(k, raw)?,
                "transfer.fraction" => spec.transfer_fraction = value(k, raw)?,
                "transfer.few_shot_fraction" => spec.transfer_few_shot_fraction = value(k, raw)?,
                "transfer.few_shot_epochs" => spec.transfer_few_shot_epochs = value(k, raw)?,
                "transfer.pretrain_epochs" => spec.transfer_pretrain_epochs = value(k, raw)?,
                "transfer.zero_shot_only" => spec.transfer_zero_shot_only = value(k, raw)?,
                // handled below
                "data.source" | "data.train" | "data.test" | "data.labels" | "embedding.source"
                | "embedding.path" => {}
                _ => return Err(Error::config(format!("unknown key {k:?}"))),
            }
        }

        spec.data = match get("data.source").unwrap_or("synthetic") {
            "synthetic" => DataSource::Synthetic,
            "files" => DataSource::Files {
                train: get("data.train")
                    .ok_or_else(|| Error::config("data.source=files needs data.train"))?
                    .into(),
                test: get("data.test")
                    .ok_or_else(|| Error::config("data.source=files needs data.test"))?
                    .into(),
                labels: get("data.labels").map(PathBuf::from),
            },
            other => return Err(Error::config(format!("unknown data.source {other:?}"))),
        };
        spec.embedding = match get("embedding.source").unwrap_or("fallback") {
            "fallback" => EmbeddingSource::Fallback {
                dim: emb_dim,
                seed: emb_seed.unwrap_or(spec.seed),
            },
            "file" => EmbeddingSource::File(
                get("embedding.path")
                    .ok_or_else(|| Error::config("embedding.source=file needs embedding.path"))?
                    .into(),
            ),
            other => return Err(Error::config(format!("unknown embedding.source {other:?}"))),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_pairs(&Self::parse_pairs(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Checks consistency and that referenced files exist.
    pub fn validate(&self) -> Result<()> {
        if self.objectives.is_empty() {
            return Err(Error::config("model.objective selects nothing"));
        }
        if matches!(
            self.kind,
            ExperimentKind::Semantic | ExperimentKind::Sequential
        ) {
            let kind = self
                .alter_kind
                .ok_or_else(|| Error::config("alteration experiments need alter.kind"))?;
            if kind.is_semantic() != (self.kind == ExperimentKind::Semantic) {
                return Err(Error::config(format!(
                    "alter.kind {kind} does not fit this experiment type"
                )));
            }
            if self.alter_label.is_none() {
                return Err(Error::config(
                    "alteration experiments need alter.label=normal (robustness) or alter.label=anomaly (detection)",
                ));
            }
            if self.alter_intensities.is_empty() || self.alter_seeds == 0 {
                return Err(Error::config(
                    "alter.intensities and alter.seeds must be non-empty",
                ));
            }
            if !(0.0..=100.0).contains(&self.alter_fraction) {
                return Err(Error::config("alter.fraction must lie in [0, 100]"));
            }
        }
        let mut paths: Vec<&Path> = Vec::new();
        if let DataSource::Files {
            train,
            test,
            labels,
        } = &self.data
        {
            paths.extend([train.as_path(), test.as_path()]);
            paths.extend(labels.as_deref());
        }
        if let EmbeddingSource::File(p) = &self.embedding {
            paths.push(p);
        }
        if let Some(missing) = paths.into_iter().find(|p| !p.exists()) {
            return Err(Error::config(format!(
                "{} does not exist",
                missing.display()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_from_empty_text() {
        assert_eq!(
            ExperimentSpec::parse("# nothing\n").unwrap(),
            ExperimentSpec::default()
        );
    }

    #[test]
    fn values_are_applied() {
        let spec = ExperimentSpec::parse(
            "experiment.type=semantic\nalter.kind=SemSwap\nalter.label=normal\nalter.intensities=1, 3\nmodel.objective=regression\ntrain.clip_norm=none\n",
        )
        .unwrap();
        assert_eq!(spec.kind, ExperimentKind::Semantic);
        assert_eq!(spec.alter_intensities, vec![1, 3]);
        assert_eq!(spec.objectives, vec![Objective::Regression]);
        assert_eq!(spec.clip_norm, None);
    }

    #[test]
    fn unknown_key_rejected() {
        let err = ExperimentSpec::parse("parser.dept=4\n").unwrap_err();
        assert!(err.to_string().contains("parser.dept"));
    }

    #[test]
    fn alteration_label_required() {
        let err =
            ExperimentSpec::parse("experiment.type=semantic\nalter.kind=SemSwap\n").unwrap_err();
        assert!(err.to_string().contains("alter.label"));
    }

    #[test]
    fn missing_files_rejected() {
        let err = ExperimentSpec::parse(
            "data.source=files\ndata.train=/nonexistent/a\ndata.test=/nonexistent/b\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("does not exist"));
    }

    #[test]
    fn embedding_seed_follows_experiment_seed() {
        let spec = ExperimentSpec::parse("experiment.seed=9\n").unwrap();
        assert_eq!(
            spec.embedding,
            EmbeddingSource::Fallback { dim: 32, seed: 9 }
        );
    }
}
