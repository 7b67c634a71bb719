use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{compute_metrics, label_verdicts, Metrics};
use super::spec::{DataSource, EmbeddingSource, ExperimentKind, ExperimentSpec};
use super::synth::{generate, SynthConfig};
use crate::alteration::{
    alter_message, alter_sequence, corpus_vocabulary, synthesize_dataset_b, AlterationConfig,
    AlterationKind, AlteredCorpusSpec,
};
use crate::detector::{
    read_labels, write_verdicts, DecisionParams, Label, TrainConfig, Verdict, WindowConfig,
};
use crate::embedding::{load_store, FallbackEmbedder, TemplateEmbedder};
use crate::error::{Error, Result};
use crate::nn::Objective;
use crate::parser::{HeaderRule, ParserConfig};
use crate::pipeline::{raw_lines, train_detector, DetectorSettings, TrainedDetector};
use crate::transfer::{run_transfer_experiment, TransferConfig, TransferReport};

/// Train and test lines with ground truth for the test lines.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCorpus {
    pub train: Vec<String>,
    pub test: Vec<String>,
    pub labels: BTreeMap<u64, Label>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlteredRun {
    pub seed: u64,
    pub altered_items: usize,
    /// Share of altered items that were flagged.
    pub altered_flag_rate: f64,
    pub false_positive_rate: f64,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub intensity: usize,
    pub mean_altered_flag_rate: f64,
    pub mean_false_positive_rate: f64,
    pub mean_f1: f64,
    pub runs: Vec<AlteredRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveReport {
    pub objective: Objective,
    pub templates: usize,
    pub loss_curve: Vec<f64>,
    pub threshold: f64,
    pub metrics: Metrics,
    pub false_positive_rate: f64,
    pub verdicts_file: Option<String>,
    pub sweep: Vec<SweepPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub spec: ExperimentSpec,
    pub seed: u64,
    pub train_lines: usize,
    pub test_lines: usize,
    pub results: Vec<ObjectiveReport>,
    pub transfer: Option<TransferReport>,
}

impl Report {
    /// Deterministic JSON rendering.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().map(String::from).collect())
}

pub fn load_corpus(spec: &ExperimentSpec) -> Result<LabeledCorpus> {
    match &spec.data {
        DataSource::Synthetic => {
            let corpus = generate(&SynthConfig {
                train_events: spec.synth_train_events,
                test_events: spec.synth_test_events,
                noise_pct: spec.synth_noise_pct,
                anomaly_pct: spec.synth_anomaly_pct,
                seed: spec.seed,
            })?;
            Ok(LabeledCorpus {
                train: corpus.train,
                test: corpus.test,
                labels: corpus.labels,
            })
        }
        DataSource::Files {
            train,
            test,
            labels,
        } => Ok(LabeledCorpus {
            train: read_lines(train)?,
            test: read_lines(test)?,
            labels: labels
                .as_deref()
                .map(read_labels)
                .transpose()?
                .unwrap_or_default(),
        }),
    }
}

pub fn make_embedder(spec: &ExperimentSpec) -> Result<Box<dyn TemplateEmbedder>> {
    Ok(match &spec.embedding {
        EmbeddingSource::Fallback { dim, seed } => Box::new(FallbackEmbedder::new(*dim, *seed)?),
        EmbeddingSource::File(path) => Box::new(load_store(path)?),
    })
}

pub fn header_rule(spec: &ExperimentSpec) -> HeaderRule {
    HeaderRule {
        fields: spec.header_fields,
        timestamp_field: spec.timestamp_field,
    }
}

pub fn detector_settings(spec: &ExperimentSpec, objective: Objective) -> DetectorSettings {
    DetectorSettings {
        parser: ParserConfig {
            depth: spec.parser_depth,
            similarity_threshold: spec.parser_similarity,
            max_children: spec.parser_max_children,
            header: header_rule(spec),
            ..ParserConfig::default()
        },
        window: WindowConfig {
            delta: spec.window_delta,
            stride: spec.window_stride,
        },
        hidden_size: spec.hidden_size,
        train: TrainConfig {
            epochs: spec.epochs,
            batch_size: spec.batch_size,
            lr: spec.lr,
            optimizer: spec.optimizer,
            clip_norm: spec.clip_norm,
            seed: spec.seed,
        },
        decision: DecisionParams {
            top_k: spec.top_k,
            max_distance: spec.max_distance,
            q: spec.q,
            repair_context: spec.repair_context,
            snap_context: spec.snap_context,
            ..DecisionParams::new(objective)
        },
    }
}

/// Seed for one (intensity, repetition) cell of a sweep.
fn cell_seed(seed: u64, intensity: usize, rep: usize) -> u64 {
    seed ^ (intensity as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (rep as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9)
}

/// Altered test lines, their labels and the altered line numbers.
pub type AlteredStream = (Vec<String>, BTreeMap<u64, Label>, Vec<u64>);

/// Test stream with token-level alterations on a sample of normal lines.
/// Returns the new lines, their labels and the altered line numbers.
pub fn alter_messages(
    corpus: &LabeledCorpus,
    vocab: &[String],
    kind: AlterationKind,
    intensity: usize,
    fraction: f64,
    label: Label,
    seed: u64,
) -> Result<AlteredStream> {
    let normal: Vec<usize> = (0..corpus.test.len())
        .filter(|i| corpus.labels.get(&(*i as u64 + 1)) != Some(&Label::Anomaly))
        .filter(|i| !corpus.test[*i].trim().is_empty())
        .collect();
    let count = ((fraction * corpus.test.len() as f64 / 100.0).round() as usize).min(normal.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = sample(&mut rng, normal.len(), count)
        .into_iter()
        .map(|i| normal[i])
        .collect();
    picked.sort_unstable();

    let mut lines = corpus.test.clone();
    let mut labels = corpus.labels.clone();
    let mut altered = Vec::with_capacity(count);
    for i in picked {
        let tokens: Vec<String> = lines[i].split_whitespace().map(String::from).collect();
        let cap = match kind {
            AlterationKind::SemDelete => tokens.len() - 1,
            AlterationKind::SemSwap => tokens.len(),
            _ => usize::MAX,
        };
        let out = alter_message(&tokens, kind, intensity.min(cap), vocab, &mut rng)?;
        lines[i] = out.join(" ");
        labels.insert(i as u64 + 1, label);
        altered.push(i as u64 + 1);
    }
    Ok((lines, labels, altered))
}

/// Test stream with event-level alterations on a sample of fixed-length
/// segments. Events of an altered segment that no longer sit where they
/// were get `label`.
pub fn alter_segments(
    corpus: &LabeledCorpus,
    cfg: &AlterationConfig,
    segment: usize,
    fraction: f64,
    label: Label,
) -> Result<AlteredStream> {
    if segment < 2 {
        return Err(Error::config("alter.segment must be at least 2"));
    }
    let segments: Vec<Vec<usize>> = (0..corpus.test.len())
        .collect::<Vec<_>>()
        .chunks(segment)
        .map(<[usize]>::to_vec)
        .collect();
    let count = ((fraction * segments.len() as f64 / 100.0).round() as usize).min(segments.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let chosen: std::collections::BTreeSet<usize> = sample(&mut rng, segments.len(), count)
        .into_iter()
        .collect();

    let mut lines = Vec::with_capacity(corpus.test.len());
    let mut labels = BTreeMap::new();
    let mut altered = Vec::new();
    for (s, seg) in segments.iter().enumerate() {
        let out = if chosen.contains(&s) && seg.len() >= 2 {
            alter_sequence(seg, cfg, &mut rng)?
        } else {
            seg.clone()
        };
        for (pos, &orig) in out.iter().enumerate() {
            let line_no = lines.len() as u64 + 1;
            lines.push(corpus.test[orig].clone());
            let moved = seg.get(pos) != Some(&orig);
            let truth = corpus
                .labels
                .get(&(orig as u64 + 1))
                .copied()
                .unwrap_or(Label::Normal);
            if moved {
                labels.insert(line_no, label);
                altered.push(line_no);
            } else {
                labels.insert(line_no, truth);
            }
        }
    }
    Ok((lines, labels, altered))
}

fn altered_run(
    verdicts: &[Verdict],
    labels: &BTreeMap<u64, Label>,
    altered: &[u64],
    seed: u64,
) -> Result<AlteredRun> {
    let metrics = compute_metrics(&label_verdicts(verdicts, labels))?;
    let flagged: BTreeMap<u64, Label> = verdicts.iter().map(|v| (v.line_no, v.label)).collect();
    let scored: Vec<Label> = altered
        .iter()
        .filter_map(|l| flagged.get(l).copied())
        .collect();
    let hits = scored.iter().filter(|l| **l == Label::Anomaly).count();
    Ok(AlteredRun {
        seed,
        altered_items: scored.len(),
        altered_flag_rate: if scored.is_empty() {
            0.0
        } else {
            hits as f64 / scored.len() as f64
        },
        false_positive_rate: metrics.false_positive_rate(),
        metrics,
    })
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn sweep(
    spec: &ExperimentSpec,
    corpus: &LabeledCorpus,
    detector: &TrainedDetector,
    embedder: &dyn TemplateEmbedder,
) -> Result<Vec<SweepPoint>> {
    let kind = spec.alter_kind.expect("validated");
    let label = spec.alter_label.expect("validated");
    let header = header_rule(spec);
    let vocab = corpus_vocabulary(&corpus.train);
    let mut points = Vec::new();
    for &intensity in &spec.alter_intensities {
        let mut runs = Vec::with_capacity(spec.alter_seeds);
        for rep in 0..spec.alter_seeds {
            let seed = cell_seed(spec.seed, intensity, rep);
            let (lines, labels, altered) = if kind.is_semantic() {
                alter_messages(
                    corpus,
                    &vocab,
                    kind,
                    intensity,
                    spec.alter_fraction,
                    label,
                    seed,
                )?
            } else {
                let cfg = AlterationConfig {
                    kind,
                    intensity,
                    block_len: spec.alter_block_len,
                    seed,
                };
                alter_segments(corpus, &cfg, spec.alter_segment, spec.alter_fraction, label)?
            };
            let verdicts = detector.detect(&raw_lines(&lines, &header), embedder)?;
            runs.push(altered_run(&verdicts, &labels, &altered, seed)?);
        }
        points.push(SweepPoint {
            intensity,
            mean_altered_flag_rate: mean(runs.iter().map(|r| r.altered_flag_rate)),
            mean_false_positive_rate: mean(runs.iter().map(|r| r.false_positive_rate)),
            mean_f1: mean(runs.iter().map(|r| r.metrics.f1)),
            runs,
        });
    }
    Ok(points)
}

/// Runs the experiment described by `spec`. When `out_dir` is given, the
/// per-event verdicts of the unaltered test stream are written there.
pub fn run_experiment(spec: &ExperimentSpec, out_dir: Option<&Path>) -> Result<Report> {
    spec.validate()?;
    let corpus = load_corpus(spec).map_err(|e| e.in_stage("load"))?;
    let embedder = make_embedder(spec).map_err(|e| e.in_stage("embed"))?;
    let header = header_rule(spec);
    let train = raw_lines(&corpus.train, &header);
    let test = raw_lines(&corpus.test, &header);

    let mut report = Report {
        spec: spec.clone(),
        seed: spec.seed,
        train_lines: train.len(),
        test_lines: test.len(),
        results: Vec::new(),
        transfer: None,
    };

    if spec.kind == ExperimentKind::Transfer {
        let b_spec =
            AlteredCorpusSpec::new(spec.transfer_fraction, spec.transfer_severity, spec.seed);
        let (lines_b, _) =
            synthesize_dataset_b(&corpus.test, &b_spec).map_err(|e| e.in_stage("alter"))?;
        let settings: Vec<DetectorSettings> = spec
            .objectives
            .iter()
            .map(|o| detector_settings(spec, *o))
            .collect();
        let cfg = TransferConfig {
            pretrain_epochs: spec.transfer_pretrain_epochs,
            few_shot_fraction: spec.transfer_few_shot_fraction,
            few_shot_epochs: spec.transfer_few_shot_epochs,
            zero_shot_only: spec.transfer_zero_shot_only,
        };
        report.transfer = Some(run_transfer_experiment(
            &train,
            &raw_lines(&lines_b, &header),
            &corpus.labels,
            &settings,
            &cfg,
            embedder.as_ref(),
        )?);
        return Ok(report);
    }

    for &objective in &spec.objectives {
        let detector = train_detector(
            &train,
            &detector_settings(spec, objective),
            embedder.as_ref(),
        )?;
        let verdicts = detector.detect(&test, embedder.as_ref())?;
        let metrics = compute_metrics(&label_verdicts(&verdicts, &corpus.labels))
            .map_err(|e| e.in_stage("score"))?;
        let verdicts_file = match out_dir {
            Some(dir) => {
                let name = format!("verdicts-{objective}.tsv");
                write_verdicts(&verdicts, dir.join(&name)).map_err(|e| e.in_stage("write"))?;
                Some(name)
            }
            None => None,
        };
        let sweep = match spec.kind {
            ExperimentKind::Semantic | ExperimentKind::Sequential => {
                sweep(spec, &corpus, &detector, embedder.as_ref())
                    .map_err(|e| e.in_stage("alter"))?
            }
            _ => Vec::new(),
        };
        report.results.push(ObjectiveReport {
            objective,
            templates: detector.store.len(),
            loss_curve: detector.loss_curve.clone(),
            threshold: detector.decision.threshold,
            false_positive_rate: metrics.false_positive_rate(),
            metrics,
            verdicts_file,
            sweep,
        });
    }
    Ok(report)
}
