//! Carrying a trained detector over to an updated system: map the new
//! templates onto known ones, fine-tune briefly on the start of the new
//! stream, then detect on the rest.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::detector::{
    calibrate_regression_threshold, detect_stream, fit, make_windows, DecisionParams,
    DetectorModel, EventWindow, Label, StreamEvent, TrainConfig,
};
use crate::embedding::{EmbeddingStore, TemplateEmbedder};
use crate::error::{Error, Result};
use crate::eval::{compute_metrics, label_verdicts, Metrics};
use crate::nn::Objective;
use crate::parser::{ParsedEvent, ParserState, RawLogLine, TemplateId};
use crate::pipeline::{
    embed_templates, parse_corpus, train_detector, DetectorSettings, TrainedDetector,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MappedTemplate {
    pub template_id: TemplateId,
    pub distance: f64,
}

/// Nearest known template for every template of the new system.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TemplateMapping {
    pub entries: BTreeMap<TemplateId, MappedTemplate>,
}

impl TemplateMapping {
    pub fn get(&self, id: TemplateId) -> Option<MappedTemplate> {
        self.entries.get(&id).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn mean_distance(&self) -> f64 {
        if self.entries.is_empty() {
            return 0.0;
        }
        self.entries.values().map(|m| m.distance).sum::<f64>() / self.entries.len() as f64
    }

    pub fn max_distance(&self) -> f64 {
        self.entries
            .values()
            .map(|m| m.distance)
            .fold(0.0, f64::max)
    }
}

pub fn map_templates(
    store_a: &EmbeddingStore,
    store_b: &EmbeddingStore,
) -> Result<TemplateMapping> {
    if store_a.dim() != store_b.dim() {
        return Err(Error::DimMismatch {
            expected: store_a.dim(),
            found: store_b.dim(),
        });
    }
    if store_a.is_empty() || store_b.is_empty() {
        return Err(Error::EmptyStore);
    }
    let entries = store_b
        .iter()
        .map(|(id, entry)| {
            let m = store_a.nearest(entry.vector.as_slice())?;
            Ok((
                id,
                MappedTemplate {
                    template_id: m.template_id,
                    distance: m.distance,
                },
            ))
        })
        .collect::<Result<_>>()?;
    Ok(TemplateMapping { entries })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferConfig {
    pub pretrain_epochs: usize,
    /// Leading share of the new stream used for fine-tuning, in (0, 1).
    pub few_shot_fraction: f64,
    pub few_shot_epochs: usize,
    /// Skip fine-tuning and report the zero-shot model only.
    pub zero_shot_only: bool,
}

impl Default for TransferConfig {
    fn default() -> Self {
        TransferConfig {
            pretrain_epochs: 60,
            few_shot_fraction: 0.1,
            few_shot_epochs: 5,
            zero_shot_only: false,
        }
    }
}

impl TransferConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.few_shot_fraction > 0.0 && self.few_shot_fraction < 1.0) {
            return Err(Error::config(
                "few_shot_fraction must lie strictly between 0 and 1",
            ));
        }
        Ok(())
    }
}

/// Fine-tuning windows over the new stream, built the way the detector will
/// see it. Targets are the mapped known templates, so the classification
/// head keeps its size; windows whose target maps farther than
/// `decision.max_distance` are dropped because such events are flagged
/// without consulting the model. With `decision.snap_context`, inputs that
/// map within `max_distance` are replaced by their known template's vector.
pub fn mapped_windows(
    events: &[ParsedEvent],
    store_a: &EmbeddingStore,
    store_b: &EmbeddingStore,
    mapping: &TemplateMapping,
    window: &crate::detector::WindowConfig,
    decision: &DecisionParams,
) -> Result<Vec<EventWindow>> {
    let vectors: Vec<(TemplateId, Vec<f64>)> = events
        .iter()
        .map(|e| {
            let id = e.template_id;
            let mapped = mapping.get(id).ok_or(Error::UnknownTemplate(id))?;
            let v = if decision.snap_context && mapped.distance <= decision.max_distance {
                store_a.vector(mapped.template_id)
            } else {
                store_b.vector(id)
            };
            Ok((id, v.ok_or(Error::UnknownTemplate(id))?.to_vec()))
        })
        .collect::<Result<_>>()?;
    let mut windows = make_windows(&vectors, window)?;
    windows.retain(|w| {
        mapping
            .get(w.target_class)
            .is_some_and(|m| m.distance <= decision.max_distance)
    });
    for w in &mut windows {
        let mapped = mapping.get(w.target_class).expect("retained");
        w.target_class = mapped.template_id;
        w.target_embedding = store_a
            .vector(mapped.template_id)
            .expect("mapping targets are in A")
            .to_vec();
    }
    Ok(windows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FineTuneOutcome {
    pub loss_before: f64,
    pub loss_after: f64,
    /// Loss on the fine-tuning windows after each epoch.
    pub curve: Vec<f64>,
}

/// Fine-tunes on the new system's head windows and keeps the parameters
/// with the lowest loss on them, which may be the starting point.
pub fn few_shot_finetune(
    model: &DetectorModel,
    windows: &[EventWindow],
    cfg: &TrainConfig,
) -> Result<(DetectorModel, FineTuneOutcome)> {
    if windows.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let loss_before = model.mean_loss(windows)?;
    let mut best = (loss_before, model.clone());
    let mut current = model.clone();
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let one = TrainConfig {
            epochs: 1,
            seed: cfg.seed.wrapping_add(epoch as u64),
            ..cfg.clone()
        };
        fit(&mut current, windows, &one).map_err(|e| match e {
            Error::DivergenceDetected { .. } => Error::DivergenceDetected { epoch },
            other => other,
        })?;
        let loss = current.mean_loss(windows)?;
        curve.push(loss);
        if loss < best.0 {
            best = (loss, current.clone());
        }
    }
    Ok((
        best.1,
        FineTuneOutcome {
            loss_before,
            loss_after: best.0,
            curve,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferRun {
    pub head_loss: f64,
    pub threshold: f64,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveTransfer {
    pub objective: Objective,
    pub pretrain_curve: Vec<f64>,
    pub zero_shot: TransferRun,
    pub fine_tuned: Option<TransferRun>,
    pub fine_tune_curve: Vec<f64>,
    /// `1 - fine_tuned.head_loss / zero_shot.head_loss`.
    pub loss_reduction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingSummary {
    pub templates_a: usize,
    pub templates_b: usize,
    pub mean_distance: f64,
    pub max_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub config: TransferConfig,
    pub mapping: MappingSummary,
    pub head_lines: usize,
    pub tail_lines: usize,
    pub results: Vec<ObjectiveTransfer>,
}

/// Parses the new system's lines against A's templates without changing
/// them: lines that fit a known template keep it, all others are mined
/// into new templates on a copy of A's parser.
pub fn parse_against(
    parser_a: &ParserState,
    lines: &[RawLogLine],
) -> (ParserState, Vec<ParsedEvent>) {
    let mut parser_b = parser_a.clone();
    let mut events: Vec<ParsedEvent> = lines
        .iter()
        .map(|line| match parser_a.match_line(&line.content) {
            Some(id) => ParsedEvent {
                line_no: line.line_no,
                template_id: id,
                variables: Vec::new(),
                timestamp: line.timestamp,
            },
            None => parser_b.parse_line(line),
        })
        .collect();
    for (event, line) in events.iter_mut().zip(lines) {
        let raw: Vec<&str> = line.content.split_whitespace().collect();
        event.variables = parser_b.extract_variables(event.template_id, &raw);
    }
    (parser_b, events)
}

/// The new system as the detector sees it. Events of templates A already
/// knew keep their ids; the rest carry only their vectors.
fn b_stream(
    events: &[ParsedEvent],
    store_b: &EmbeddingStore,
    parser_a: &ParserState,
) -> Vec<StreamEvent> {
    events
        .iter()
        .map(|e| StreamEvent {
            line_no: e.line_no,
            template_id: parser_a.template(e.template_id).map(|_| e.template_id),
            embedding: store_b
                .vector(e.template_id)
                .expect("parsed ids are embedded")
                .to_vec(),
        })
        .collect()
}

fn score_tail(
    model: &DetectorModel,
    stream: &[StreamEvent],
    decision: &DecisionParams,
    store_a: &EmbeddingStore,
    labels: &BTreeMap<u64, Label>,
    first_tail_line: u64,
) -> Result<Metrics> {
    let verdicts = detect_stream(model, stream, decision, store_a)?;
    let tail: Vec<_> = verdicts
        .into_iter()
        .filter(|v| v.line_no >= first_tail_line)
        .collect();
    compute_metrics(&label_verdicts(&tail, labels))
}

/// Pretrains on A, maps B's templates onto A's, fine-tunes on B's head and
/// scores both the zero-shot and the fine-tuned model on B's tail.
pub fn run_transfer_experiment<E: TemplateEmbedder + ?Sized>(
    lines_a: &[RawLogLine],
    lines_b: &[RawLogLine],
    labels_b: &BTreeMap<u64, Label>,
    settings: &[DetectorSettings],
    cfg: &TransferConfig,
    embedder: &E,
) -> Result<TransferReport> {
    cfg.validate()?;
    let parser_config = &settings
        .first()
        .ok_or_else(|| Error::config("no objective selected"))?
        .parser;
    let (parser_a, _) = parse_corpus(lines_a, parser_config).map_err(|e| e.in_stage("parse"))?;
    let (parser_b, events_b) = parse_against(&parser_a, lines_b);
    let store_b = embed_templates(&parser_b, embedder).map_err(|e| e.in_stage("embed"))?;
    let head_len = ((lines_b.len() as f64) * cfg.few_shot_fraction).round() as usize;
    let head_len = head_len.clamp(1, lines_b.len().saturating_sub(1).max(1));
    let first_tail_line = lines_b.get(head_len).map_or(u64::MAX, |l| l.line_no);
    let stream = b_stream(&events_b, &store_b, &parser_a);

    let mut results = Vec::new();
    let mut summary = None;
    for s in settings {
        let pretrain = DetectorSettings {
            train: TrainConfig {
                epochs: cfg.pretrain_epochs,
                ..s.train.clone()
            },
            ..s.clone()
        };
        let TrainedDetector {
            store: store_a,
            model,
            decision,
            loss_curve,
            windows: windows_a,
            ..
        } = train_detector(lines_a, &pretrain, embedder)?;
        let mapping = map_templates(&store_a, &store_b).map_err(|e| e.in_stage("map"))?;
        summary.get_or_insert(MappingSummary {
            templates_a: store_a.len(),
            templates_b: store_b.len(),
            mean_distance: mapping.mean_distance(),
            max_distance: mapping.max_distance(),
        });
        let head = mapped_windows(
            &events_b[..head_len],
            &store_a,
            &store_b,
            &mapping,
            &s.window,
            &decision,
        )
        .map_err(|e| e.in_stage("window"))?;
        if head.is_empty() {
            return Err(Error::TooFewEvents {
                needed: s.window.delta + 1,
                got: head_len,
            }
            .in_stage("window"));
        }

        let zero_shot = TransferRun {
            head_loss: model.mean_loss(&head)?,
            threshold: decision.threshold,
            metrics: score_tail(
                &model,
                &stream,
                &decision,
                &store_a,
                labels_b,
                first_tail_line,
            )
            .map_err(|e| e.in_stage("detect"))?,
        };

        let (fine_tuned, fine_tune_curve) = if cfg.zero_shot_only {
            (None, Vec::new())
        } else {
            let tune = TrainConfig {
                epochs: cfg.few_shot_epochs,
                ..s.train.clone()
            };
            let (tuned, outcome) =
                few_shot_finetune(&model, &head, &tune).map_err(|e| e.in_stage("fine-tune"))?;
            let mut tuned_decision = decision.clone();
            if tuned_decision.mode == Objective::Regression {
                tuned_decision.threshold =
                    calibrate_regression_threshold(&tuned, &windows_a, tuned_decision.q)
                        .map_err(|e| e.in_stage("calibrate"))?;
            }
            let metrics = score_tail(
                &tuned,
                &stream,
                &tuned_decision,
                &store_a,
                labels_b,
                first_tail_line,
            )
            .map_err(|e| e.in_stage("detect"))?;
            (
                Some(TransferRun {
                    head_loss: outcome.loss_after,
                    threshold: tuned_decision.threshold,
                    metrics,
                }),
                outcome.curve,
            )
        };
        let loss_reduction = fine_tuned
            .as_ref()
            .filter(|_| zero_shot.head_loss > 0.0)
            .map(|f| 1.0 - f.head_loss / zero_shot.head_loss);
        results.push(ObjectiveTransfer {
            objective: s.objective(),
            pretrain_curve: loss_curve,
            zero_shot,
            fine_tuned,
            fine_tune_curve,
            loss_reduction,
        });
    }
    Ok(TransferReport {
        config: cfg.clone(),
        mapping: summary.expect("at least one objective"),
        head_lines: head_len,
        tail_lines: lines_b.len() - head_len,
        results,
    })
}
