use std::fmt;

use serde::{Deserialize, Serialize};

use crate::embedding::{nearest_template, EmbeddingStore, MatchResult, TemplateMatch};
use crate::error::{Error, Result};
use crate::nn::{mse, Objective};
use crate::parser::TemplateId;

use super::train::DetectorModel;
use super::window::EventWindow;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionParams {
    pub mode: Objective,
    pub top_k: usize,
    pub max_distance: f64,
    pub q: f64,
    /// Calibrated regression threshold; unused for classification.
    pub threshold: f64,
    /// Replace flagged events in later windows with what the model expected.
    pub repair_context: bool,
    /// Feed novel events that matched a known template to the model as that
    /// template.
    #[serde(default = "yes")]
    pub snap_context: bool,
}

fn yes() -> bool {
    true
}

impl DecisionParams {
    pub fn new(mode: Objective) -> Self {
        DecisionParams {
            mode,
            top_k: 3,
            max_distance: 0.3,
            q: 99.0,
            threshold: 0.0,
            repair_context: true,
            snap_context: true,
        }
    }

    pub fn validate(&self, num_classes: usize) -> Result<()> {
        if self.mode == Objective::Classification && !(1..=num_classes).contains(&self.top_k) {
            return Err(Error::config(format!(
                "top_k must lie in 1..={num_classes}"
            )));
        }
        if !(self.q > 0.0 && self.q <= 100.0) {
            return Err(Error::config("q must lie in (0, 100]"));
        }
        if self.threshold.is_nan()
            || self.threshold < 0.0
            || self.max_distance.is_nan()
            || self.max_distance < 0.0
        {
            return Err(Error::config(
                "threshold and max_distance must be non-negative",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Normal,
    Anomaly,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Normal => "normal",
            Label::Anomaly => "anomaly",
        })
    }
}

impl std::str::FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(Label::Normal),
            "anomaly" => Ok(Label::Anomaly),
            other => Err(Error::format(format!("unknown label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reason {
    TopKMiss,
    OverThreshold,
    NoTemplateMatch,
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reason::TopKMiss => "top-k-miss",
            Reason::OverThreshold => "over-threshold",
            Reason::NoTemplateMatch => "no-template-match",
        })
    }
}

impl std::str::FromStr for Reason {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "top-k-miss" => Ok(Reason::TopKMiss),
            "over-threshold" => Ok(Reason::OverThreshold),
            "no-template-match" => Ok(Reason::NoTemplateMatch),
            other => Err(Error::format(format!("unknown reason {other:?}"))),
        }
    }
}

/// Decision for one target event. `score` is the 1-based rank of the target
/// (classification), its squared error (regression) or the distance to the
/// closest known template (no-template-match).
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub line_no: u64,
    pub label: Label,
    pub score: f64,
    /// `None` for normal verdicts.
    pub reason: Option<Reason>,
}

/// An event as the detector sees it.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamEvent {
    pub line_no: u64,
    /// Id in the namespace of the reference store, when the event's template
    /// is known to be one of its templates.
    pub template_id: Option<TemplateId>,
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Resolution {
    Known(TemplateId),
    Matched(MatchResult),
    DirectAnomaly(MatchResult),
}

impl Resolution {
    pub fn template_id(&self) -> Option<TemplateId> {
        match *self {
            Resolution::Known(id) => Some(id),
            Resolution::Matched(m) => Some(m.template_id),
            Resolution::DirectAnomaly(_) => None,
        }
    }
}

/// Known templates stand for themselves; anything else is matched to the
/// nearest known template, or labelled anomalous outright when that one is
/// farther than `max_distance`.
pub fn resolve_target(
    template_id: Option<TemplateId>,
    embedding: &[f64],
    store: &EmbeddingStore,
    max_distance: f64,
) -> Result<Resolution> {
    if let Some(id) = template_id.filter(|id| store.contains(*id)) {
        return Ok(Resolution::Known(id));
    }
    Ok(match nearest_template(embedding, store, max_distance)? {
        TemplateMatch::Matched(m) => Resolution::Matched(m),
        TemplateMatch::NoMatch(m) => Resolution::DirectAnomaly(m),
    })
}

/// 1-based rank of `target` among `probs`; equal probabilities are ordered
/// by ascending class index (and so by ascending template id).
pub fn rank_of(probs: &[f64], target: usize) -> usize {
    let p = probs[target];
    1 + probs
        .iter()
        .enumerate()
        .filter(|&(j, &q)| q > p || (q == p && j < target))
        .count()
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub fn classify_probs(probs: &[f64], target_class: usize, k: usize, line_no: u64) -> Verdict {
    let rank = rank_of(probs, target_class);
    let normal = rank <= k;
    Verdict {
        line_no,
        label: if normal {
            Label::Normal
        } else {
            Label::Anomaly
        },
        score: rank as f64,
        reason: (!normal).then_some(Reason::TopKMiss),
    }
}

/// Normal iff the resolved target is among the `k` most probable templates.
pub fn detect_classification(
    model: &DetectorModel,
    inputs: &[Vec<f64>],
    resolved_target: TemplateId,
    k: usize,
    line_no: u64,
) -> Result<Verdict> {
    let probs = model.predict(inputs)?;
    let class = model
        .classes
        .index_of(resolved_target)
        .ok_or(Error::UnknownTemplate(resolved_target))?;
    Ok(classify_probs(&probs, class, k, line_no))
}

pub fn regress_verdict(
    prediction: &[f64],
    target: &[f64],
    threshold: f64,
    line_no: u64,
) -> Verdict {
    let err = mse(prediction, target);
    let anomaly = err > threshold;
    Verdict {
        line_no,
        label: if anomaly {
            Label::Anomaly
        } else {
            Label::Normal
        },
        score: err,
        reason: anomaly.then_some(Reason::OverThreshold),
    }
}

/// Anomalous iff the squared error to `target` is strictly above `threshold`.
pub fn detect_regression(
    model: &DetectorModel,
    inputs: &[Vec<f64>],
    target: &[f64],
    threshold: f64,
    line_no: u64,
) -> Result<Verdict> {
    let pred = model.predict(inputs)?;
    Ok(regress_verdict(&pred, target, threshold, line_no))
}

/// Nearest-rank percentile: the value at 1-based position `ceil(q*N/100)`
/// of the ascending sort.
pub fn nearest_rank(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if !(q > 0.0 && q <= 100.0) {
        return Err(Error::config("q must lie in (0, 100]"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    // the epsilon keeps exact products such as 98*100/100 from rounding up
    let rank = ((q * n as f64 / 100.0) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    Ok(sorted[rank - 1])
}

/// Per-window squared error of a regression model.
pub fn window_errors(model: &DetectorModel, windows: &[EventWindow]) -> Result<Vec<f64>> {
    windows
        .iter()
        .map(|w| Ok(mse(&model.predict(&w.inputs)?, &w.target_embedding)))
        .collect()
}

pub fn calibrate_regression_threshold(
    model: &DetectorModel,
    windows: &[EventWindow],
    q: f64,
) -> Result<f64> {
    if windows.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    nearest_rank(&window_errors(model, windows)?, q)
}

/// Emits one verdict per event after the first `delta`, in stream order.
pub fn detect_stream(
    model: &DetectorModel,
    events: &[StreamEvent],
    params: &DecisionParams,
    store: &EmbeddingStore,
) -> Result<Vec<Verdict>> {
    if params.mode != model.config.objective {
        return Err(Error::config(
            "decision mode differs from the model objective",
        ));
    }
    params.validate(model.classes.len())?;
    let delta = model.config.window;
    if events.len() <= delta {
        return Ok(Vec::new());
    }
    let mut context: Vec<Vec<f64>> = events.iter().map(|e| e.embedding.clone()).collect();
    let mut verdicts = Vec::with_capacity(events.len() - delta);

    for t in delta..events.len() {
        let event = &events[t];
        let resolution = resolve_target(
            event.template_id,
            &event.embedding,
            store,
            params.max_distance,
        )?;
        let pred = model.predict(&context[t - delta..t])?;
        let verdict = match (resolution, params.mode) {
            (Resolution::DirectAnomaly(m), _) => Verdict {
                line_no: event.line_no,
                label: Label::Anomaly,
                score: m.distance,
                reason: Some(Reason::NoTemplateMatch),
            },
            (r, Objective::Classification) => {
                let id = r.template_id().expect("resolved");
                let class = model
                    .classes
                    .index_of(id)
                    .ok_or(Error::UnknownTemplate(id))?;
                classify_probs(&pred, class, params.top_k, event.line_no)
            }
            (r, Objective::Regression) => {
                let id = r.template_id().expect("resolved");
                let target = store.vector(id).ok_or(Error::UnknownTemplate(id))?;
                regress_verdict(&pred, target, params.threshold, event.line_no)
            }
        };
        if let (true, Resolution::Matched(m)) = (params.snap_context, resolution) {
            if let Some(v) = store.vector(m.template_id) {
                context[t] = v.to_vec();
            }
        }
        if params.repair_context && verdict.label == Label::Anomaly {
            let expected = match params.mode {
                Objective::Classification => Some(model.classes.id_of(argmax(&pred))),
                Objective::Regression => store.nearest(&pred).ok().map(|m| m.template_id),
            };
            if let Some(v) = expected.and_then(|id| store.vector(id)) {
                context[t] = v.to_vec();
            }
        }
        verdicts.push(verdict);
    }
    Ok(verdicts)
}
