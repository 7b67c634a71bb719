use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::detector::{Label, Verdict};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledVerdict {
    pub line_no: u64,
    pub predicted: Label,
    pub truth: Label,
}

/// Anomaly is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Metrics {
    pub fn from_counts(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Metrics {
            precision,
            recall,
            f1,
            tp,
            fp,
            fn_,
            tn,
        }
    }

    pub fn false_positive_rate(&self) -> f64 {
        ratio(self.fp, self.fp + self.tn)
    }

    /// Share of evaluated events labelled anomalous.
    pub fn flag_rate(&self) -> f64 {
        ratio(self.tp + self.fp, self.tp + self.fp + self.fn_ + self.tn)
    }
}

pub fn compute_metrics(verdicts: &[LabeledVerdict]) -> Result<Metrics> {
    if verdicts.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for v in verdicts {
        match (v.predicted, v.truth) {
            (Label::Anomaly, Label::Anomaly) => tp += 1,
            (Label::Anomaly, Label::Normal) => fp += 1,
            (Label::Normal, Label::Anomaly) => fn_ += 1,
            (Label::Normal, Label::Normal) => tn += 1,
        }
    }
    Ok(Metrics::from_counts(tp, fp, fn_, tn))
}

/// Pairs verdicts with ground truth. Lines without a label count as normal.
pub fn label_verdicts(verdicts: &[Verdict], truth: &BTreeMap<u64, Label>) -> Vec<LabeledVerdict> {
    verdicts
        .iter()
        .map(|v| LabeledVerdict {
            line_no: v.line_no,
            predicted: v.label,
            truth: truth.get(&v.line_no).copied().unwrap_or(Label::Normal),
        })
        .collect()
}
