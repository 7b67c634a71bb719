//! Controlled corruption of normal logs: token-level (semantic) and
//! event-level (structural) deletion, swap and imputation.

mod dataset;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dataset::{
    corpus_vocabulary, read_provenance, synthesize_dataset_b, write_provenance, AlteredCorpusSpec,
    ProvenanceRecord, Severity,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AlterationKind {
    SemDelete,
    SemSwap,
    SemImpute,
    SeqDelete,
    SeqSwap,
    SeqImpute,
}

impl AlterationKind {
    pub const SEMANTIC: [AlterationKind; 3] = [
        AlterationKind::SemDelete,
        AlterationKind::SemSwap,
        AlterationKind::SemImpute,
    ];
    pub const STRUCTURAL: [AlterationKind; 3] = [
        AlterationKind::SeqDelete,
        AlterationKind::SeqSwap,
        AlterationKind::SeqImpute,
    ];

    pub fn is_semantic(self) -> bool {
        Self::SEMANTIC.contains(&self)
    }
}

impl std::fmt::Display for AlterationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

impl std::str::FromStr for AlterationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::SEMANTIC
            .into_iter()
            .chain(Self::STRUCTURAL)
            .find(|k| k.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config(format!("unknown alteration kind {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlterationConfig {
    pub kind: AlterationKind,
    /// Number of tokens or events affected; for `SeqSwap`, the number of
    /// block relocations.
    pub intensity: usize,
    /// Events moved per relocation (`SeqSwap` only).
    pub block_len: usize,
    pub seed: u64,
}

impl AlterationConfig {
    pub fn new(kind: AlterationKind, intensity: usize, seed: u64) -> Self {
        AlterationConfig {
            kind,
            intensity,
            block_len: 1,
            seed,
        }
    }
}

fn draw_other<'a, R: Rng>(vocab: &'a [String], avoid: &str, rng: &mut R) -> Result<&'a str> {
    if !vocab.iter().any(|t| t != avoid) {
        return Err(Error::EmptyVocabulary);
    }
    loop {
        let t = &vocab[rng.random_range(0..vocab.len())];
        if t != avoid {
            return Ok(t);
        }
    }
}

/// Token-level alteration of one message.
///
/// * `SemDelete` drops `l` randomly chosen tokens.
/// * `SemSwap` replaces `l` distinct positions by different vocabulary tokens.
/// * `SemImpute` inserts `l` vocabulary tokens at one random position.
pub fn alter_message<R: Rng>(
    tokens: &[String],
    kind: AlterationKind,
    l: usize,
    vocab: &[String],
    rng: &mut R,
) -> Result<Vec<String>> {
    let n = tokens.len();
    if n == 0 {
        return Err(Error::IntensityTooLarge {
            intensity: l,
            len: 0,
        });
    }
    if l == 0 {
        return Ok(tokens.to_vec());
    }
    match kind {
        AlterationKind::SemDelete => {
            if l > n {
                return Err(Error::IntensityTooLarge {
                    intensity: l,
                    len: n,
                });
            }
            let mut drop = vec![false; n];
            for i in sample(rng, n, l) {
                drop[i] = true;
            }
            Ok(tokens
                .iter()
                .zip(drop)
                .filter(|(_, d)| !d)
                .map(|(t, _)| t.clone())
                .collect())
        }
        AlterationKind::SemSwap => {
            if l > n {
                return Err(Error::IntensityTooLarge {
                    intensity: l,
                    len: n,
                });
            }
            let mut out = tokens.to_vec();
            for i in sample(rng, n, l) {
                out[i] = draw_other(vocab, &tokens[i], rng)?.to_owned();
            }
            Ok(out)
        }
        AlterationKind::SemImpute => {
            if vocab.is_empty() {
                return Err(Error::EmptyVocabulary);
            }
            let at = rng.random_range(0..=n);
            let mut out = tokens[..at].to_vec();
            out.extend((0..l).map(|_| vocab[rng.random_range(0..vocab.len())].clone()));
            out.extend_from_slice(&tokens[at..]);
            Ok(out)
        }
        other => Err(Error::config(format!(
            "{other} is not a message alteration"
        ))),
    }
}

/// Event-level alteration of a template sequence.
///
/// * `SeqDelete` removes `l` random events, keeping the order of the rest.
/// * `SeqSwap` takes the `block_len` events right after a random index `i`
///   and reinserts them at a random index `j < i`; repeated `l` times.
/// * `SeqImpute` repeats the event at a random index `l` more times in place.
pub fn alter_sequence<T: Clone, R: Rng>(
    seq: &[T],
    cfg: &AlterationConfig,
    rng: &mut R,
) -> Result<Vec<T>> {
    let m = seq.len();
    let l = cfg.intensity;
    if m < 2 {
        return Err(Error::IntensityTooLarge {
            intensity: l,
            len: m,
        });
    }
    if l == 0 {
        return Ok(seq.to_vec());
    }
    match cfg.kind {
        AlterationKind::SeqDelete => {
            if l > m {
                return Err(Error::IntensityTooLarge {
                    intensity: l,
                    len: m,
                });
            }
            let mut drop = vec![false; m];
            for i in sample(rng, m, l) {
                drop[i] = true;
            }
            Ok(seq
                .iter()
                .zip(drop)
                .filter(|(_, d)| !d)
                .map(|(t, _)| t.clone())
                .collect())
        }
        AlterationKind::SeqSwap => {
            let k = cfg.block_len;
            // need 1 <= i and i + k <= m - 1
            if k == 0 || k + 2 > m {
                return Err(Error::BlockOutOfRange {
                    block_len: k,
                    len: m,
                });
            }
            let mut out = seq.to_vec();
            for _ in 0..l {
                let i = rng.random_range(1..=m - 1 - k);
                let j = rng.random_range(0..i);
                let block: Vec<T> = out.drain(i + 1..i + 1 + k).collect();
                out.splice(j..j, block);
            }
            Ok(out)
        }
        AlterationKind::SeqImpute => {
            let i = rng.random_range(0..m);
            let mut out = seq[..=i].to_vec();
            out.extend(std::iter::repeat_n(seq[i].clone(), l));
            out.extend_from_slice(&seq[i + 1..]);
            Ok(out)
        }
        other => Err(Error::config(format!(
            "{other} is not a sequence alteration"
        ))),
    }
}

/// `l = max(1, round(pct * n / 100))`, and 0 when `pct` is 0.
pub fn intensity_from_percent(pct: f64, n: usize) -> usize {
    if pct <= 0.0 {
        0
    } else {
        ((pct * n as f64 / 100.0).round() as usize).max(1)
    }
}
