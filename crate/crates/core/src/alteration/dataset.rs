use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{alter_message, intensity_from_percent, AlterationKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Similar,
    Different,
}

impl Severity {
    /// Intensity range in percent of the message length.
    pub fn default_range(self) -> (f64, f64) {
        match self {
            Severity::Similar => (5.0, 20.0),
            Severity::Different => (5.0, 100.0),
        }
    }
}

impl std::str::FromStr for Severity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "similar" => Ok(Severity::Similar),
            "different" => Ok(Severity::Different),
            _ => Err(Error::config(format!("unknown severity {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlteredCorpusSpec {
    /// Percent of lines altered.
    pub fraction: f64,
    pub severity: Severity,
    pub intensity_range: (f64, f64),
    pub seed: u64,
}

impl AlteredCorpusSpec {
    pub fn new(fraction: f64, severity: Severity, seed: u64) -> Self {
        AlteredCorpusSpec {
            fraction,
            severity,
            intensity_range: severity.default_range(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=100.0).contains(&self.fraction) {
            return Err(Error::config(format!(
                "fraction {} outside [0, 100]",
                self.fraction
            )));
        }
        let (lo, hi) = self.intensity_range;
        if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::config(format!("bad intensity range {lo}..{hi}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceRecord {
    pub index: usize,
    pub kind: AlterationKind,
    pub params: serde_json::Value,
    pub original: String,
}

/// Sorted set of whitespace tokens in the corpus.
pub fn corpus_vocabulary<S: AsRef<str>>(lines: &[S]) -> Vec<String> {
    lines
        .iter()
        .flat_map(|l| l.as_ref().split_whitespace())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(String::from)
        .collect()
}

fn line_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

/// Derives a corpus B from A by altering a uniform sample of `fraction`
/// percent of its lines with a random semantic alteration each.
pub fn synthesize_dataset_b<S: AsRef<str>>(
    corpus_a: &[S],
    spec: &AlteredCorpusSpec,
) -> Result<(Vec<String>, Vec<ProvenanceRecord>)> {
    spec.validate()?;
    let mut out: Vec<String> = corpus_a.iter().map(|l| l.as_ref().to_owned()).collect();
    let n = out.len();
    let count = ((spec.fraction * n as f64 / 100.0).round() as usize).min(n);
    if count == 0 {
        return Ok((out, Vec::new()));
    }
    let vocab = corpus_vocabulary(corpus_a);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut picked = sample(&mut rng, n, count).into_vec();
    picked.sort_unstable();

    let (lo, hi) = spec.intensity_range;
    let mut records = Vec::with_capacity(count);
    for index in picked {
        let mut rng = line_rng(spec.seed, index);
        let kind = AlterationKind::SEMANTIC[rng.random_range(0..3)];
        let pct = if hi > lo {
            rng.random_range(lo..=hi)
        } else {
            lo
        };
        let tokens: Vec<String> = out[index].split_whitespace().map(String::from).collect();
        if tokens.is_empty() {
            continue;
        }
        let mut l = intensity_from_percent(pct, tokens.len());
        if kind == AlterationKind::SemDelete {
            l = l.min(tokens.len() - 1);
        }
        let altered = alter_message(&tokens, kind, l, &vocab, &mut rng)?;
        let original = std::mem::replace(&mut out[index], altered.join(" "));
        records.push(ProvenanceRecord {
            index,
            kind,
            params: serde_json::json!({ "intensity": l, "percent": pct }),
            original,
        });
    }
    Ok((out, records))
}

pub fn write_provenance(path: &Path, records: &[ProvenanceRecord]) -> Result<()> {
    let mut s = String::new();
    for r in records {
        let _ = writeln!(s, "{}\t{}\t{}\t{}", r.index, r.kind, r.params, r.original);
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn read_provenance(path: &Path) -> Result<Vec<ProvenanceRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.is_empty())
        .map(|line| {
            let mut parts = line.splitn(4, '\t');
            let mut next = || {
                parts
                    .next()
                    .ok_or_else(|| Error::format(format!("short provenance record: {line}")))
            };
            let index = next()?
                .parse()
                .map_err(|_| Error::format(format!("bad index in {line}")))?;
            let kind = next()?.parse()?;
            let params = serde_json::from_str(next()?).map_err(|e| Error::format(e.to_string()))?;
            let original = next()?.to_owned();
            Ok(ProvenanceRecord {
                index,
                kind,
                params,
                original,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(n: usize) -> Vec<String> {
        (0..n)
            .map(|i| format!("node {} sent {} bytes to peer {}", i % 7, i, i % 3))
            .collect()
    }

    #[test]
    fn zero_fraction_is_identity() {
        let a = corpus(100);
        let (b, prov) =
            synthesize_dataset_b(&a, &AlteredCorpusSpec::new(0.0, Severity::Different, 1)).unwrap();
        assert_eq!(a, b);
        assert!(prov.is_empty());
    }

    #[test]
    fn zero_intensity_is_identity() {
        let a = corpus(100);
        let spec = AlteredCorpusSpec {
            intensity_range: (0.0, 0.0),
            ..AlteredCorpusSpec::new(100.0, Severity::Different, 1)
        };
        let (b, prov) = synthesize_dataset_b(&a, &spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(prov.len(), 100);
    }

    #[test]
    fn fifteen_percent_of_a_thousand() {
        let a = corpus(1000);
        let spec = AlteredCorpusSpec::new(15.0, Severity::Similar, 7);
        let (b1, p1) = synthesize_dataset_b(&a, &spec).unwrap();
        let (b2, p2) = synthesize_dataset_b(&a, &spec).unwrap();
        assert_eq!(p1.len(), 150);
        assert_eq!(b1, b2);
        assert_eq!(p1, p2);
        for r in &p1 {
            assert_eq!(a[r.index], r.original);
        }
        let untouched = (0..1000).filter(|i| !p1.iter().any(|r| r.index == *i));
        for i in untouched {
            assert_eq!(a[i], b1[i]);
        }
    }

    #[test]
    fn provenance_roundtrip() {
        let a = corpus(50);
        let (_, prov) =
            synthesize_dataset_b(&a, &AlteredCorpusSpec::new(20.0, Severity::Different, 3))
                .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("prov.tsv");
        write_provenance(&path, &prov).unwrap();
        assert_eq!(read_provenance(&path).unwrap(), prov);
    }
}
