//! Synthetic log corpus with a known template grammar and injected anomalies.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detector::Label;
use crate::error::{Error, Result};

/// Message grammar. Literal first tokens are unique per template; `{..}`
/// slots are filled with random variables.
pub const TEMPLATES: [&str; 10] = [
    "session {int} opened for user {user} from {ip}",
    "volume {hex} attached to instance {int} on host {host}",
    "scheduler selected host {host} for request {int} after {int} ms",
    "image cache refreshed with {int} entries in region {region}",
    "network port {int} bound to bridge {bridge} successfully",
    "quota check passed for tenant {user} usage {int} percent",
    "heartbeat from compute node {host} received at {int}",
    "snapshot {hex} stored in bucket {region} size {int} bytes",
    "metadata request served to {ip} in {int} ms",
    "teardown of session {int} requested by user {user}",
];

/// Template indices visited by the normal workflow, repeated forever.
/// Templates 1 and 2 occur twice, so the successor depends on context.
pub const WORKFLOW: [usize; 12] = [0, 1, 2, 3, 1, 4, 5, 6, 2, 7, 8, 9];

/// A message that never occurs in normal operation and shares no words
/// with the grammar.
pub const FOREIGN_MESSAGE: &str = "kernel panic fatal trap unrecoverable stack corruption detected";

const USERS: [&str; 5] = ["alice", "bob", "carol", "dave", "erin"];
const HOSTS: [&str; 5] = ["cobalt", "argon", "helium", "xenon", "radon"];
const REGIONS: [&str; 4] = ["east", "west", "north", "south"];
const BRIDGES: [&str; 3] = ["brint", "brex", "brmgmt"];
const NOISE_WORDS: [&str; 6] = [
    "retrying",
    "degraded",
    "slowly",
    "partially",
    "deferred",
    "throttled",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub train_events: usize,
    pub test_events: usize,
    /// Percent of messages whose second literal word is replaced by a
    /// noise word.
    pub noise_pct: f64,
    /// Percent of test events that are anomalous.
    pub anomaly_pct: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            train_events: 3000,
            test_events: 3000,
            noise_pct: 5.0,
            anomaly_pct: 2.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub train: Vec<String>,
    pub test: Vec<String>,
    /// Ground truth for every test line, keyed by 1-based line number.
    pub labels: BTreeMap<u64, Label>,
    /// Grammar index of each test line; `None` for the foreign message.
    pub test_templates: Vec<Option<usize>>,
}

fn fill<R: Rng>(template: &str, rng: &mut R) -> String {
    template
        .split(' ')
        .map(|tok| match tok {
            "{int}" => rng.random_range(0..100_000u32).to_string(),
            "{ip}" => format!(
                "10.{}.{}.{}",
                rng.random_range(0..256u32),
                rng.random_range(0..256u32),
                rng.random_range(1..255u32)
            ),
            "{hex}" => format!("{:012x}", rng.random_range(0..1u64 << 48)),
            "{user}" => USERS.choose(rng).expect("non-empty").to_string(),
            "{host}" => HOSTS.choose(rng).expect("non-empty").to_string(),
            "{region}" => REGIONS.choose(rng).expect("non-empty").to_string(),
            "{bridge}" => BRIDGES.choose(rng).expect("non-empty").to_string(),
            lit => lit.to_owned(),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Replaces the first literal word after the leading one with a noise word.
fn add_noise<R: Rng>(template: &str, line: &str, rng: &mut R) -> String {
    let mut tokens: Vec<&str> = line.split(' ').collect();
    let i = template
        .split(' ')
        .enumerate()
        .skip(1)
        .find(|(_, t)| !t.starts_with('{'))
        .map(|(i, _)| i)
        .expect("every template has a second literal");
    tokens[i] = NOISE_WORDS.choose(rng).expect("non-empty");
    tokens.join(" ")
}

fn message<R: Rng>(template: usize, noise_pct: f64, rng: &mut R) -> String {
    let line = fill(TEMPLATES[template], rng);
    if rng.random_bool(noise_pct / 100.0) {
        add_noise(TEMPLATES[template], &line, rng)
    } else {
        line
    }
}

/// Generates a normal training stream followed by a test stream in which
/// `anomaly_pct` percent of events are anomalous: half are the foreign
/// message, the rest come from swapping two events three to six positions
/// apart.
pub fn generate(cfg: &SynthConfig) -> Result<SyntheticCorpus> {
    if !(0.0..=100.0).contains(&cfg.noise_pct) || !(0.0..=50.0).contains(&cfg.anomaly_pct) {
        return Err(Error::config(
            "noise_pct must lie in [0, 100] and anomaly_pct in [0, 50]",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let total = cfg.train_events + cfg.test_events;
    let workflow: Vec<usize> = (0..total).map(|i| WORKFLOW[i % WORKFLOW.len()]).collect();
    let train = workflow[..cfg.train_events]
        .iter()
        .map(|&t| message(t, cfg.noise_pct, &mut rng))
        .collect();

    let mut test_templates: Vec<Option<usize>> = workflow[cfg.train_events..]
        .iter()
        .map(|&t| Some(t))
        .collect();
    let mut anomalous = vec![false; cfg.test_events];
    let budget = (cfg.anomaly_pct * cfg.test_events as f64 / 100.0).round() as usize;
    let foreign = budget.div_ceil(2);
    let swaps = (budget - foreign) / 2;

    // anomalies sit in separate slots so their effects do not overlap
    const SLOT: usize = 16;
    let slots = cfg.test_events / SLOT;
    if slots < foreign + swaps {
        return Err(Error::config(
            "test stream too short for the requested anomaly rate",
        ));
    }
    let mut chosen = rand::seq::index::sample(&mut rng, slots - 1, foreign + swaps).into_vec();
    chosen.sort_unstable();
    let kinds = rand::seq::index::sample(&mut rng, chosen.len(), foreign).into_vec();
    for (n, slot) in chosen.iter().enumerate() {
        let at = (slot + 1) * SLOT + rng.random_range(0..SLOT - 7);
        if kinds.contains(&n) {
            test_templates[at] = None;
            anomalous[at] = true;
        } else {
            let mut other = at + rng.random_range(3..=5);
            if test_templates[other] == test_templates[at] {
                other += 1;
            }
            test_templates.swap(at, other);
            anomalous[at] = true;
            anomalous[other] = true;
        }
    }

    let test = test_templates
        .iter()
        .map(|t| match t {
            Some(t) => message(*t, cfg.noise_pct, &mut rng),
            None => FOREIGN_MESSAGE.to_owned(),
        })
        .collect();
    let labels = anomalous
        .iter()
        .enumerate()
        .map(|(i, &a)| (i as u64 + 1, if a { Label::Anomaly } else { Label::Normal }))
        .collect();
    Ok(SyntheticCorpus {
        train,
        test,
        labels,
        test_templates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_sized() {
        let cfg = SynthConfig {
            train_events: 500,
            test_events: 800,
            ..SynthConfig::default()
        };
        let a = generate(&cfg).unwrap();
        assert_eq!(a, generate(&cfg).unwrap());
        assert_eq!(a.train.len(), 500);
        assert_eq!(a.test.len(), 800);
        let anomalies = a.labels.values().filter(|l| **l == Label::Anomaly).count();
        assert_eq!(anomalies, 16);
        assert!(a.test_templates.contains(&None));
    }

    #[test]
    fn first_words_identify_templates() {
        let firsts: std::collections::BTreeSet<&str> = TEMPLATES
            .iter()
            .map(|t| t.split(' ').next().unwrap())
            .collect();
        assert_eq!(firsts.len(), TEMPLATES.len());
    }

    #[test]
    fn noise_keeps_length_and_first_word() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for t in TEMPLATES {
            let line = fill(t, &mut rng);
            let noisy = add_noise(t, &line, &mut rng);
            assert_eq!(line.split(' ').count(), noisy.split(' ').count());
            assert_eq!(line.split(' ').next(), noisy.split(' ').next());
            assert_ne!(line, noisy);
        }
    }
}
