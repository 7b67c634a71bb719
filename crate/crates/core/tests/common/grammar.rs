//! Twenty-rule log grammar with typed variable slots.

use logvec_core::parser::{RawLogLine, WILDCARD};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Templates with typed slots: `{u}` user, `{ip}` address, `{n}` integer,
/// `{x}` hex id, `{w}` word, `{d}` device.
pub const GRAMMAR: [&str; 20] = [
    "user {u} logged in from {ip}",
    "user {u} logged out after {n} seconds",
    "session {x} opened for user {u}",
    "session {x} closed",
    "disk {d} usage at {n} percent on host {w}",
    "connection from {ip} port {n} accepted",
    "connection from {ip} port {n} refused by firewall rule {n}",
    "job {n} started by scheduler",
    "job {n} finished with status {w}",
    "cache miss for key {x}",
    "cache hit ratio {n} percent",
    "request {x} served in {n} ms",
    "worker {n} heartbeat ok",
    "worker {n} restarted after crash in module {w}",
    "config reload requested by {u}",
    "backup of volume {w} completed size {n} bytes",
    "backup of volume {w} failed",
    "network interface {d} link up",
    "network interface {d} link down speed {n}",
    "shutting down service {w} gracefully",
];

const USERS: [&str; 6] = ["alice", "bob", "carol", "dave", "erin", "mallory"];
const WORDS: [&str; 8] = [
    "alpha", "bravo", "delta", "echo", "kilo", "lima", "oscar", "tango",
];
const DEVICES: [&str; 5] = ["eth0", "wlan1", "bond2", "sda3", "nvme0n1"];

pub fn fill(template: &str, rng: &mut ChaCha8Rng) -> String {
    template
        .split(' ')
        .map(|tok| match tok {
            "{u}" => USERS.choose(rng).unwrap().to_string(),
            "{w}" => WORDS.choose(rng).unwrap().to_string(),
            "{d}" => DEVICES.choose(rng).unwrap().to_string(),
            "{n}" => rng.random_range(0..100_000u32).to_string(),
            "{x}" => format!("{:012x}", rng.random_range(1u64 << 40..1u64 << 47)),
            "{ip}" => format!(
                "10.{}.{}.{}",
                rng.random_range(0..256),
                rng.random_range(0..256),
                rng.random_range(1..255)
            ),
            lit => lit.to_string(),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn expected(template: &str) -> String {
    template
        .split(' ')
        .map(|t| if t.starts_with('{') { WILDCARD } else { t })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Shuffled `per_template` instances of every grammar rule with their truth.
pub fn corpus(per_template: usize, seed: u64) -> Vec<(usize, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<(usize, String)> = (0..GRAMMAR.len())
        .flat_map(|t| std::iter::repeat_n(t, per_template))
        .map(|t| (t, String::new()))
        .collect();
    rand::seq::SliceRandom::shuffle(out.as_mut_slice(), &mut rng);
    for (t, line) in &mut out {
        *line = fill(GRAMMAR[*t], &mut rng);
    }
    out
}

pub fn raw_lines(lines: &[(usize, String)]) -> Vec<RawLogLine> {
    lines
        .iter()
        .enumerate()
        .map(|(i, (_, l))| RawLogLine::new(i as u64 + 1, l.as_str()).unwrap())
        .collect()
}
