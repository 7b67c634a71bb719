//! Inputs shared by the benchmarks.

use logvec_core::embedding::{EmbeddingStore, FallbackEmbedder};
use logvec_core::eval::synth::{generate, SynthConfig};
use logvec_core::parser::{HeaderRule, RawLogLine};
use logvec_core::pipeline::raw_lines;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` training lines of the synthetic corpus.
pub fn log_lines(n: usize) -> Vec<RawLogLine> {
    let corpus = generate(&SynthConfig {
        train_events: n,
        test_events: 0,
        ..SynthConfig::default()
    })
    .expect("synthetic corpus");
    raw_lines(&corpus.train, &HeaderRule::default())
}

/// A store of `n` random eight-token templates.
pub fn template_store(n: usize, dim: usize) -> EmbeddingStore {
    let embedder = FallbackEmbedder::new(dim, 0).expect("valid dim");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut store = EmbeddingStore::new(dim, embedder.model_name(), "");
    for id in 0..n as u32 {
        let tokens: Vec<String> = (0..8)
            .map(|_| format!("w{}", rng.random_range(0..5000)))
            .collect();
        store
            .insert(id, tokens.join(" "), embedder.embed_tokens(&tokens))
            .expect("fresh id");
    }
    store
}

pub fn random_window(delta: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..delta)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}
