use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

use super::Embedding;

/// Deterministic stand-in for a pre-trained sentence encoder.
///
/// Every token owns a pseudo-random unit vector derived from a hash of the
/// token and the seed. A template is the normalized, position-weighted sum of
/// its token vectors, with weight `1 / (1 + pos / len)`, so that templates
/// sharing tokens land close together and token order still matters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FallbackEmbedder {
    dim: usize,
    seed: u64,
}

impl FallbackEmbedder {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim < 4 {
            return Err(Error::config(
                "fallback embedding dimension must be at least 4",
            ));
        }
        Ok(FallbackEmbedder { dim, seed })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn model_name(&self) -> String {
        format!("fallback-hash-seed{}", self.seed)
    }

    pub fn token_vector(&self, token: &str) -> Vec<f64> {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(token.as_bytes());
        let mut rng = ChaCha8Rng::from_seed(hasher.finalize().into());
        loop {
            let mut v: Vec<f64> = (0..self.dim)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            let n = super::norm(&v);
            if n > 0.0 {
                v.iter_mut().for_each(|x| *x /= n);
                return v;
            }
        }
    }

    pub fn embed_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> Embedding {
        let len = tokens.len().max(1) as f64;
        let mut acc = vec![0.0; self.dim];
        for (pos, token) in tokens.iter().enumerate() {
            let weight = 1.0 / (1.0 + pos as f64 / len);
            for (a, t) in acc.iter_mut().zip(self.token_vector(token.as_ref())) {
                *a += weight * t;
            }
        }
        let n = super::norm(&acc);
        if n > 0.0 {
            acc.iter_mut().for_each(|x| *x /= n);
        } else {
            // degenerate cancellation or no tokens at all
            acc = self.token_vector("");
        }
        Embedding(acc)
    }

    pub fn embed_str(&self, template: &str) -> Embedding {
        let tokens: Vec<&str> = template.split_whitespace().collect();
        self.embed_tokens(&tokens)
    }
}
