//! Oracles shared by the integration suites. Each one is written
//! independently of the library code it checks.

#![allow(dead_code)]

pub mod grammar;

use std::collections::BTreeMap;

use logvec_core::detector::Label;
use logvec_core::eval::LabeledVerdict;
use logvec_core::nn::{
    backward, loss, predict, BiLstmParams, LstmCell, ModelConfig, Objective, Target,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Straight-line evaluation of the gate equations, element by element.
pub fn reference_cell(cell: &LstmCell, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let hs = h.len();
    let d = x.len();
    let wx = cell.w_x.data();
    let wh = cell.w_h.data();
    let b = cell.b.data();
    let pre = |row: usize| -> f64 {
        let mut s = b[row];
        for j in 0..d {
            s += wx[row * d + j] * x[j];
        }
        for j in 0..hs {
            s += wh[row * hs + j] * h[j];
        }
        s
    };
    let mut h_new = vec![0.0; hs];
    let mut c_new = vec![0.0; hs];
    for k in 0..hs {
        let i = sig(pre(k));
        let f = sig(pre(hs + k));
        let g = pre(2 * hs + k).tanh();
        let o = sig(pre(3 * hs + k));
        c_new[k] = f * c[k] + i * g;
        h_new[k] = o * c_new[k].tanh();
    }
    (h_new, c_new)
}

pub fn reference_bilstm(p: &BiLstmParams, window: &[Vec<f64>]) -> Vec<f64> {
    let hs = p.fwd.hidden();
    let run = |cell: &LstmCell, order: Vec<&Vec<f64>>| {
        let (mut h, mut c) = (vec![0.0; hs], vec![0.0; hs]);
        for x in order {
            let (h2, c2) = reference_cell(cell, x, &h, &c);
            h = h2;
            c = c2;
        }
        h
    };
    let mut z = run(&p.fwd, window.iter().collect());
    z.extend(run(&p.bwd, window.iter().rev().collect()));
    z
}

pub fn random_window(rng: &mut ChaCha8Rng, delta: usize, d: usize) -> Vec<Vec<f64>> {
    (0..delta)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

pub fn config(objective: Objective) -> ModelConfig {
    ModelConfig {
        embed_dim: 8,
        hidden_size: 6,
        window: 3,
        num_classes: 5,
        objective,
    }
}

/// Largest relative deviation between analytic and central-difference
/// gradients over every parameter.
pub fn max_relative_gradient_error(objective: Objective, seed: u64, eps: f64) -> f64 {
    let cfg = config(objective);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = BiLstmParams::init(&cfg, seed).unwrap();
    let window = random_window(&mut rng, cfg.window, cfg.embed_dim);
    let target_vec: Vec<f64> = (0..cfg.embed_dim)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let target = match objective {
        Objective::Classification => Target::Class(rng.random_range(0..cfg.num_classes)),
        Objective::Regression => Target::Vector(&target_vec),
    };
    let (_, grads) = backward(&params, &window, target, &cfg).unwrap();
    let eval = |p: &BiLstmParams| loss(&cfg, &predict(p, &window, &cfg).unwrap(), target).unwrap();

    let mut worst: f64 = 0.0;
    let mut probe = params.clone();
    for ti in 0..10 {
        for j in 0..params.tensors()[ti].len() {
            let orig = params.tensors()[ti].data()[j];
            probe.tensors_mut()[ti].data_mut()[j] = orig + eps;
            let up = eval(&probe);
            probe.tensors_mut()[ti].data_mut()[j] = orig - eps;
            let down = eval(&probe);
            probe.tensors_mut()[ti].data_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let analytic = grads.tensors()[ti].data()[j];
            let denom = analytic.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max((analytic - numeric).abs() / denom);
        }
    }
    worst
}

/// Nearest-rank percentile for integer `q`: the smallest order statistic
/// with at least `q` percent of the values at or below it.
pub fn nearest_rank_oracle(values: &[f64], q: u32) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as u64;
    let rank = (q as u64 * n).div_ceil(100).max(1);
    sorted[rank as usize - 1]
}

/// (tp, fp, fn, tn) by direct counting.
pub fn confusion(verdicts: &[LabeledVerdict]) -> (u64, u64, u64, u64) {
    let mut m: BTreeMap<(bool, bool), u64> = BTreeMap::new();
    for v in verdicts {
        *m.entry((v.predicted == Label::Anomaly, v.truth == Label::Anomaly))
            .or_default() += 1;
    }
    let get = |k| m.get(&k).copied().unwrap_or(0);
    (
        get((true, true)),
        get((true, false)),
        get((false, true)),
        get((false, false)),
    )
}

/// Unit vector `e_i` in `dim` dimensions.
pub fn one_hot(i: usize, dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[i] = 1.0;
    v
}

/// `len` events cycling through ids `0..period`, embedded as one-hot vectors.
pub fn cycle_events(period: u32, len: usize, dim: usize) -> Vec<(u32, Vec<f64>)> {
    (0..len)
        .map(|i| {
            let id = i as u32 % period;
            (id, one_hot(id as usize, dim))
        })
        .collect()
}
