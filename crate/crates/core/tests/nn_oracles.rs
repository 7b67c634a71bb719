//! Independent references for the Bi-LSTM: a scalar-loop forward pass and
//! central finite differences for the gradients.

mod common;

use common::{
    config, max_relative_gradient_error, random_window, reference_bilstm, reference_cell,
};
use logvec_core::nn::{bilstm_forward, lstm_cell_step, BiLstmParams, Objective};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn cell_step_matches_scalar_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for seed in 0..20 {
        let p = BiLstmParams::init(&config(Objective::Classification), seed).unwrap();
        let x: Vec<f64> = (0..8).map(|_| rng.random_range(-2.0..2.0)).collect();
        let h: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (h1, c1) = lstm_cell_step(&p.fwd, &x, &h, &c).unwrap();
        let (h2, c2) = reference_cell(&p.fwd, &x, &h, &c);
        for (a, b) in h1.iter().chain(&c1).zip(h2.iter().chain(&c2)) {
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn bilstm_forward_matches_scalar_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst: f64 = 0.0;
    for draw in 0..50 {
        let p = BiLstmParams::init(&config(Objective::Classification), 1000 + draw).unwrap();
        let w = random_window(&mut rng, 3, 8);
        let z = bilstm_forward(&p, &w).unwrap();
        let r = reference_bilstm(&p, &w);
        assert_eq!(z.len(), 12);
        for (a, b) in z.iter().zip(&r) {
            worst = worst.max((a - b).abs());
        }
    }
    assert!(worst <= 1e-10, "max deviation {worst:e}");
}

#[test]
fn palindromic_window_with_tied_directions() {
    let mut p = BiLstmParams::init(&config(Objective::Regression), 3).unwrap();
    p.bwd = p.fwd.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
    let b: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
    let z = bilstm_forward(&p, &[a.clone(), b, a]).unwrap();
    assert_eq!(z[..6], z[6..]);
}

#[test]
fn gradients_match_finite_differences() {
    for objective in [Objective::Classification, Objective::Regression] {
        for seed in 0..3 {
            let err = max_relative_gradient_error(objective, seed, 1e-4);
            println!("{objective} seed {seed}: max relative error {err:e}");
            assert!(err <= 1e-4, "{objective} seed {seed}: {err:e}");
        }
    }
}
