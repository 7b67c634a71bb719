use crate::error::{Error, Result};

use super::params::{BiLstmParams, LstmCell, ModelConfig, Objective};

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Everything one cell step needs for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Activated gates `[i, f, g, o]`, `4h` values.
    pub gates: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

pub(crate) fn step(cell: &LstmCell, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> StepCache {
    let h = cell.hidden();
    let mut gates = cell.b.data().to_vec();
    cell.w_x.matvec_add(x, &mut gates);
    cell.w_h.matvec_add(h_prev, &mut gates);
    for (k, z) in gates.iter_mut().enumerate() {
        *z = if (2 * h..3 * h).contains(&k) {
            z.tanh()
        } else {
            sigmoid(*z)
        };
    }
    let (i, rest) = gates.split_at(h);
    let (f, rest) = rest.split_at(h);
    let (g, o) = rest.split_at(h);
    let c: Vec<f64> = (0..h).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h_new: Vec<f64> = (0..h).map(|k| o[k] * tanh_c[k]).collect();
    StepCache {
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        gates,
        tanh_c,
        h: h_new,
        c,
    }
}

/// One LSTM step: sigmoid input/forget/output gates, tanh candidate,
/// `c = f*c_prev + i*g`, `h = o*tanh(c)`.
pub fn lstm_cell_step(
    cell: &LstmCell,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let h = cell.hidden();
    if x.len() != cell.input() {
        return Err(Error::ShapeMismatch {
            what: "lstm input",
            expected: vec![cell.input()],
            found: vec![x.len()],
        });
    }
    if h_prev.len() != h || c_prev.len() != h {
        return Err(Error::ShapeMismatch {
            what: "lstm state",
            expected: vec![h, h],
            found: vec![h_prev.len(), c_prev.len()],
        });
    }
    if x.iter().chain(h_prev).chain(c_prev).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("lstm input"));
    }
    let s = step(cell, x, h_prev, c_prev);
    Ok((s.h, s.c))
}

pub(crate) fn run_direction<'a>(
    cell: &LstmCell,
    inputs: impl Iterator<Item = &'a [f64]>,
) -> Vec<StepCache> {
    let h = cell.hidden();
    let mut h_prev = vec![0.0; h];
    let mut c_prev = vec![0.0; h];
    let mut trace = Vec::new();
    for x in inputs {
        let s = step(cell, x, &h_prev, &c_prev);
        h_prev.clone_from(&s.h);
        c_prev.clone_from(&s.c);
        trace.push(s);
    }
    trace
}

pub(crate) fn check_window<W: AsRef<[f64]>>(params: &BiLstmParams, window: &[W]) -> Result<()> {
    if window.is_empty() {
        return Err(Error::ShapeMismatch {
            what: "window",
            expected: vec![1],
            found: vec![0],
        });
    }
    let d = params.fwd.input();
    for x in window {
        let x = x.as_ref();
        if x.len() != d {
            return Err(Error::ShapeMismatch {
                what: "window row",
                expected: vec![d],
                found: vec![x.len()],
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("window"));
        }
    }
    Ok(())
}

/// Final forward hidden state followed by the final backward hidden state
/// (the backward direction reads the window last-to-first).
pub fn bilstm_forward<W: AsRef<[f64]>>(params: &BiLstmParams, window: &[W]) -> Result<Vec<f64>> {
    check_window(params, window)?;
    let fwd = run_direction(&params.fwd, window.iter().map(|x| x.as_ref()));
    let bwd = run_direction(&params.bwd, window.iter().rev().map(|x| x.as_ref()));
    let mut z = fwd.last().expect("non-empty").h.clone();
    z.extend_from_slice(&bwd.last().expect("non-empty").h);
    Ok(z)
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub(crate) struct HeadCache {
    pub u: Vec<f64>,
    pub out: Vec<f64>,
}

pub(crate) fn head(params: &BiLstmParams, z: &[f64], objective: Objective) -> HeadCache {
    let mut a = params.lin1_b.data().to_vec();
    params.lin1_w.matvec_add(z, &mut a);
    let u: Vec<f64> = a.iter().map(|v| v.tanh()).collect();
    let mut y = params.lin2_b.data().to_vec();
    params.lin2_w.matvec_add(&u, &mut y);
    let out = match objective {
        Objective::Classification => softmax(&y),
        Objective::Regression => y,
    };
    HeadCache { u, out }
}

/// linear -> tanh -> linear, then softmax (classification) or identity.
pub fn head_forward(params: &BiLstmParams, z: &[f64], config: &ModelConfig) -> Vec<f64> {
    head(params, z, config.objective).out
}

/// Full model: window to class distribution or predicted embedding.
pub fn predict<W: AsRef<[f64]>>(
    params: &BiLstmParams,
    window: &[W],
    config: &ModelConfig,
) -> Result<Vec<f64>> {
    let z = bilstm_forward(params, window)?;
    Ok(head_forward(params, &z, config))
}

#[derive(Debug, Clone, Copy)]
pub enum Target<'a> {
    Class(usize),
    Vector(&'a [f64]),
}

/// Cross-entropy `-ln p[class]` or mean squared error.
pub fn loss(config: &ModelConfig, prediction: &[f64], target: Target<'_>) -> Result<f64> {
    match (config.objective, target) {
        (Objective::Classification, Target::Class(c)) => {
            let p = prediction.get(c).ok_or(Error::ShapeMismatch {
                what: "class index",
                expected: vec![prediction.len()],
                found: vec![c],
            })?;
            Ok(-p.max(f64::MIN_POSITIVE).ln())
        }
        (Objective::Regression, Target::Vector(t)) => {
            if t.len() != prediction.len() {
                return Err(Error::ShapeMismatch {
                    what: "regression target",
                    expected: vec![prediction.len()],
                    found: vec![t.len()],
                });
            }
            Ok(mse(prediction, t))
        }
        _ => Err(Error::config("target kind does not match the objective")),
    }
}

pub fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::Objective;

    fn cfg(objective: Objective) -> ModelConfig {
        ModelConfig {
            embed_dim: 3,
            hidden_size: 4,
            window: 2,
            num_classes: 2,
            objective,
        }
    }

    #[test]
    fn zero_cell_gives_zero_state() {
        let cell = LstmCell::zeros(3, 4);
        let (h, c) = lstm_cell_step(&cell, &[0.0; 3], &[0.0; 4], &[0.0; 4]).unwrap();
        assert_eq!(h, vec![0.0; 4]);
        assert_eq!(c, vec![0.0; 4]);
    }

    #[test]
    fn nan_and_shape_rejected() {
        let cell = LstmCell::zeros(3, 4);
        assert!(matches!(
            lstm_cell_step(&cell, &[f64::NAN, 0.0, 0.0], &[0.0; 4], &[0.0; 4]),
            Err(Error::NonFinite(_))
        ));
        assert!(matches!(
            lstm_cell_step(&cell, &[0.0; 2], &[0.0; 4], &[0.0; 4]),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn single_step_window_reads_same_input_both_ways() {
        let c = cfg(Objective::Classification);
        let mut p = BiLstmParams::init(&c, 4).unwrap();
        p.bwd = p.fwd.clone();
        let z = bilstm_forward(&p, &[vec![0.5, -0.2, 0.1]]).unwrap();
        assert_eq!(z.len(), 8);
        assert_eq!(z[..4], z[4..]);
    }

    #[test]
    fn zero_logits_uniform() {
        let c = cfg(Objective::Classification);
        let p = BiLstmParams::zeros(&c);
        let out = head_forward(&p, &[0.3; 8], &c);
        assert_eq!(out, vec![0.5, 0.5]);
    }

    #[test]
    fn softmax_shift_invariant_and_normalized() {
        let x = [1.5, -3.0, 0.25, 8.0];
        let a = softmax(&x);
        let b = softmax(&x.map(|v| v + 100.0));
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() < 1e-15);
        }
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn loss_values() {
        let r = cfg(Objective::Regression);
        assert_eq!(
            loss(&r, &[1.0, 2.0], Target::Vector(&[1.0, 2.0])).unwrap(),
            0.0
        );
        assert_eq!(
            loss(&r, &[0.0, 0.0], Target::Vector(&[3.0, 4.0])).unwrap(),
            12.5
        );
        let c = ModelConfig {
            num_classes: 4,
            ..cfg(Objective::Classification)
        };
        let ce = loss(&c, &[0.25; 4], Target::Class(2)).unwrap();
        assert!((ce - 4f64.ln()).abs() < 1e-15);
        assert!(loss(&c, &[0.25; 4], Target::Vector(&[0.0])).is_err());
    }
}
