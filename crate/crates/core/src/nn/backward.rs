//! Reverse-mode gradients through the head and both LSTM directions.

use crate::error::Result;

use super::forward::{check_window, head, loss, run_direction, StepCache, Target};
use super::params::{BiLstmParams, LstmCell, ModelConfig, Objective};

/// Backpropagates `dh` from the last step of one direction, accumulating into
/// `grads`.
fn backward_direction<'a>(
    cell: &LstmCell,
    grads: &mut LstmCell,
    trace: &[StepCache],
    inputs: impl DoubleEndedIterator<Item = &'a [f64]>,
    mut dh: Vec<f64>,
) {
    let h = cell.hidden();
    let mut dc = vec![0.0; h];
    let mut da = vec![0.0; 4 * h];
    for (s, x) in trace.iter().rev().zip(inputs.rev()) {
        let (i, rest) = s.gates.split_at(h);
        let (f, rest) = rest.split_at(h);
        let (g, o) = rest.split_at(h);
        for k in 0..h {
            let dct = dc[k] + dh[k] * o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
            da[k] = dct * g[k] * i[k] * (1.0 - i[k]);
            da[h + k] = dct * s.c_prev[k] * f[k] * (1.0 - f[k]);
            da[2 * h + k] = dct * i[k] * (1.0 - g[k] * g[k]);
            da[3 * h + k] = dh[k] * s.tanh_c[k] * o[k] * (1.0 - o[k]);
            dc[k] = dct * f[k];
        }
        grads.w_x.outer_add(&da, x);
        grads.w_h.outer_add(&da, &s.h_prev);
        grads.b.add_assign(&da);
        dh.iter_mut().for_each(|v| *v = 0.0);
        cell.w_h.matvec_t_add(&da, &mut dh);
    }
}

/// Adds the gradient of the loss on one window into `grads` and returns the
/// loss.
pub fn accumulate_gradients<W: AsRef<[f64]>>(
    params: &BiLstmParams,
    window: &[W],
    target: Target<'_>,
    config: &ModelConfig,
    grads: &mut BiLstmParams,
) -> Result<f64> {
    check_window(params, window)?;
    let hs = config.hidden_size;
    let fwd = run_direction(&params.fwd, window.iter().map(|x| x.as_ref()));
    let bwd = run_direction(&params.bwd, window.iter().rev().map(|x| x.as_ref()));
    let mut z = fwd.last().expect("non-empty").h.clone();
    z.extend_from_slice(&bwd.last().expect("non-empty").h);

    let cache = head(params, &z, config.objective);
    let value = loss(config, &cache.out, target)?;

    // d loss / d pre-activation output
    let dy: Vec<f64> = match (config.objective, target) {
        (Objective::Classification, Target::Class(c)) => {
            let mut d = cache.out.clone();
            d[c] -= 1.0;
            d
        }
        (Objective::Regression, Target::Vector(t)) => {
            let n = t.len() as f64;
            cache
                .out
                .iter()
                .zip(t)
                .map(|(y, t)| 2.0 * (y - t) / n)
                .collect()
        }
        _ => unreachable!("loss() rejects mismatched targets"),
    };

    grads.lin2_w.outer_add(&dy, &cache.u);
    grads.lin2_b.add_assign(&dy);
    let mut du = vec![0.0; hs];
    params.lin2_w.matvec_t_add(&dy, &mut du);
    let da: Vec<f64> = du
        .iter()
        .zip(&cache.u)
        .map(|(g, u)| g * (1.0 - u * u))
        .collect();
    grads.lin1_w.outer_add(&da, &z);
    grads.lin1_b.add_assign(&da);
    let mut dz = vec![0.0; 2 * hs];
    params.lin1_w.matvec_t_add(&da, &mut dz);

    backward_direction(
        &params.fwd,
        &mut grads.fwd,
        &fwd,
        window.iter().map(|x| x.as_ref()),
        dz[..hs].to_vec(),
    );
    backward_direction(
        &params.bwd,
        &mut grads.bwd,
        &bwd,
        window.iter().rev().map(|x| x.as_ref()),
        dz[hs..].to_vec(),
    );
    Ok(value)
}

/// Loss and exact gradients for a single window.
pub fn backward<W: AsRef<[f64]>>(
    params: &BiLstmParams,
    window: &[W],
    target: Target<'_>,
    config: &ModelConfig,
) -> Result<(f64, BiLstmParams)> {
    let mut grads = BiLstmParams::zeros(config);
    let value = accumulate_gradients(params, window, target, config, &mut grads)?;
    Ok((value, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::forward::predict;

    #[test]
    fn gradient_shapes_match_params() {
        let c = ModelConfig {
            embed_dim: 4,
            hidden_size: 3,
            window: 2,
            num_classes: 3,
            objective: Objective::Classification,
        };
        let p = BiLstmParams::init(&c, 0).unwrap();
        let (_, g) = backward(&p, &[vec![0.1; 4], vec![0.2; 4]], Target::Class(1), &c).unwrap();
        for (a, b) in p.tensors().iter().zip(g.tensors()) {
            assert_eq!(a.shape(), b.shape());
        }
    }

    #[test]
    fn perfect_regression_has_zero_gradient() {
        let c = ModelConfig {
            embed_dim: 4,
            hidden_size: 3,
            window: 2,
            num_classes: 0,
            objective: Objective::Regression,
        };
        let p = BiLstmParams::init(&c, 0).unwrap();
        let w = [vec![0.1, 0.0, -0.3, 1.0], vec![0.2; 4]];
        let y = predict(&p, &w, &c).unwrap();
        let (l, g) = backward(&p, &w, Target::Vector(&y), &c).unwrap();
        assert_eq!(l, 0.0);
        assert!(g
            .tensors()
            .iter()
            .all(|t| t.data().iter().all(|&x| x == 0.0)));
    }
}
