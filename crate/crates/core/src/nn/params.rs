use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// Next template as a class; softmax output, cross-entropy loss.
    Classification,
    /// Next template embedding; identity output, mean squared error.
    Regression,
}

impl std::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classification" => Ok(Objective::Classification),
            "regression" => Ok(Objective::Regression),
            other => Err(Error::config(format!("unknown objective {other:?}"))),
        }
    }
}

impl std::fmt::Display for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Objective::Classification => "classification",
            Objective::Regression => "regression",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub hidden_size: usize,
    pub window: usize,
    /// Ignored for regression.
    pub num_classes: usize,
    pub objective: Objective,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.hidden_size == 0 || self.window == 0 {
            return Err(Error::config(
                "embed_dim, hidden_size and window must be at least 1",
            ));
        }
        if self.objective == Objective::Classification && self.num_classes < 2 {
            return Err(Error::config("classification needs at least 2 classes"));
        }
        Ok(())
    }

    pub fn out_dim(&self) -> usize {
        match self.objective {
            Objective::Classification => self.num_classes,
            Objective::Regression => self.embed_dim,
        }
    }
}

/// Gate weights of one LSTM direction. Rows are stacked input, forget,
/// candidate and output gates, `hidden` rows each.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    pub w_x: Tensor,
    pub w_h: Tensor,
    pub b: Tensor,
}

impl LstmCell {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmCell {
            w_x: Tensor::zeros(&[4 * hidden, input]),
            w_h: Tensor::zeros(&[4 * hidden, hidden]),
            b: Tensor::zeros(&[4 * hidden]),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_h.cols()
    }

    pub fn input(&self) -> usize {
        self.w_x.cols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmParams {
    pub fwd: LstmCell,
    pub bwd: LstmCell,
    /// `hidden x 2*hidden`
    pub lin1_w: Tensor,
    pub lin1_b: Tensor,
    /// `out_dim x hidden`
    pub lin2_w: Tensor,
    pub lin2_b: Tensor,
}

pub(crate) const TENSOR_NAMES: [&str; 10] = [
    "fwd.w_x", "fwd.w_h", "fwd.b", "bwd.w_x", "bwd.w_h", "bwd.b", "head.w1", "head.b1", "head.w2",
    "head.b2",
];

fn uniform(t: &mut Tensor, bound: f64, rng: &mut ChaCha8Rng) {
    for x in t.data_mut() {
        *x = rng.random_range(-bound..bound);
    }
}

impl BiLstmParams {
    pub fn zeros(config: &ModelConfig) -> Self {
        let (d, h, out) = (config.embed_dim, config.hidden_size, config.out_dim());
        BiLstmParams {
            fwd: LstmCell::zeros(d, h),
            bwd: LstmCell::zeros(d, h),
            lin1_w: Tensor::zeros(&[h, 2 * h]),
            lin1_b: Tensor::zeros(&[h]),
            lin2_w: Tensor::zeros(&[out, h]),
            lin2_b: Tensor::zeros(&[out]),
        }
    }

    /// Uniform in `±1/sqrt(fan_in)`, forget-gate biases set to 1.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = BiLstmParams::zeros(config);
        let (d, h) = (config.embed_dim as f64, config.hidden_size as f64);
        for cell in [&mut p.fwd, &mut p.bwd] {
            uniform(&mut cell.w_x, 1.0 / d.sqrt(), &mut rng);
            uniform(&mut cell.w_h, 1.0 / h.sqrt(), &mut rng);
            uniform(&mut cell.b, 1.0 / h.sqrt(), &mut rng);
            let hs = config.hidden_size;
            cell.b.data_mut()[hs..2 * hs]
                .iter_mut()
                .for_each(|b| *b = 1.0);
        }
        uniform(&mut p.lin1_w, 1.0 / (2.0 * h).sqrt(), &mut rng);
        uniform(&mut p.lin1_b, 1.0 / (2.0 * h).sqrt(), &mut rng);
        uniform(&mut p.lin2_w, 1.0 / h.sqrt(), &mut rng);
        uniform(&mut p.lin2_b, 1.0 / h.sqrt(), &mut rng);
        Ok(p)
    }

    pub fn tensors(&self) -> [&Tensor; 10] {
        [
            &self.fwd.w_x,
            &self.fwd.w_h,
            &self.fwd.b,
            &self.bwd.w_x,
            &self.bwd.w_h,
            &self.bwd.b,
            &self.lin1_w,
            &self.lin1_b,
            &self.lin2_w,
            &self.lin2_b,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 10] {
        [
            &mut self.fwd.w_x,
            &mut self.fwd.w_h,
            &mut self.fwd.b,
            &mut self.bwd.w_x,
            &mut self.bwd.w_h,
            &mut self.bwd.b,
            &mut self.lin1_w,
            &mut self.lin1_b,
            &mut self.lin2_w,
            &mut self.lin2_b,
        ]
    }

    pub fn named_tensors(&self) -> impl Iterator<Item = (&'static str, &Tensor)> {
        TENSOR_NAMES.into_iter().zip(self.tensors())
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for t in self.tensors_mut() {
            t.fill(0.0);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.data_mut().iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.data().iter().all(|x| x.is_finite()))
    }

    /// Checks every tensor shape against `config`.
    pub fn check_shapes(&self, config: &ModelConfig) -> Result<()> {
        let expected = BiLstmParams::zeros(config);
        for ((name, have), want) in self.named_tensors().zip(expected.tensors()) {
            if have.shape() != want.shape() {
                return Err(Error::format(format!(
                    "tensor {name} has shape {:?}, config implies {:?}",
                    have.shape(),
                    want.shape()
                )));
            }
        }
        Ok(())
    }
}
