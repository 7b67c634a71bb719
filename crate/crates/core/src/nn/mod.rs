//! A small trainable Bi-LSTM: one bidirectional layer whose final hidden
//! states feed two linear layers.

mod backward;
mod checkpoint;
mod forward;
mod optim;
mod params;
mod tensor;

pub use backward::{accumulate_gradients, backward};
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, load_checkpoint_expecting,
    save_checkpoint,
};
pub use forward::{
    bilstm_forward, head_forward, loss, lstm_cell_step, mse, predict, softmax, Target,
};
pub use optim::{Optimizer, OptimizerKind};
pub use params::{BiLstmParams, LstmCell, ModelConfig, Objective};
pub use tensor::Tensor;
