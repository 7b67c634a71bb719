//! Log anomaly detection that survives log-message drift.
//!
//! Raw lines are mined into templates ([`parser`]), templates are mapped to
//! vectors ([`embedding`]), and a Bi-LSTM ([`nn`]) learns which template or
//! template vector follows a window of recent events ([`detector`]). Novel
//! templates are matched to their nearest known template, and a trained model
//! can be carried to an updated system with a short fine-tune ([`transfer`]).
//! [`alteration`] corrupts normal data for robustness studies and [`eval`]
//! scores and orchestrates experiments.

pub mod alteration;
pub mod detector;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod nn;
pub mod parser;
pub mod pipeline;
pub mod transfer;

pub use error::{Error, Result};
