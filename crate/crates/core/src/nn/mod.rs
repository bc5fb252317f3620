//! The from-scratch neural engine.
//!
//! Hand-derived forward and backward passes for every layer the two
//! architectures need: LSTM (with backpropagation through time), a
//! bidirectional LSTM wrapper, inverted dropout, batch normalization, and
//! a dense + softmax cross-entropy head, plus the RMSprop update rule and
//! a finite-difference gradient checker that audits all of it.
//!
//! There is no autodiff graph: each layer exposes `forward` producing a
//! cache and `backward` consuming it. Everything is deterministic given
//! the caller-supplied generator.

pub mod gradcheck;
pub mod layers;
pub mod lstm;
pub mod network;
pub mod rmsprop;

pub use gradcheck::{gradient_check, GradCheckConfig, GradCheckReport};
pub use layers::{batchnorm_infer, batchnorm_train, dense_softmax_cross_entropy, dropout};
pub use lstm::{bilstm_forward, lstm_forward, LstmCache, LstmGrads, LstmParams};
pub use network::{ExecLayer, Network, TrainCaches};
pub use rmsprop::{rmsprop_step, RmspropState};

use crate::tensor::ShapeError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("{what} mismatch: expected {expected}, got {got}")]
    Dim {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("keep probability must be in (0, 1], got {0}")]
    BadKeepProb(f64),
    #[error("batch norm needs at least 2 rows in train mode, got {0}")]
    BatchTooSmall(usize),
    #[error("target row {row} is not one-hot")]
    NotOneHot { row: usize },
    #[error("non-finite values after {layer}")]
    NonFinite { layer: String },
    #[error("model spec: {0}")]
    BadSpec(String),
}
