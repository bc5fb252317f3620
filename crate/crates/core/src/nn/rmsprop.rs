//! RMSprop: per-parameter learning rates from an exponentially weighted
//! moving average of squared gradients.
//!
//!   acc ← rho·acc + (1−rho)·g²
//!   p   ← p − lr·g / (√acc + ε)

use super::NnError;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmspropConfig {
    pub learning_rate: f64,
    pub rho: f64,
    pub epsilon: f64,
}

impl Default for RmspropConfig {
    fn default() -> Self {
        RmspropConfig {
            learning_rate: 1e-3,
            rho: 0.9,
            epsilon: 1e-7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RmspropState<S: Scalar> {
    pub config: RmspropConfig,
    pub accumulators: Vec<Tensor<S>>,
}

impl<S: Scalar> RmspropState<S> {
    /// Zero accumulators mirroring the given parameter shapes.
    pub fn new(config: RmspropConfig, params: &[&Tensor<S>]) -> Self {
        RmspropState {
            config,
            accumulators: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
        }
    }
}

/// One update over a parallel (params, grads, accumulators) triple.
pub fn rmsprop_step<S: Scalar>(
    params: &mut [&mut Tensor<S>],
    grads: &[Tensor<S>],
    state: &mut RmspropState<S>,
) -> Result<(), NnError> {
    if params.len() != grads.len() || params.len() != state.accumulators.len() {
        return Err(NnError::Dim {
            what: "parameter list length",
            expected: params.len(),
            got: grads.len().min(state.accumulators.len()),
        });
    }
    let lr = S::from_f64(state.config.learning_rate);
    let rho = S::from_f64(state.config.rho);
    let one_minus_rho = S::one() - rho;
    let eps = S::from_f64(state.config.epsilon);
    for ((p, g), acc) in params
        .iter_mut()
        .zip(grads)
        .zip(&mut state.accumulators)
    {
        if p.shape() != g.shape() || p.shape() != acc.shape() {
            return Err(NnError::Dim {
                what: "parameter tensor size",
                expected: p.numel(),
                got: g.numel(),
            });
        }
        for ((pv, &gv), av) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(acc.data_mut())
        {
            *av = rho * *av + one_minus_rho * gv * gv;
            *pv -= lr * gv / (av.sqrt() + eps);
        }
    }
    Ok(())
}
