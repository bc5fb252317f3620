//! Finite-difference verification of every backward pass.
//!
//! For sampled parameter coordinates, compares the analytic gradient with
//! the central difference (L(p+ε) − L(p−ε)) / 2ε. The loss is evaluated
//! with a generator reseeded identically per evaluation, so dropout masks
//! are held constant and the loss is a deterministic function of the
//! parameters. Batch norm runs in train mode (batch statistics); its
//! running-stat updates do not feed back into the loss.

use super::network::Network;
use super::NnError;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    /// Central-difference step.
    pub eps: f64,
    /// Coordinates sampled per tensor (small tensors are checked fully).
    pub samples_per_tensor: usize,
    /// Seed for coordinate sampling and the fixed dropout masks.
    pub seed: u64,
    /// Sample dropout masks (held fixed) instead of forcing the identity.
    pub dropout_active: bool,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            eps: 1e-5,
            samples_per_tensor: 200,
            seed: 0,
            dropout_active: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub coords_checked: usize,
    pub worst_tensor: String,
    pub worst_index: usize,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
}

fn loss_of<S: Scalar>(
    net: &mut Network<S>,
    x: &Tensor<S>,
    targets: &Tensor<S>,
    cfg: &GradCheckConfig,
) -> Result<S, NnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dropout_rng = cfg.dropout_active.then_some(&mut rng);
    let (loss, _, _) = net.forward_train(x, targets, dropout_rng)?;
    Ok(loss)
}

/// Returns the maximum relative error over the sampled coordinates,
/// |a − n| / max(|a|, |n|, 1e-8).
///
/// The analytic gradient comes from one backward pass at the network's own
/// precision. The finite differences are evaluated through the same layer
/// code instantiated at double-double precision: an f64 loss quantizes at
/// ~4.4e-16, which puts ±2e-11 of noise on a central difference with
/// ε = 1e-5 and would mask any gradient coordinate below ~2e-7. The
/// extended-precision oracle measures those coordinates honestly instead.
pub fn gradient_check<S: Scalar>(
    net: &Network<S>,
    x: &Tensor<S>,
    targets: &Tensor<S>,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport, NnError> {
    let mut net = net.clone();

    let analytic: Vec<Tensor<S>> = {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let dropout_rng = cfg.dropout_active.then_some(&mut rng);
        let (_, _, caches) = net.forward_train(x, targets, dropout_rng)?;
        net.backward(&caches)?
    };
    let names = net.param_names();

    // Exact embedding of the f64 parameter point into double-double.
    type Dd = twofloat::TwoFloat;
    let mut net_dd: Network<Dd> = net.cast();
    let x_dd: Tensor<Dd> = x.cast();
    let targets_dd: Tensor<Dd> = targets.cast();
    let eps_dd = Dd::from_f64(cfg.eps);

    let mut sampler = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_c0de);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        coords_checked: 0,
        worst_tensor: String::new(),
        worst_index: 0,
        worst_analytic: 0.0,
        worst_numeric: 0.0,
    };

    for (ti, name) in names.iter().enumerate() {
        let numel = analytic[ti].numel();
        let coords: Vec<usize> = if numel <= cfg.samples_per_tensor {
            (0..numel).collect()
        } else {
            (0..cfg.samples_per_tensor)
                .map(|_| sampler.gen_range(0..numel))
                .collect()
        };
        for ci in coords {
            let original = net_dd.trainable_params()[ti].data()[ci];

            net_dd.trainable_params_mut()[ti].data_mut()[ci] = original + eps_dd;
            let plus = loss_of(&mut net_dd, &x_dd, &targets_dd, cfg)?;
            net_dd.trainable_params_mut()[ti].data_mut()[ci] = original - eps_dd;
            let minus = loss_of(&mut net_dd, &x_dd, &targets_dd, cfg)?;
            net_dd.trainable_params_mut()[ti].data_mut()[ci] = original;

            let numeric = ((plus - minus) / (eps_dd + eps_dd)).as_f64();
            let a = analytic[ti].data()[ci].as_f64();
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            report.coords_checked += 1;
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst_tensor = name.clone();
                report.worst_index = ci;
                report.worst_analytic = a;
                report.worst_numeric = numeric;
            }
        }
    }
    Ok(report)
}
