//! Dropout, batch normalization, and the dense + softmax cross-entropy
//! head, with hand-derived backward passes.

use super::NnError;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const BATCHNORM_EPS: f64 = 1e-5;

/// Inverted dropout: each element is kept with probability `keep_prob` and
/// scaled by 1/keep_prob, so inference is the exact identity. Returns the
/// output and the scaled mask (None when the layer degenerates to the
/// identity). The backward pass is a Hadamard with the same mask.
pub fn dropout<S: Scalar>(
    x: &Tensor<S>,
    keep_prob: f64,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<(Tensor<S>, Option<Tensor<S>>), NnError> {
    if !(keep_prob > 0.0 && keep_prob <= 1.0) {
        return Err(NnError::BadKeepProb(keep_prob));
    }
    let rng = match rng {
        Some(r) if keep_prob < 1.0 => r,
        _ => return Ok((x.clone(), None)),
    };
    let inv = S::from_f64(1.0 / keep_prob);
    let mask_data: Vec<S> = (0..x.numel())
        .map(|_| {
            if rng.gen::<f64>() < keep_prob {
                inv
            } else {
                S::zero()
            }
        })
        .collect();
    let mask = Tensor::from_vec(x.shape(), mask_data).expect("mask shape mirrors input");
    let y = x.hadamard(&mask)?;
    Ok((y, Some(mask)))
}

/// Cache produced by a train-mode batch-norm forward pass.
#[derive(Debug, Clone)]
pub struct BatchNormCache<S: Scalar> {
    pub x_hat: Tensor<S>,
    pub inv_std: Vec<S>,
    pub batch_mean: Vec<S>,
    pub batch_var: Vec<S>,
}

/// Train-mode batch norm over an (m×d) matrix: per-feature normalization
/// by batch statistics (ε inside the square root), then scale/shift.
pub fn batchnorm_train<S: Scalar>(
    x: &Tensor<S>,
    gamma: &Tensor<S>,
    beta: &Tensor<S>,
) -> Result<(Tensor<S>, BatchNormCache<S>), NnError> {
    let (m, d) = (x.rows(), x.cols());
    if m < 2 {
        return Err(NnError::BatchTooSmall(m));
    }
    let eps = S::from_f64(BATCHNORM_EPS);
    let inv_m = S::one() / S::from_usize(m);

    let mut mean = vec![S::zero(); d];
    for i in 0..m {
        for (j, &v) in x.row(i).iter().enumerate() {
            mean[j] += v;
        }
    }
    for v in &mut mean {
        *v *= inv_m;
    }
    let mut var = vec![S::zero(); d];
    for i in 0..m {
        for (j, &v) in x.row(i).iter().enumerate() {
            let c = v - mean[j];
            var[j] += c * c;
        }
    }
    for v in &mut var {
        *v *= inv_m;
    }
    let inv_std: Vec<S> = var.iter().map(|&v| S::one() / (v + eps).sqrt()).collect();

    let mut x_hat = Tensor::zeros(&[m, d]);
    let mut y = Tensor::zeros(&[m, d]);
    for i in 0..m {
        for j in 0..d {
            let xh = (x.row(i)[j] - mean[j]) * inv_std[j];
            x_hat.row_mut(i)[j] = xh;
            y.row_mut(i)[j] = gamma.data()[j] * xh + beta.data()[j];
        }
    }
    Ok((
        y,
        BatchNormCache {
            x_hat,
            inv_std,
            batch_mean: mean,
            batch_var: var,
        },
    ))
}

/// Inference-mode batch norm: normalizes by running statistics.
pub fn batchnorm_infer<S: Scalar>(
    x: &Tensor<S>,
    gamma: &Tensor<S>,
    beta: &Tensor<S>,
    running_mean: &Tensor<S>,
    running_var: &Tensor<S>,
) -> Result<Tensor<S>, NnError> {
    let (m, d) = (x.rows(), x.cols());
    let eps = S::from_f64(BATCHNORM_EPS);
    let mut y = Tensor::zeros(&[m, d]);
    for i in 0..m {
        for j in 0..d {
            let inv = S::one() / (running_var.data()[j] + eps).sqrt();
            let xh = (x.row(i)[j] - running_mean.data()[j]) * inv;
            y.row_mut(i)[j] = gamma.data()[j] * xh + beta.data()[j];
        }
    }
    Ok(y)
}

/// Backward through train-mode batch norm, including the batch-statistics
/// paths. Returns (dx, dgamma, dbeta).
pub fn batchnorm_backward<S: Scalar>(
    cache: &BatchNormCache<S>,
    gamma: &Tensor<S>,
    dy: &Tensor<S>,
) -> Result<(Tensor<S>, Tensor<S>, Tensor<S>), NnError> {
    let (m, d) = (dy.rows(), dy.cols());
    let inv_m = S::one() / S::from_usize(m);

    let mut dgamma = Tensor::zeros(&[d]);
    let mut dbeta = Tensor::zeros(&[d]);
    for i in 0..m {
        for j in 0..d {
            dgamma.data_mut()[j] += dy.row(i)[j] * cache.x_hat.row(i)[j];
            dbeta.data_mut()[j] += dy.row(i)[j];
        }
    }

    // dx = (inv_std / m) · (m·dxh − Σdxh − x̂·Σ(dxh ⊙ x̂))
    let mut sum_dxh = vec![S::zero(); d];
    let mut sum_dxh_xh = vec![S::zero(); d];
    for i in 0..m {
        for j in 0..d {
            let dxh = dy.row(i)[j] * gamma.data()[j];
            sum_dxh[j] += dxh;
            sum_dxh_xh[j] += dxh * cache.x_hat.row(i)[j];
        }
    }
    let mut dx = Tensor::zeros(&[m, d]);
    for i in 0..m {
        for j in 0..d {
            let dxh = dy.row(i)[j] * gamma.data()[j];
            let term = S::from_usize(m) * dxh
                - sum_dxh[j]
                - cache.x_hat.row(i)[j] * sum_dxh_xh[j];
            dx.row_mut(i)[j] = cache.inv_std[j] * inv_m * term;
        }
    }
    Ok((dx, dgamma, dbeta))
}

#[derive(Debug, Clone)]
pub struct DenseSoftmaxGrads<S: Scalar> {
    pub dx: Tensor<S>,
    pub dw: Tensor<S>,
    pub db: Tensor<S>,
}

/// Dense layer into a softmax cross-entropy loss.
///
/// logits = X·W + b; probs = row-softmax with max subtraction; loss is the
/// mean over rows of −log p(target). Analytic gradients for X, W, b come
/// from dlogits = (probs − targets)/m.
pub fn dense_softmax_cross_entropy<S: Scalar>(
    x: &Tensor<S>,
    w: &Tensor<S>,
    b: &Tensor<S>,
    targets: &Tensor<S>,
) -> Result<(S, Tensor<S>, DenseSoftmaxGrads<S>), NnError> {
    let m = x.rows();
    let v = w.cols();
    if targets.shape() != [m, v] {
        return Err(NnError::Dim {
            what: "target width",
            expected: v,
            got: targets.cols(),
        });
    }
    for row in 0..m {
        let mut ones = 0usize;
        let mut ok = true;
        for &t in targets.row(row) {
            if t == S::one() {
                ones += 1;
            } else if t != S::zero() {
                ok = false;
            }
        }
        if !ok || ones != 1 {
            return Err(NnError::NotOneHot { row });
        }
    }

    let mut logits = x.matmul(w)?;
    logits.add_bias_rows(b)?;

    let mut probs = Tensor::zeros(&[m, v]);
    let mut loss = S::zero();
    for i in 0..m {
        let row = logits.row(i);
        let mut max = row[0];
        for &z in row.iter().skip(1) {
            if z > max {
                max = z;
            }
        }
        let mut denom = S::zero();
        for j in 0..v {
            let e = (row[j] - max).exp();
            probs.row_mut(i)[j] = e;
            denom += e;
        }
        let inv = S::one() / denom;
        for j in 0..v {
            probs.row_mut(i)[j] *= inv;
        }
        for j in 0..v {
            if targets.row(i)[j] == S::one() {
                loss += -(probs.row(i)[j].max(S::from_f64(f64::MIN_POSITIVE))).ln();
            }
        }
    }
    loss /= S::from_usize(m);

    // dlogits = (probs − targets) / m
    let inv_m = S::one() / S::from_usize(m);
    let mut dlogits = Tensor::zeros(&[m, v]);
    for i in 0..m {
        for j in 0..v {
            dlogits.row_mut(i)[j] = (probs.row(i)[j] - targets.row(i)[j]) * inv_m;
        }
    }
    let grads = DenseSoftmaxGrads {
        dx: dlogits.matmul_tb(w)?,
        dw: x.matmul_ta(&dlogits)?,
        db: {
            let mut db = Tensor::zeros(&[v]);
            for i in 0..m {
                for j in 0..v {
                    db.data_mut()[j] += dlogits.row(i)[j];
                }
            }
            db
        },
    };
    Ok((loss, probs, grads))
}

/// Softmax probabilities without a loss, for inference.
pub fn dense_softmax_infer<S: Scalar>(
    x: &Tensor<S>,
    w: &Tensor<S>,
    b: &Tensor<S>,
) -> Result<Tensor<S>, NnError> {
    let (m, v) = (x.rows(), w.cols());
    let mut logits = x.matmul(w)?;
    logits.add_bias_rows(b)?;
    let mut probs = Tensor::zeros(&[m, v]);
    for i in 0..m {
        let row = logits.row(i);
        let mut max = row[0];
        for &z in row.iter().skip(1) {
            if z > max {
                max = z;
            }
        }
        let mut denom = S::zero();
        for j in 0..v {
            let e = (row[j] - max).exp();
            probs.row_mut(i)[j] = e;
            denom += e;
        }
        let inv = S::one() / denom;
        for j in 0..v {
            probs.row_mut(i)[j] *= inv;
        }
    }
    Ok(probs)
}
