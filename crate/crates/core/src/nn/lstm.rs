//! LSTM cell, unrolled forward pass, and backpropagation through time,
//! plus the bidirectional wrapper.
//!
//! Gate equations (per timestep, batch-major):
//!   i = σ(x·W_i + h·U_i + b_i)      f = σ(x·W_f + h·U_f + b_f)
//!   g = tanh(x·W_g + h·U_g + b_g)   o = σ(x·W_o + h·U_o + b_o)
//!   c_t = f ⊙ c_prev + i ⊙ g        h_t = o ⊙ tanh(c_t)

use super::NnError;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Gate order used everywhere: input, forget, cell, output.
pub const GATE_NAMES: [&str; 4] = ["i", "f", "g", "o"];
const I: usize = 0;
const F: usize = 1;
const G: usize = 2;
const O: usize = 3;

/// Per-gate weights: `w[k]` maps input→hidden (d×h), `u[k]` hidden→hidden
/// (h×h), `b[k]` is the bias (h).
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams<S: Scalar> {
    pub input_dim: usize,
    pub hidden: usize,
    pub w: [Tensor<S>; 4],
    pub u: [Tensor<S>; 4],
    pub b: [Tensor<S>; 4],
}

fn glorot<S: Scalar>(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor<S> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| S::from_f64(rng.gen_range(-bound..bound)))
        .collect();
    Tensor::from_vec(&[rows, cols], data).expect("generated data matches shape")
}

impl<S: Scalar> LstmParams<S> {
    /// Glorot-uniform weights, zero biases, forget bi­as 1.
    pub fn init(input_dim: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let w = std::array::from_fn(|_| glorot(input_dim, hidden, rng));
        let u = std::array::from_fn(|_| glorot(hidden, hidden, rng));
        let b = std::array::from_fn(|k| {
            if k == F {
                Tensor::filled(&[hidden], S::one())
            } else {
                Tensor::zeros(&[hidden])
            }
        });
        LstmParams {
            input_dim,
            hidden,
            w,
            u,
            b,
        }
    }

    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        LstmParams {
            input_dim,
            hidden,
            w: std::array::from_fn(|_| Tensor::zeros(&[input_dim, hidden])),
            u: std::array::from_fn(|_| Tensor::zeros(&[hidden, hidden])),
            b: std::array::from_fn(|_| Tensor::zeros(&[hidden])),
        }
    }

    fn check_step_shapes(
        &self,
        x: &Tensor<S>,
        h: &Tensor<S>,
        c: &Tensor<S>,
    ) -> Result<(), NnError> {
        if x.rank() != 2 || x.cols() != self.input_dim {
            return Err(NnError::Dim {
                what: "lstm input width",
                expected: self.input_dim,
                got: if x.rank() == 2 { x.cols() } else { x.rank() },
            });
        }
        for (name, t) in [("hidden state", h), ("cell state", c)] {
            if t.shape() != [x.rows(), self.hidden] {
                return Err(NnError::Dim {
                    what: match name {
                        "hidden state" => "lstm hidden state width",
                        _ => "lstm cell state width",
                    },
                    expected: self.hidden,
                    got: t.cols(),
                });
            }
        }
        Ok(())
    }

    /// One cell step; returns (h_t, c_t).
    pub fn step(
        &self,
        x_t: &Tensor<S>,
        h_prev: &Tensor<S>,
        c_prev: &Tensor<S>,
    ) -> Result<(Tensor<S>, Tensor<S>), NnError> {
        let (gates, c_t, tanh_c) = self.step_inner(x_t, h_prev, c_prev)?;
        let h_t = gates[O].hadamard(&tanh_c)?;
        Ok((h_t, c_t))
    }

    /// Step returning post-activation gates and cell products for caching.
    fn step_inner(
        &self,
        x_t: &Tensor<S>,
        h_prev: &Tensor<S>,
        c_prev: &Tensor<S>,
    ) -> Result<([Tensor<S>; 4], Tensor<S>, Tensor<S>), NnError> {
        self.check_step_shapes(x_t, h_prev, c_prev)?;
        let mut gates: [Tensor<S>; 4] =
            std::array::from_fn(|_| Tensor::zeros(&[x_t.rows(), self.hidden]));
        for k in 0..4 {
            let mut z = x_t.matmul(&self.w[k])?;
            z.add_assign(&h_prev.matmul(&self.u[k])?)?;
            z.add_bias_rows(&self.b[k])?;
            gates[k] = if k == G {
                z.map(|v| v.tanh())
            } else {
                z.map(sigmoid)
            };
        }
        let mut c_t = gates[F].hadamard(c_prev)?;
        c_t.add_assign(&gates[I].hadamard(&gates[G])?)?;
        let tanh_c = c_t.map(|v| v.tanh());
        Ok((gates, c_t, tanh_c))
    }
}

fn sigmoid<S: Scalar>(x: S) -> S {
    S::one() / (S::one() + (-x).exp())
}

/// Everything the backward pass needs, captured during the forward pass.
#[derive(Debug, Clone)]
pub struct LstmCache<S: Scalar> {
    x: Tensor<S>,
    gates: Vec<[Tensor<S>; 4]>,
    c_prev: Vec<Tensor<S>>,
    h_prev: Vec<Tensor<S>>,
    tanh_c: Vec<Tensor<S>>,
}

impl<S: Scalar> LstmCache<S> {
    pub fn steps(&self) -> usize {
        self.gates.len()
    }
}

#[derive(Debug, Clone)]
pub struct LstmGrads<S: Scalar> {
    pub w: [Tensor<S>; 4],
    pub u: [Tensor<S>; 4],
    pub b: [Tensor<S>; 4],
}

/// Unrolls the cell over an (m×n×d) input from zero initial state.
/// Returns the full hidden sequence (m×n×h) and the cache.
pub fn lstm_forward<S: Scalar>(
    params: &LstmParams<S>,
    x: &Tensor<S>,
) -> Result<(Tensor<S>, LstmCache<S>), NnError> {
    if x.rank() != 3 {
        return Err(NnError::Dim {
            what: "lstm input rank",
            expected: 3,
            got: x.rank(),
        });
    }
    let (m, n) = (x.shape()[0], x.shape()[1]);
    let mut h = Tensor::zeros(&[m, params.hidden]);
    let mut c = Tensor::zeros(&[m, params.hidden]);
    let mut seq = Tensor::zeros(&[m, n, params.hidden]);
    let mut cache = LstmCache {
        x: x.clone(),
        gates: Vec::with_capacity(n),
        c_prev: Vec::with_capacity(n),
        h_prev: Vec::with_capacity(n),
        tanh_c: Vec::with_capacity(n),
    };
    for t in 0..n {
        let x_t = x.time_slice(t)?;
        let (gates, c_t, tanh_c) = params.step_inner(&x_t, &h, &c)?;
        let h_t = gates[O].hadamard(&tanh_c)?;
        seq.set_time_slice(t, &h_t)?;
        cache.c_prev.push(c);
        cache.h_prev.push(h);
        cache.tanh_c.push(tanh_c);
        cache.gates.push(gates);
        h = h_t;
        c = c_t;
    }
    Ok((seq, cache))
}

/// Backpropagation through time. `d_seq` is the loss gradient w.r.t. the
/// full hidden sequence (zero-filled except the last step when only the
/// final state feeds the next layer). Returns parameter gradients and the
/// gradient w.r.t. the input.
pub fn lstm_backward<S: Scalar>(
    params: &LstmParams<S>,
    cache: &LstmCache<S>,
    d_seq: &Tensor<S>,
) -> Result<(LstmGrads<S>, Tensor<S>), NnError> {
    let (m, n, h) = (
        cache.x.shape()[0],
        cache.x.shape()[1],
        params.hidden,
    );
    if d_seq.shape() != [m, n, h] {
        return Err(NnError::Dim {
            what: "lstm sequence gradient width",
            expected: h,
            got: d_seq.cols(),
        });
    }
    let mut grads = LstmGrads {
        w: std::array::from_fn(|_| Tensor::zeros(&[params.input_dim, h])),
        u: std::array::from_fn(|_| Tensor::zeros(&[h, h])),
        b: std::array::from_fn(|_| Tensor::zeros(&[h])),
    };
    let mut dx = Tensor::zeros(cache.x.shape());
    let mut dh_next = Tensor::zeros(&[m, h]);
    let mut dc_next = Tensor::zeros(&[m, h]);

    for t in (0..n).rev() {
        let gates = &cache.gates[t];
        let tanh_c = &cache.tanh_c[t];
        let c_prev = &cache.c_prev[t];
        let h_prev = &cache.h_prev[t];

        let mut dh = d_seq.time_slice(t)?;
        dh.add_assign(&dh_next)?;

        // dc = dh ⊙ o ⊙ (1 − tanh²(c)) + dc carried from t+1
        let mut dc = dh.hadamard(&gates[O])?;
        for (v, &tc) in dc.data_mut().iter_mut().zip(tanh_c.data()) {
            *v *= S::one() - tc * tc;
        }
        dc.add_assign(&dc_next)?;

        // Pre-activation gate gradients.
        let mut dz: [Tensor<S>; 4] = [
            dc.hadamard(&gates[G])?,                 // di
            dc.hadamard(c_prev)?,                    // df
            dc.hadamard(&gates[I])?,                 // dg
            dh.hadamard(tanh_c)?,                    // do
        ];
        for k in [I, F, O] {
            for (v, &a) in dz[k].data_mut().iter_mut().zip(gates[k].data()) {
                *v *= a * (S::one() - a);
            }
        }
        for (v, &a) in dz[G].data_mut().iter_mut().zip(gates[G].data()) {
            *v *= S::one() - a * a;
        }

        let x_t = cache.x.time_slice(t)?;
        let mut dx_t = Tensor::zeros(&[m, params.input_dim]);
        let mut dh_prev = Tensor::zeros(&[m, h]);
        for k in 0..4 {
            grads.w[k].add_assign(&x_t.matmul_ta(&dz[k])?)?;
            grads.u[k].add_assign(&h_prev.matmul_ta(&dz[k])?)?;
            for row in 0..m {
                let zrow = dz[k].row(row);
                for (j, zv) in zrow.iter().enumerate() {
                    grads.b[k].data_mut()[j] += *zv;
                }
            }
            dx_t.add_assign(&dz[k].matmul_tb(&params.w[k])?)?;
            dh_prev.add_assign(&dz[k].matmul_tb(&params.u[k])?)?;
        }
        dx.set_time_slice(t, &dx_t)?;
        dh_next = dh_prev;
        dc_next = dc.hadamard(&gates[F])?;
    }
    Ok((grads, dx))
}

/// Bidirectional pass: one LSTM over t = 1..n, another over t = n..1; the
/// output is final-forward ⧺ final-backward hidden states (m × 2h).
pub fn bilstm_forward<S: Scalar>(
    fwd: &LstmParams<S>,
    bwd: &LstmParams<S>,
    x: &Tensor<S>,
) -> Result<(Tensor<S>, LstmCache<S>, LstmCache<S>), NnError> {
    if fwd.hidden != bwd.hidden {
        return Err(NnError::Dim {
            what: "bidirectional hidden size",
            expected: fwd.hidden,
            got: bwd.hidden,
        });
    }
    let n = x.shape()[1];
    let (seq_f, cache_f) = lstm_forward(fwd, x)?;
    let (seq_b, cache_b) = lstm_forward(bwd, &x.reverse_time()?)?;
    let out = seq_f
        .time_slice(n - 1)?
        .concat_cols(&seq_b.time_slice(n - 1)?)?;
    Ok((out, cache_f, cache_b))
}

/// Backward for [`bilstm_forward`]: splits the (m×2h) output gradient and
/// runs BPTT in both directions. Returns (fwd grads, bwd grads, dX).
pub fn bilstm_backward<S: Scalar>(
    fwd: &LstmParams<S>,
    bwd: &LstmParams<S>,
    cache_f: &LstmCache<S>,
    cache_b: &LstmCache<S>,
    d_out: &Tensor<S>,
) -> Result<(LstmGrads<S>, LstmGrads<S>, Tensor<S>), NnError> {
    let (m, n) = (cache_f.x.shape()[0], cache_f.x.shape()[1]);
    let h = fwd.hidden;
    if d_out.shape() != [m, 2 * h] {
        return Err(NnError::Dim {
            what: "bidirectional output gradient width",
            expected: 2 * h,
            got: d_out.cols(),
        });
    }
    let mut d_left = Tensor::zeros(&[m, h]);
    let mut d_right = Tensor::zeros(&[m, h]);
    for i in 0..m {
        d_left.row_mut(i).copy_from_slice(&d_out.row(i)[..h]);
        d_right.row_mut(i).copy_from_slice(&d_out.row(i)[h..]);
    }
    let mut d_seq_f = Tensor::zeros(&[m, n, h]);
    d_seq_f.set_time_slice(n - 1, &d_left)?;
    let mut d_seq_b = Tensor::zeros(&[m, n, h]);
    d_seq_b.set_time_slice(n - 1, &d_right)?;

    let (grads_f, dx_f) = lstm_backward(fwd, cache_f, &d_seq_f)?;
    let (grads_b, dx_b_rev) = lstm_backward(bwd, cache_b, &d_seq_b)?;
    let mut dx = dx_f;
    dx.add_assign(&dx_b_rev.reverse_time()?)?;
    Ok((grads_f, grads_b, dx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    type T = Tensor<f64>;

    #[test]
    fn zero_params_zero_state_give_zero_hidden() {
        // i = f = o = σ(0) = 0.5, g = tanh(0) = 0
        // c = 0.5·0 + 0.5·0 = 0, h = 0.5·tanh(0) = 0
        let params = LstmParams::<f64>::zeros(3, 2);
        let x = T::zeros(&[1, 3]);
        let h = T::zeros(&[1, 2]);
        let c = T::zeros(&[1, 2]);
        let (h_t, c_t) = params.step(&x, &h, &c).unwrap();
        assert_eq!(h_t.data(), &[0.0, 0.0]);
        assert_eq!(c_t.data(), &[0.0, 0.0]);
    }

    #[test]
    fn saturated_forget_gate_preserves_the_cell() {
        // b_f -> +inf keeps f at 1; b_i -> -inf keeps i at 0, so c_t = c_prev.
        let mut params = LstmParams::<f64>::zeros(2, 2);
        params.b[1] = T::filled(&[2], 1e3);
        params.b[0] = T::filled(&[2], -1e3);
        let x = T::from_vec(&[1, 2], vec![0.3, -0.8]).unwrap();
        let h = T::zeros(&[1, 2]);
        let c = T::from_vec(&[1, 2], vec![0.7, -0.2]).unwrap();
        let (_, c_t) = params.step(&x, &h, &c).unwrap();
        for (got, want) in c_t.data().iter().zip(c.data()) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn step_matches_scalar_hand_computation() {
        // hidden 2, input 1, one batch row; recompute each lane with plain
        // scalar arithmetic, independent of the tensor path.
        let mut params = LstmParams::<f64>::zeros(1, 2);
        let w = [[0.5, -0.3], [0.2, 0.4], [-0.6, 0.1], [0.3, 0.7]];
        let u0 = [[0.1, 0.2], [-0.1, 0.3]];
        let b = [[0.01, -0.02], [0.5, 0.5], [0.0, 0.1], [-0.3, 0.2]];
        for k in 0..4 {
            params.w[k] = T::from_vec(&[1, 2], w[k].to_vec()).unwrap();
            params.u[k] = T::from_vec(&[2, 2], u0.iter().flatten().copied().collect()).unwrap();
            params.b[k] = T::from_vec(&[2], b[k].to_vec()).unwrap();
        }
        let x = 0.8;
        let h_prev = [0.1, -0.2];
        let c_prev = [0.05, 0.3];

        let xt = T::from_vec(&[1, 1], vec![x]).unwrap();
        let hp = T::from_vec(&[1, 2], h_prev.to_vec()).unwrap();
        let cp = T::from_vec(&[1, 2], c_prev.to_vec()).unwrap();
        let (h_t, c_t) = params.step(&xt, &hp, &cp).unwrap();

        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        for lane in 0..2 {
            let uh = |_k: usize| h_prev[0] * u0[0][lane] + h_prev[1] * u0[1][lane];
            let zi = x * w[0][lane] + uh(0) + b[0][lane];
            let zf = x * w[1][lane] + uh(1) + b[1][lane];
            let zg = x * w[2][lane] + uh(2) + b[2][lane];
            let zo = x * w[3][lane] + uh(3) + b[3][lane];
            let c_ref = sig(zf) * c_prev[lane] + sig(zi) * zg.tanh();
            let h_ref = sig(zo) * c_ref.tanh();
            assert!((c_t.data()[lane] - c_ref).abs() < 1e-14);
            assert!((h_t.data()[lane] - h_ref).abs() < 1e-14);
        }
    }

    #[test]
    fn single_step_sequence_equals_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = LstmParams::<f64>::init(3, 4, &mut rng);
        let x_data: Vec<f64> = (0..6).map(|i| (i as f64) * 0.1 - 0.2).collect();
        let x3 = T::from_vec(&[2, 1, 3], x_data.clone()).unwrap();
        let (seq, _) = lstm_forward(&params, &x3).unwrap();
        let x2 = T::from_vec(&[2, 3], x_data).unwrap();
        let (h, _) = params
            .step(&x2, &T::zeros(&[2, 4]), &T::zeros(&[2, 4]))
            .unwrap();
        assert_eq!(seq.time_slice(0).unwrap(), h);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let params = LstmParams::<f64>::zeros(3, 2);
        let x = T::zeros(&[1, 4]);
        assert!(params
            .step(&x, &T::zeros(&[1, 2]), &T::zeros(&[1, 2]))
            .is_err());
    }

    #[test]
    fn bilstm_output_width_is_twice_hidden() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let fwd = LstmParams::<f64>::init(3, 5, &mut rng);
        let bwd = LstmParams::<f64>::init(3, 5, &mut rng);
        let x = T::zeros(&[2, 4, 3]);
        let (out, _, _) = bilstm_forward(&fwd, &bwd, &x).unwrap();
        assert_eq!(out.shape(), &[2, 10]);
    }

    #[test]
    fn bilstm_palindrome_with_shared_params_has_equal_halves() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = LstmParams::<f64>::init(2, 3, &mut rng);
        // x_t == x_{n+1-t}
        let steps = [[0.5, -0.1], [0.2, 0.9], [0.5, -0.1]];
        let x = T::from_vec(&[1, 3, 2], steps.iter().flatten().copied().collect()).unwrap();
        let (out, _, _) = bilstm_forward(&params, &params, &x).unwrap();
        let (left, right) = out.data().split_at(3);
        for (a, b) in left.iter().zip(right) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn bilstm_hidden_size_mismatch_errors() {
        let fwd = LstmParams::<f64>::zeros(2, 3);
        let bwd = LstmParams::<f64>::zeros(2, 4);
        let x = T::zeros(&[1, 2, 2]);
        assert!(bilstm_forward(&fwd, &bwd, &x).is_err());
    }
}
