//! Layer stack execution: forward in train/infer mode, backward through
//! every layer, and uniform access to the trainable parameters.

use super::layers::{
    batchnorm_backward, batchnorm_infer, batchnorm_train, dense_softmax_cross_entropy,
    dense_softmax_infer, dropout, BatchNormCache, DenseSoftmaxGrads,
};
use super::lstm::{
    bilstm_backward, bilstm_forward, lstm_backward, lstm_forward, LstmCache, LstmParams,
    GATE_NAMES,
};
use super::NnError;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_BN_MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone)]
pub enum ExecLayer<S: Scalar> {
    Lstm {
        params: LstmParams<S>,
        returns_sequence: bool,
    },
    BiLstm {
        fwd: LstmParams<S>,
        bwd: LstmParams<S>,
    },
    Dropout {
        keep: f64,
    },
    BatchNorm {
        gamma: Tensor<S>,
        beta: Tensor<S>,
        running_mean: Tensor<S>,
        running_var: Tensor<S>,
        momentum: f64,
    },
    DenseSoftmax {
        w: Tensor<S>,
        b: Tensor<S>,
    },
}

pub enum LayerCache<S: Scalar> {
    Lstm {
        cache: LstmCache<S>,
        returns_sequence: bool,
        out_shape: Vec<usize>,
    },
    BiLstm {
        fwd: LstmCache<S>,
        bwd: LstmCache<S>,
    },
    Dropout {
        mask: Option<Tensor<S>>,
    },
    BatchNorm(BatchNormCache<S>),
    DenseSoftmax {
        grads: DenseSoftmaxGrads<S>,
    },
}

pub struct TrainCaches<S: Scalar>(Vec<LayerCache<S>>);

/// An ordered layer stack. Labels name each layer for checkpoints and
/// diagnostics; the builder assigns them from the model spec so that
/// spec layer indices survive into tensor names.
#[derive(Debug, Clone)]
pub struct Network<S: Scalar> {
    layers: Vec<ExecLayer<S>>,
    labels: Vec<String>,
    input_width: usize,
    current_width: usize,
}

impl<S: Scalar> Network<S> {
    pub fn new(input_width: usize) -> Self {
        Network {
            layers: Vec::new(),
            labels: Vec::new(),
            input_width,
            current_width: input_width,
        }
    }

    pub fn input_width(&self) -> usize {
        self.input_width
    }

    pub fn output_width(&self) -> usize {
        self.current_width
    }

    pub fn layers(&self) -> &[ExecLayer<S>] {
        &self.layers
    }

    pub fn push_lstm(
        &mut self,
        label: impl Into<String>,
        hidden: usize,
        returns_sequence: bool,
        rng: &mut ChaCha8Rng,
    ) {
        let params = LstmParams::init(self.current_width, hidden, rng);
        self.layers.push(ExecLayer::Lstm {
            params,
            returns_sequence,
        });
        self.labels.push(label.into());
        self.current_width = hidden;
    }

    pub fn push_bilstm(&mut self, label: impl Into<String>, hidden: usize, rng: &mut ChaCha8Rng) {
        let fwd = LstmParams::init(self.current_width, hidden, rng);
        let bwd = LstmParams::init(self.current_width, hidden, rng);
        self.layers.push(ExecLayer::BiLstm { fwd, bwd });
        self.labels.push(label.into());
        self.current_width = 2 * hidden;
    }

    pub fn push_dropout(&mut self, label: impl Into<String>, keep: f64) {
        self.layers.push(ExecLayer::Dropout { keep });
        self.labels.push(label.into());
    }

    pub fn push_batchnorm(&mut self, label: impl Into<String>) {
        let d = self.current_width;
        self.layers.push(ExecLayer::BatchNorm {
            gamma: Tensor::filled(&[d], S::one()),
            beta: Tensor::zeros(&[d]),
            running_mean: Tensor::zeros(&[d]),
            running_var: Tensor::filled(&[d], S::one()),
            momentum: DEFAULT_BN_MOMENTUM,
        });
        self.labels.push(label.into());
    }

    pub fn push_dense_softmax(
        &mut self,
        label: impl Into<String>,
        out_width: usize,
        rng: &mut ChaCha8Rng,
    ) {
        let d = self.current_width;
        let bound = (6.0 / (d + out_width) as f64).sqrt();
        use rand::Rng;
        let data = (0..d * out_width)
            .map(|_| S::from_f64(rng.gen_range(-bound..bound)))
            .collect();
        let w = Tensor::from_vec(&[d, out_width], data).expect("matching init shape");
        self.layers.push(ExecLayer::DenseSoftmax {
            w,
            b: Tensor::zeros(&[out_width]),
        });
        self.labels.push(label.into());
        self.current_width = out_width;
    }

    /// Training-mode forward pass: returns (mean loss, probabilities,
    /// caches for backward). `dropout_rng` of `None` forces dropout layers
    /// to the identity (used by the gradient checker); batch norm always
    /// uses batch statistics here and updates its running stats.
    pub fn forward_train(
        &mut self,
        x: &Tensor<S>,
        targets: &Tensor<S>,
        mut dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(S, Tensor<S>, TrainCaches<S>), NnError> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut act = x.clone();
        let mut result: Option<(S, Tensor<S>)> = None;
        let count = self.layers.len();
        for (li, layer) in self.layers.iter_mut().enumerate() {
            let label = &self.labels[li];
            match layer {
                ExecLayer::Lstm {
                    params,
                    returns_sequence,
                } => {
                    let (seq, cache) = lstm_forward(params, &act)?;
                    let out = if *returns_sequence {
                        seq
                    } else {
                        seq.time_slice(seq.shape()[1] - 1)?
                    };
                    caches.push(LayerCache::Lstm {
                        cache,
                        returns_sequence: *returns_sequence,
                        out_shape: out.shape().to_vec(),
                    });
                    act = out;
                }
                ExecLayer::BiLstm { fwd, bwd } => {
                    let (out, cf, cb) = bilstm_forward(fwd, bwd, &act)?;
                    caches.push(LayerCache::BiLstm { fwd: cf, bwd: cb });
                    act = out;
                }
                ExecLayer::Dropout { keep } => {
                    let (out, mask) = dropout(&act, *keep, dropout_rng.as_deref_mut())?;
                    caches.push(LayerCache::Dropout { mask });
                    act = out;
                }
                ExecLayer::BatchNorm {
                    gamma,
                    beta,
                    running_mean,
                    running_var,
                    momentum,
                } => {
                    let (out, cache) = batchnorm_train(&act, gamma, beta)?;
                    let mom = S::from_f64(*momentum);
                    let keep = S::one() - mom;
                    for (r, &b) in running_mean
                        .data_mut()
                        .iter_mut()
                        .zip(&cache.batch_mean)
                    {
                        *r = mom * *r + keep * b;
                    }
                    for (r, &b) in running_var.data_mut().iter_mut().zip(&cache.batch_var) {
                        *r = mom * *r + keep * b;
                    }
                    caches.push(LayerCache::BatchNorm(cache));
                    act = out;
                }
                ExecLayer::DenseSoftmax { w, b } => {
                    if li != count - 1 {
                        return Err(NnError::BadSpec(
                            "dense+softmax must be the terminal layer".into(),
                        ));
                    }
                    let (loss, probs, grads) = dense_softmax_cross_entropy(&act, w, b, targets)?;
                    caches.push(LayerCache::DenseSoftmax { grads });
                    result = Some((loss, probs.clone()));
                    act = probs;
                }
            }
            if !act.is_all_finite() {
                return Err(NnError::NonFinite {
                    layer: label.clone(),
                });
            }
        }
        let (loss, probs) =
            result.ok_or_else(|| NnError::BadSpec("network has no softmax head".into()))?;
        Ok((loss, probs, TrainCaches(caches)))
    }

    /// Inference: dropout is the identity, batch norm uses running stats.
    pub fn forward_infer(&self, x: &Tensor<S>) -> Result<Tensor<S>, NnError> {
        let mut act = x.clone();
        for (li, layer) in self.layers.iter().enumerate() {
            match layer {
                ExecLayer::Lstm {
                    params,
                    returns_sequence,
                } => {
                    let (seq, _) = lstm_forward(params, &act)?;
                    act = if *returns_sequence {
                        seq
                    } else {
                        seq.time_slice(seq.shape()[1] - 1)?
                    };
                }
                ExecLayer::BiLstm { fwd, bwd } => {
                    let (out, _, _) = bilstm_forward(fwd, bwd, &act)?;
                    act = out;
                }
                ExecLayer::Dropout { .. } => {}
                ExecLayer::BatchNorm {
                    gamma,
                    beta,
                    running_mean,
                    running_var,
                    ..
                } => {
                    act = batchnorm_infer(&act, gamma, beta, running_mean, running_var)?;
                }
                ExecLayer::DenseSoftmax { w, b } => {
                    act = dense_softmax_infer(&act, w, b)?;
                }
            }
            if !act.is_all_finite() {
                return Err(NnError::NonFinite {
                    layer: self.labels[li].clone(),
                });
            }
        }
        Ok(act)
    }

    /// Backward pass over the caches from [`Self::forward_train`]. Returns
    /// gradients aligned with [`Self::trainable_params`].
    pub fn backward(&self, caches: &TrainCaches<S>) -> Result<Vec<Tensor<S>>, NnError> {
        let mut per_layer: Vec<Vec<Tensor<S>>> = Vec::with_capacity(self.layers.len());
        per_layer.resize_with(self.layers.len(), Vec::new);
        let mut upstream: Option<Tensor<S>> = None;

        for (li, (layer, cache)) in self.layers.iter().zip(&caches.0).enumerate().rev() {
            match (layer, cache) {
                (
                    ExecLayer::Lstm { params, .. },
                    LayerCache::Lstm {
                        cache,
                        returns_sequence,
                        out_shape,
                    },
                ) => {
                    let d_up = upstream.take().ok_or_else(|| {
                        NnError::BadSpec("recurrent layer received no gradient".into())
                    })?;
                    let d_seq = if *returns_sequence {
                        d_up
                    } else {
                        // Only the final hidden state fed the next layer.
                        let (m, h) = (out_shape[0], out_shape[1]);
                        let n = cache.steps();
                        let mut z = Tensor::zeros(&[m, n, h]);
                        z.set_time_slice(n - 1, &d_up)?;
                        z
                    };
                    let (grads, dx) = lstm_backward(params, cache, &d_seq)?;
                    let mut list = Vec::with_capacity(12);
                    list.extend(grads.w);
                    list.extend(grads.u);
                    list.extend(grads.b);
                    per_layer[li] = list;
                    upstream = Some(dx);
                }
                (ExecLayer::BiLstm { fwd, bwd }, LayerCache::BiLstm { fwd: cf, bwd: cb }) => {
                    let d_up = upstream.take().ok_or_else(|| {
                        NnError::BadSpec("recurrent layer received no gradient".into())
                    })?;
                    let (gf, gb, dx) = bilstm_backward(fwd, bwd, cf, cb, &d_up)?;
                    let mut list = Vec::with_capacity(24);
                    list.extend(gf.w);
                    list.extend(gf.u);
                    list.extend(gf.b);
                    list.extend(gb.w);
                    list.extend(gb.u);
                    list.extend(gb.b);
                    per_layer[li] = list;
                    upstream = Some(dx);
                }
                (ExecLayer::Dropout { .. }, LayerCache::Dropout { mask }) => {
                    if let (Some(d_up), Some(mask)) = (upstream.as_ref(), mask) {
                        upstream = Some(d_up.hadamard(mask)?);
                    }
                }
                (ExecLayer::BatchNorm { gamma, .. }, LayerCache::BatchNorm(cache)) => {
                    let d_up = upstream.take().ok_or_else(|| {
                        NnError::BadSpec("batch norm received no gradient".into())
                    })?;
                    let (dx, dgamma, dbeta) = batchnorm_backward(cache, gamma, &d_up)?;
                    per_layer[li] = vec![dgamma, dbeta];
                    upstream = Some(dx);
                }
                (ExecLayer::DenseSoftmax { .. }, LayerCache::DenseSoftmax { grads }) => {
                    per_layer[li] = vec![grads.dw.clone(), grads.db.clone()];
                    upstream = Some(grads.dx.clone());
                }
                _ => {
                    return Err(NnError::BadSpec(
                        "cache sequence does not match the layer stack".into(),
                    ))
                }
            }
        }
        Ok(per_layer.into_iter().flatten().collect())
    }

    pub fn trainable_params(&self) -> Vec<&Tensor<S>> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                ExecLayer::Lstm { params, .. } => {
                    out.extend(params.w.iter());
                    out.extend(params.u.iter());
                    out.extend(params.b.iter());
                }
                ExecLayer::BiLstm { fwd, bwd } => {
                    for p in [fwd, bwd] {
                        out.extend(p.w.iter());
                        out.extend(p.u.iter());
                        out.extend(p.b.iter());
                    }
                }
                ExecLayer::Dropout { .. } => {}
                ExecLayer::BatchNorm { gamma, beta, .. } => {
                    out.push(gamma);
                    out.push(beta);
                }
                ExecLayer::DenseSoftmax { w, b } => {
                    out.push(w);
                    out.push(b);
                }
            }
        }
        out
    }

    pub fn trainable_params_mut(&mut self) -> Vec<&mut Tensor<S>> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                ExecLayer::Lstm { params, .. } => {
                    out.extend(params.w.iter_mut());
                    out.extend(params.u.iter_mut());
                    out.extend(params.b.iter_mut());
                }
                ExecLayer::BiLstm { fwd, bwd } => {
                    for p in [fwd, bwd] {
                        out.extend(p.w.iter_mut());
                        out.extend(p.u.iter_mut());
                        out.extend(p.b.iter_mut());
                    }
                }
                ExecLayer::Dropout { .. } => {}
                ExecLayer::BatchNorm { gamma, beta, .. } => {
                    out.push(gamma);
                    out.push(beta);
                }
                ExecLayer::DenseSoftmax { w, b } => {
                    out.push(w);
                    out.push(b);
                }
            }
        }
        out
    }

    fn lstm_param_names(label: &str, prefix: &str) -> Vec<String> {
        let mut names = Vec::with_capacity(12);
        for kind in ["w", "u", "b"] {
            for gate in GATE_NAMES {
                names.push(format!("{label}{prefix}.{kind}_{gate}"));
            }
        }
        names
    }

    /// Names for every trainable parameter, aligned with
    /// [`Self::trainable_params`].
    pub fn param_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (layer, label) in self.layers.iter().zip(&self.labels) {
            match layer {
                ExecLayer::Lstm { .. } => out.extend(Self::lstm_param_names(label, "")),
                ExecLayer::BiLstm { .. } => {
                    out.extend(Self::lstm_param_names(label, ".fwd"));
                    out.extend(Self::lstm_param_names(label, ".bwd"));
                }
                ExecLayer::Dropout { .. } => {}
                ExecLayer::BatchNorm { .. } => {
                    out.push(format!("{label}.gamma"));
                    out.push(format!("{label}.beta"));
                }
                ExecLayer::DenseSoftmax { .. } => {
                    out.push(format!("{label}.w"));
                    out.push(format!("{label}.b"));
                }
            }
        }
        out
    }

    /// All persistent tensors: trainable parameters plus batch-norm
    /// running statistics, in a fixed order.
    pub fn state_tensors(&self) -> Vec<(String, &Tensor<S>)> {
        let mut out: Vec<(String, &Tensor<S>)> = self
            .param_names()
            .into_iter()
            .zip(self.trainable_params())
            .collect();
        for (layer, label) in self.layers.iter().zip(&self.labels) {
            if let ExecLayer::BatchNorm {
                running_mean,
                running_var,
                ..
            } = layer
            {
                out.push((format!("{label}.running_mean"), running_mean));
                out.push((format!("{label}.running_var"), running_var));
            }
        }
        out
    }

    pub fn state_tensors_mut(&mut self) -> Vec<(String, &mut Tensor<S>)> {
        let names = self.param_names();
        let mut trainable: Vec<&mut Tensor<S>> = Vec::new();
        let mut stats: Vec<(String, &mut Tensor<S>)> = Vec::new();
        for (layer, label) in self.layers.iter_mut().zip(&self.labels) {
            match layer {
                ExecLayer::Lstm { params, .. } => {
                    trainable.extend(params.w.iter_mut());
                    trainable.extend(params.u.iter_mut());
                    trainable.extend(params.b.iter_mut());
                }
                ExecLayer::BiLstm { fwd, bwd } => {
                    for p in [fwd, bwd] {
                        trainable.extend(p.w.iter_mut());
                        trainable.extend(p.u.iter_mut());
                        trainable.extend(p.b.iter_mut());
                    }
                }
                ExecLayer::Dropout { .. } => {}
                ExecLayer::BatchNorm {
                    gamma,
                    beta,
                    running_mean,
                    running_var,
                    ..
                } => {
                    trainable.push(gamma);
                    trainable.push(beta);
                    stats.push((format!("{label}.running_mean"), running_mean));
                    stats.push((format!("{label}.running_var"), running_var));
                }
                ExecLayer::DenseSoftmax { w, b } => {
                    trainable.push(w);
                    trainable.push(b);
                }
            }
        }
        let mut out: Vec<(String, &mut Tensor<S>)> = names.into_iter().zip(trainable).collect();
        out.extend(stats);
        out
    }

    pub fn cast<T: Scalar>(&self) -> Network<T> {
        let cast_lstm = |p: &LstmParams<S>| LstmParams::<T> {
            input_dim: p.input_dim,
            hidden: p.hidden,
            w: std::array::from_fn(|k| p.w[k].cast()),
            u: std::array::from_fn(|k| p.u[k].cast()),
            b: std::array::from_fn(|k| p.b[k].cast()),
        };
        Network {
            layers: self
                .layers
                .iter()
                .map(|layer| match layer {
                    ExecLayer::Lstm {
                        params,
                        returns_sequence,
                    } => ExecLayer::Lstm {
                        params: cast_lstm(params),
                        returns_sequence: *returns_sequence,
                    },
                    ExecLayer::BiLstm { fwd, bwd } => ExecLayer::BiLstm {
                        fwd: cast_lstm(fwd),
                        bwd: cast_lstm(bwd),
                    },
                    ExecLayer::Dropout { keep } => ExecLayer::Dropout { keep: *keep },
                    ExecLayer::BatchNorm {
                        gamma,
                        beta,
                        running_mean,
                        running_var,
                        momentum,
                    } => ExecLayer::BatchNorm {
                        gamma: gamma.cast(),
                        beta: beta.cast(),
                        running_mean: running_mean.cast(),
                        running_var: running_var.cast(),
                        momentum: *momentum,
                    },
                    ExecLayer::DenseSoftmax { w, b } => ExecLayer::DenseSoftmax {
                        w: w.cast(),
                        b: b.cast(),
                    },
                })
                .collect(),
            labels: self.labels.clone(),
            input_width: self.input_width,
            current_width: self.current_width,
        }
    }
}
