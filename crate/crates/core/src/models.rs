//! The two stock architectures and the training loop.
//!
//! The note model stacks LSTM → Dropout → BiLSTM → Dropout → BatchNorm →
//! Dense → Softmax (seven layers); the duration model is the smaller
//! LSTM → LSTM → Dropout → Dense → Softmax. Widths scale by a uniform
//! factor so the same architectures run at desk scale in tests.

use crate::dataset::{epoch_row_batches, BatchProvider, WindowConfig};
use crate::nn::rmsprop::RmspropConfig;
use crate::nn::{rmsprop_step, Network, NnError, RmspropState};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;
use thiserror::Error;

pub const NOTE_LSTM_WIDTH: usize = 512;
pub const NOTE_BILSTM_WIDTH: usize = 256;
pub const DUR_LSTM1_WIDTH: usize = 512;
pub const DUR_LSTM2_WIDTH: usize = 256;
pub const KEEP_PROB: f64 = 0.7;
pub const DEFAULT_CLIP_NORM: f64 = 5.0;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("loss became non-finite at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("training data is empty")]
    EmptyData,
    #[error(transparent)]
    Checkpoint(#[from] crate::checkpoint::CheckpointError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Lstm,
    BidirectionalLstm,
    Dropout,
    Batchnorm,
    Dense,
    Softmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub width: Option<usize>,
    pub keep_prob: Option<f64>,
    pub returns_sequence: Option<bool>,
}

impl LayerSpec {
    fn plain(kind: LayerKind) -> Self {
        LayerSpec {
            kind,
            width: None,
            keep_prob: None,
            returns_sequence: None,
        }
    }
}

/// An ordered layer description plus input/output widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub layers: Vec<LayerSpec>,
    pub input_width: usize,
    pub output_width: usize,
}

fn scaled(width: usize, factor: f64) -> usize {
    ((width as f64 * factor).round() as usize).max(1)
}

/// Note model (scale 1.0 gives the stock 512/256 widths).
pub fn build_note_model(note_vocab: usize, scale: f64) -> ModelSpec {
    ModelSpec {
        layers: vec![
            LayerSpec {
                kind: LayerKind::Lstm,
                width: Some(scaled(NOTE_LSTM_WIDTH, scale)),
                keep_prob: None,
                returns_sequence: Some(true),
            },
            LayerSpec {
                kind: LayerKind::Dropout,
                width: None,
                keep_prob: Some(KEEP_PROB),
                returns_sequence: None,
            },
            LayerSpec {
                kind: LayerKind::BidirectionalLstm,
                width: Some(scaled(NOTE_BILSTM_WIDTH, scale)),
                keep_prob: None,
                returns_sequence: None,
            },
            LayerSpec {
                kind: LayerKind::Dropout,
                width: None,
                keep_prob: Some(KEEP_PROB),
                returns_sequence: None,
            },
            LayerSpec::plain(LayerKind::Batchnorm),
            LayerSpec {
                kind: LayerKind::Dense,
                width: Some(note_vocab),
                keep_prob: None,
                returns_sequence: None,
            },
            LayerSpec::plain(LayerKind::Softmax),
        ],
        input_width: note_vocab,
        output_width: note_vocab,
    }
}

/// Duration model: input features are one-hot note ⧺ one-hot duration.
pub fn build_duration_model(note_vocab: usize, scale: f64) -> ModelSpec {
    ModelSpec {
        layers: vec![
            LayerSpec {
                kind: LayerKind::Lstm,
                width: Some(scaled(DUR_LSTM1_WIDTH, scale)),
                keep_prob: None,
                returns_sequence: Some(true),
            },
            LayerSpec {
                kind: LayerKind::Lstm,
                width: Some(scaled(DUR_LSTM2_WIDTH, scale)),
                keep_prob: None,
                returns_sequence: Some(false),
            },
            LayerSpec {
                kind: LayerKind::Dropout,
                width: None,
                keep_prob: Some(KEEP_PROB),
                returns_sequence: None,
            },
            LayerSpec {
                kind: LayerKind::Dense,
                width: Some(3),
                keep_prob: None,
                returns_sequence: None,
            },
            LayerSpec::plain(LayerKind::Softmax),
        ],
        input_width: note_vocab + 3,
        output_width: 3,
    }
}

impl ModelSpec {
    pub fn validate(&self) -> Result<(), NnError> {
        let n = self.layers.len();
        if n < 2 {
            return Err(NnError::BadSpec("model needs at least dense+softmax".into()));
        }
        let dense = &self.layers[n - 2];
        if dense.kind != LayerKind::Dense || self.layers[n - 1].kind != LayerKind::Softmax {
            return Err(NnError::BadSpec(
                "the last two layers must be dense then softmax".into(),
            ));
        }
        if dense.width != Some(self.output_width) {
            return Err(NnError::BadSpec(format!(
                "dense width {:?} must equal output width {}",
                dense.width, self.output_width
            )));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            let has_keep = layer.keep_prob.is_some();
            if has_keep != (layer.kind == LayerKind::Dropout) {
                return Err(NnError::BadSpec(format!(
                    "layer {i}: keep_prob is for dropout layers only"
                )));
            }
            if matches!(layer.kind, LayerKind::Lstm | LayerKind::BidirectionalLstm)
                && layer.width.is_none()
            {
                return Err(NnError::BadSpec(format!(
                    "layer {i}: recurrent layer needs a width"
                )));
            }
        }
        Ok(())
    }

    /// Canonical serialization; hashed into checkpoints.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("spec serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Instantiates a network from a spec with seeded initialization.
pub fn init_network<S: Scalar>(spec: &ModelSpec, seed: u64) -> Result<Network<S>, NnError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network::new(spec.input_width);
    for (i, layer) in spec.layers.iter().enumerate() {
        match layer.kind {
            LayerKind::Lstm => net.push_lstm(
                format!("layer{i}.lstm"),
                layer.width.expect("validated"),
                layer.returns_sequence.unwrap_or(false),
                &mut rng,
            ),
            LayerKind::BidirectionalLstm => net.push_bilstm(
                format!("layer{i}.bilstm"),
                layer.width.expect("validated"),
                &mut rng,
            ),
            LayerKind::Dropout => net.push_dropout(
                format!("layer{i}.dropout"),
                layer.keep_prob.expect("validated"),
            ),
            LayerKind::Batchnorm => net.push_batchnorm(format!("layer{i}.batchnorm")),
            LayerKind::Dense => {
                net.push_dense_softmax(
                    format!("layer{i}.dense"),
                    layer.width.expect("validated"),
                    &mut rng,
                );
            }
            LayerKind::Softmax => {} // fused into the dense head
        }
    }
    Ok(net)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
    pub seconds: f64,
}

/// Per-epoch training history. Losses are train-mode means over batches;
/// accuracy is an inference-mode argmax-match pass over the full window
/// set at the end of each epoch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    /// Tab-separated log: epoch, loss, accuracy, seconds.
    pub fn to_log(&self) -> String {
        let mut out = String::from("epoch\tloss\taccuracy\tseconds\n");
        for r in &self.records {
            out.push_str(&format!(
                "{}\t{:.6}\t{:.6}\t{:.3}\n",
                r.epoch, r.loss, r.accuracy, r.seconds
            ));
        }
        out
    }

    pub fn final_accuracy(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.accuracy)
    }

    pub fn best_accuracy(&self) -> f64 {
        self.records.iter().fold(0.0, |acc, r| acc.max(r.accuracy))
    }
}

/// Periodic checkpointing hook for the training loop.
pub struct CheckpointCadence {
    pub every_epochs: usize,
    pub path: std::path::PathBuf,
    pub meta: crate::checkpoint::CheckpointMeta,
}

pub struct TrainConfig {
    pub epochs: usize,
    /// Stop after this many epochs without train-loss improvement.
    pub patience: Option<usize>,
    /// Stop once inference accuracy reaches this level.
    pub target_accuracy: Option<f64>,
    /// Global gradient-norm clip.
    pub clip_norm: Option<f64>,
    pub optimizer: RmspropConfig,
    /// Seed for dropout masks.
    pub dropout_seed: u64,
    pub checkpoint: Option<CheckpointCadence>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            patience: Some(10),
            target_accuracy: None,
            clip_norm: Some(DEFAULT_CLIP_NORM),
            optimizer: RmspropConfig::default(),
            dropout_seed: 1,
            checkpoint: None,
        }
    }
}

/// Scales all gradients so their global L2 norm does not exceed `max`.
pub fn clip_global_norm<S: Scalar>(grads: &mut [Tensor<S>], max: f64) {
    let total: f64 = grads.iter().map(|g| g.norm_sq().as_f64()).sum();
    let norm = total.sqrt();
    if norm > max && norm > 0.0 {
        let scale = S::from_f64(max / norm);
        for g in grads {
            g.scale(scale);
        }
    }
}

/// Inference-mode accuracy: exact argmax-match fraction over all rows.
pub fn evaluate_accuracy<S: Scalar, P: BatchProvider<S>>(
    net: &Network<S>,
    data: &P,
    batch_size: usize,
) -> Result<f64, ModelError> {
    let rows = data.rows();
    if rows == 0 {
        return Err(ModelError::EmptyData);
    }
    let all: Vec<usize> = (0..rows).collect();
    let mut correct = 0usize;
    for chunk in all.chunks(batch_size.max(1)) {
        let (x, targets) = data.one_hot_batch(chunk);
        let probs = net.forward_infer(&x)?;
        let predicted = probs.argmax_rows();
        let wanted = targets.argmax_rows();
        correct += predicted
            .iter()
            .zip(&wanted)
            .filter(|(p, w)| p == w)
            .count();
    }
    Ok(correct as f64 / rows as f64)
}

/// Trains in place: per batch, forward (train mode) → cross-entropy →
/// backward → clip → RMSprop. Deterministic given the seeds in the
/// configs. Aborts with a diagnostic if the loss leaves the finite range.
/// Returns the history and the final optimizer state (for checkpoints).
pub fn train<S: Scalar, P: BatchProvider<S>>(
    net: &mut Network<S>,
    data: &P,
    window_cfg: &WindowConfig,
    cfg: &TrainConfig,
) -> Result<(TrainHistory, RmspropState<S>), ModelError> {
    if data.rows() == 0 {
        return Err(ModelError::EmptyData);
    }
    let params: Vec<&Tensor<S>> = net.trainable_params();
    let mut opt = RmspropState::new(cfg.optimizer, &params);
    drop(params);

    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.dropout_seed);
    let mut history = TrainHistory::default();
    let mut best_loss = f64::INFINITY;
    let mut stale_epochs = 0usize;

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        let mut loss_sum = 0.0f64;
        let mut row_count = 0usize;
        let mut batches = epoch_row_batches(data.rows(), window_cfg, (epoch - 1) as u64);
        // A trailing single-row batch cannot pass train-mode batch norm;
        // fold it into the previous batch.
        if batches.len() >= 2 && batches.last().is_some_and(|b| b.len() == 1) {
            let last = batches.pop().expect("checked non-empty");
            batches.last_mut().expect("checked len >= 2").extend(last);
        }
        for (bi, batch_rows) in batches.into_iter().enumerate() {
            let (x, targets) = data.one_hot_batch(&batch_rows);
            let (loss, _, caches) = net.forward_train(&x, &targets, Some(&mut dropout_rng))?;
            let loss = loss.as_f64();
            if !loss.is_finite() {
                return Err(ModelError::NonFiniteLoss { epoch, batch: bi });
            }
            let mut grads = net.backward(&caches)?;
            if let Some(max) = cfg.clip_norm {
                clip_global_norm(&mut grads, max);
            }
            let mut params = net.trainable_params_mut();
            rmsprop_step(&mut params, &grads, &mut opt)?;
            loss_sum += loss * batch_rows.len() as f64;
            row_count += batch_rows.len();
        }
        let epoch_loss = loss_sum / row_count as f64;
        let accuracy = evaluate_accuracy(net, data, window_cfg.batch_size)?;
        history.records.push(EpochRecord {
            epoch,
            loss: epoch_loss,
            accuracy,
            seconds: started.elapsed().as_secs_f64(),
        });

        if let Some(cadence) = &cfg.checkpoint {
            if cadence.every_epochs > 0 && epoch % cadence.every_epochs == 0 {
                let mut meta = cadence.meta.clone();
                meta.epoch = epoch as u64;
                crate::checkpoint::save_to_path(&cadence.path, net, &opt, &meta)?;
            }
        }

        if let Some(target) = cfg.target_accuracy {
            if accuracy >= target {
                break;
            }
        }
        if epoch_loss + 1e-12 < best_loss {
            best_loss = epoch_loss;
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
            if cfg.patience.is_some_and(|p| stale_epochs >= p) {
                break;
            }
        }
    }
    Ok((history, opt))
}
