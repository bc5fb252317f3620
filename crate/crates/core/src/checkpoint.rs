//! Binary checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic "CHORCKPT" | version u32 | spec_digest [32] | note_dict_digest [32]
//! | dur_dict_digest [32] | epoch u64 | rng_seed u64
//! | meta_len u32 | meta JSON (model spec + optimizer config)
//! | tensor_count u32
//! | per tensor: name_len u16, name, ndim u8, dims u32…, dtype u8 (0 = f32)
//! | payloads: row-major little-endian f32 in manifest order
//! ```
//!
//! Serialization is canonical: loading a checkpoint and saving it again
//! reproduces identical bytes. Weights are stored at f32 regardless of the
//! training precision.

use crate::models::ModelSpec;
use crate::nn::rmsprop::RmspropConfig;
use crate::nn::{Network, NnError, RmspropState};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::tokenizer::TokenDicts;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::path::Path;
use thiserror::Error;

pub const MAGIC: &[u8; 8] = b"CHORCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("checkpoint format version {found} is not supported (expected {FORMAT_VERSION})")]
    VersionMismatch { found: u32 },
    #[error("checkpoint dictionary digest does not match the supplied dictionaries")]
    DictDigestMismatch,
    #[error("embedded spec digest does not match the spec payload")]
    SpecDigestMismatch,
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("checkpoint is missing tensor {0:?}")]
    MissingTensor(String),
    #[error("tensor {name:?} has shape {found:?}, expected {expected:?}")]
    TensorShape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MetaJson {
    model_spec: ModelSpec,
    optimizer: RmspropConfig,
}

#[derive(Debug, Clone)]
pub struct CheckpointMeta {
    pub spec: ModelSpec,
    pub optimizer: RmspropConfig,
    pub note_dict_digest: [u8; 32],
    pub dur_dict_digest: [u8; 32],
    pub epoch: u64,
    pub rng_seed: u64,
}

impl CheckpointMeta {
    pub fn new(spec: ModelSpec, optimizer: RmspropConfig, dicts: &TokenDicts, seed: u64) -> Self {
        CheckpointMeta {
            spec,
            optimizer,
            note_dict_digest: dicts.note_digest(),
            dur_dict_digest: dicts.dur_digest(),
            epoch: 0,
            rng_seed: seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub tensors: Vec<(String, Tensor<f32>)>,
}

const OPT_PREFIX: &str = "opt.";
const OPT_SUFFIX: &str = ".acc";

/// Serializes a network (plus optimizer accumulators) at f32 precision.
pub fn save_bytes<S: Scalar>(
    net: &Network<S>,
    opt: Option<&RmspropState<S>>,
    meta: &CheckpointMeta,
) -> Vec<u8> {
    let mut tensors: Vec<(String, Tensor<f32>)> = net
        .state_tensors()
        .into_iter()
        .map(|(name, t)| (name, t.cast::<f32>()))
        .collect();
    if let Some(opt) = opt {
        for (name, acc) in net.param_names().iter().zip(&opt.accumulators) {
            tensors.push((format!("{OPT_PREFIX}{name}{OPT_SUFFIX}"), acc.cast::<f32>()));
        }
    }
    encode(meta, &tensors)
}

fn encode(meta: &CheckpointMeta, tensors: &[(String, Tensor<f32>)]) -> Vec<u8> {
    let meta_json = serde_json::to_vec(&MetaJson {
        model_spec: meta.spec.clone(),
        optimizer: meta.optimizer,
    })
    .expect("meta serialization cannot fail");
    let spec_digest: [u8; 32] = Sha256::digest(&meta_json).into();

    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&spec_digest);
    out.extend_from_slice(&meta.note_dict_digest);
    out.extend_from_slice(&meta.dur_dict_digest);
    out.extend_from_slice(&meta.epoch.to_le_bytes());
    out.extend_from_slice(&meta.rng_seed.to_le_bytes());
    out.extend_from_slice(&(meta_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&meta_json);
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, tensor) in tensors {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(tensor.rank() as u8);
        for &d in tensor.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.push(0); // dtype f32
    }
    for (_, tensor) in tensors {
        for &v in tensor.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn save_to_path<S: Scalar>(
    path: &Path,
    net: &Network<S>,
    opt: &RmspropState<S>,
    meta: &CheckpointMeta,
) -> Result<(), CheckpointError> {
    std::fs::write(path, save_bytes(net, Some(opt), meta))?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| CheckpointError::Corrupt(format!("truncated at byte {}", self.pos)))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u16(&mut self) -> Result<u16, CheckpointError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn digest(&mut self) -> Result<[u8; 32], CheckpointError> {
        Ok(self.take(32)?.try_into().unwrap())
    }
}

impl Checkpoint {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8).map_err(|_| CheckpointError::BadMagic)? != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(CheckpointError::VersionMismatch { found: version });
        }
        let spec_digest = r.digest()?;
        let note_dict_digest = r.digest()?;
        let dur_dict_digest = r.digest()?;
        let epoch = r.u64()?;
        let rng_seed = r.u64()?;
        let meta_len = r.u32()? as usize;
        let meta_json = r.take(meta_len)?;
        let actual: [u8; 32] = Sha256::digest(meta_json).into();
        if actual != spec_digest {
            return Err(CheckpointError::SpecDigestMismatch);
        }
        let meta: MetaJson = serde_json::from_slice(meta_json)?;

        let count = r.u32()? as usize;
        let mut manifest = Vec::with_capacity(count);
        for _ in 0..count {
            let name_len = r.u16()? as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec())
                .map_err(|_| CheckpointError::Corrupt("tensor name is not UTF-8".into()))?;
            let ndim = r.take(1)?[0] as usize;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                shape.push(r.u32()? as usize);
            }
            let dtype = r.take(1)?[0];
            if dtype != 0 {
                return Err(CheckpointError::Corrupt(format!(
                    "unknown dtype {dtype} for tensor {name:?}"
                )));
            }
            manifest.push((name, shape));
        }
        let mut tensors = Vec::with_capacity(count);
        for (name, shape) in manifest {
            let numel: usize = shape.iter().product();
            let raw = r.take(numel * 4)?;
            let data: Vec<f32> = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let tensor = Tensor::from_vec(&shape, data)
                .map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
            tensors.push((name, tensor));
        }
        if r.pos != bytes.len() {
            return Err(CheckpointError::Corrupt(format!(
                "{} trailing bytes",
                bytes.len() - r.pos
            )));
        }
        Ok(Checkpoint {
            meta: CheckpointMeta {
                spec: meta.model_spec,
                optimizer: meta.optimizer,
                note_dict_digest,
                dur_dict_digest,
                epoch,
                rng_seed,
            },
            tensors,
        })
    }

    pub fn from_path(path: &Path) -> Result<Self, CheckpointError> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Re-encodes; bitwise inverse of [`Self::from_bytes`].
    pub fn to_bytes(&self) -> Vec<u8> {
        encode(&self.meta, &self.tensors)
    }

    /// Refuses dictionaries whose digests differ from the ones the model
    /// was trained against.
    pub fn verify_dicts(&self, dicts: &TokenDicts) -> Result<(), CheckpointError> {
        if self.meta.note_dict_digest != dicts.note_digest()
            || self.meta.dur_dict_digest != dicts.dur_digest()
        {
            return Err(CheckpointError::DictDigestMismatch);
        }
        Ok(())
    }

    /// Rebuilds the network (and optimizer state) at scalar type `S`.
    pub fn restore<S: Scalar>(&self) -> Result<(Network<S>, RmspropState<S>), CheckpointError> {
        let mut net: Network<S> = crate::models::init_network(&self.meta.spec, self.meta.rng_seed)?;
        let stored: HashMap<&str, &Tensor<f32>> = self
            .tensors
            .iter()
            .map(|(n, t)| (n.as_str(), t))
            .collect();
        for (name, slot) in net.state_tensors_mut() {
            let source = stored
                .get(name.as_str())
                .ok_or_else(|| CheckpointError::MissingTensor(name.clone()))?;
            if source.shape() != slot.shape() {
                return Err(CheckpointError::TensorShape {
                    name: name.clone(),
                    expected: slot.shape().to_vec(),
                    found: source.shape().to_vec(),
                });
            }
            *slot = source.cast();
        }
        let mut opt = RmspropState::new(self.meta.optimizer, &net.trainable_params());
        for (i, name) in net.param_names().iter().enumerate() {
            let key = format!("{OPT_PREFIX}{name}{OPT_SUFFIX}");
            if let Some(acc) = stored.get(key.as_str()) {
                if acc.shape() != opt.accumulators[i].shape() {
                    return Err(CheckpointError::TensorShape {
                        name: key,
                        expected: opt.accumulators[i].shape().to_vec(),
                        found: acc.shape().to_vec(),
                    });
                }
                opt.accumulators[i] = acc.cast();
            }
        }
        Ok((net, opt))
    }
}
