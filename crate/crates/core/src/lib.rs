//! Single-track symbolic music toolkit.
//!
//! The pipeline runs in five stages, each its own module:
//!
//! 1. [`midi`] — parse and emit Standard MIDI Files, reducing tracks to a
//!    stream of quantized [`midi::NoteEvent`]s.
//! 2. [`tokenizer`] — encode events as parallel note-token and
//!    duration-token sequences and build the two vocabularies.
//! 3. [`dataset`] — slice tokenized songs into fixed-width training
//!    windows with song-boundary flags, and stream one-hot batches.
//! 4. [`nn`] / [`models`] — a from-scratch recurrent network engine
//!    (LSTM, bidirectional LSTM, dropout, batch norm, softmax head,
//!    RMSprop) wired into the two stock architectures, trained with
//!    backpropagation through time and verified by finite differences.
//! 5. [`generate`] — greedy argmax decoding of new pieces back to MIDI.
//!
//! [`survey`] stands apart: it aggregates listening-survey responses into
//! score and rate tables.
//!
//! All engine math is generic over the scalar type via [`scalar::Scalar`];
//! training and gradient verification run in `f64`, checkpoints store
//! `f32`. Musical time is exact: onsets and durations are rational
//! quarter-lengths ([`Ql`]), never floats.

pub mod checkpoint;
pub mod dataset;
pub mod generate;
pub mod midi;
pub mod models;
pub mod nn;
pub mod rational;
pub mod scalar;
pub mod survey;
pub mod tensor;
pub mod tokenizer;

/// Musical time in quarter-length units, kept exact.
pub type Ql = num_rational::Rational64;

/// Checkpoint-precision tensor.
pub type Tensor32 = tensor::Tensor<f32>;
/// Training/verification-precision tensor.
pub type Tensor64 = tensor::Tensor<f64>;
