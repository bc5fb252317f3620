//! Greedy piece generation.
//!
//! Notes first: a random seed window is decoded token by token with pure
//! argmax (ties to the lowest index), sliding the window by one each step.
//! The first `sequence_length` predictions after the seed are warm-up and
//! are discarded; together with the seed window itself this accounts for
//! the 2n deduction in the decoded-token budget (Length − 2n). An emitted
//! end flag starts a new movement: the context is reseeded and decoding
//! continues, so the output length contract holds exactly.
//!
//! Durations are decoded afterwards, conditioned on the note stream with a
//! quarter-note bootstrap context. Assembly strips the flags, splits the
//! piece into movements separated by a four-quarter gap, and renders MIDI.

use crate::midi::{build_midi_from_events, write_smf, MidiError, NoteEvent, DEFAULT_DIVISION};
use crate::nn::{Network, NnError};
use crate::tensor::Tensor;
use crate::tokenizer::{detokenize, DurationToken, NoteToken, TokenDicts, TokenError};
use crate::Ql;
use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Gap between movements on the output timeline, in quarter-lengths.
pub const MOVEMENT_GAP_QL: i64 = 4;

#[derive(Debug, Error)]
pub enum GenError {
    #[error("token budget {length} must exceed twice the sequence length {sequence_length}")]
    BudgetTooSmall {
        length: usize,
        sequence_length: usize,
    },
    #[error("model output width {got} does not match vocabulary size {expected}")]
    VocabMismatch { expected: usize, got: usize },
    #[error("note stream of {got} tokens is shorter than the context window {need}")]
    StreamTooShort { need: usize, got: usize },
    #[error("parallel streams differ: {notes} notes vs {durs} durations")]
    ParallelMismatch { notes: usize, durs: usize },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Token(#[from] TokenError),
    #[error(transparent)]
    Midi(#[from] MidiError),
}

#[derive(Debug, Clone)]
pub struct GenerationConfig {
    /// Total token budget; the decoded stream is Length − 2·n tokens.
    pub length: usize,
    /// Context width n; must match the trained models.
    pub sequence_length: usize,
    pub seed: u64,
    pub tempo_bpm: f64,
}

impl GenerationConfig {
    pub fn predict_length(&self) -> Result<usize, GenError> {
        let need = 2 * self.sequence_length;
        if self.length <= need {
            return Err(GenError::BudgetTooSmall {
                length: self.length,
                sequence_length: self.sequence_length,
            });
        }
        Ok(self.length - need)
    }
}

/// Random context of n note indices, uniform over [0, vocab−1): the end
/// flag is never seeded.
pub fn seed_window(note_vocab: usize, n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    (0..n).map(|_| rng.gen_range(0..note_vocab - 1)).collect()
}

fn one_hot_window<I>(indices: I, n: usize, width: usize) -> Tensor<f64>
where
    I: IntoIterator<Item = Vec<usize>>,
{
    let mut x = Tensor::zeros(&[1, n, width]);
    for (t, hot) in indices.into_iter().enumerate() {
        for idx in hot {
            x.data_mut()[t * width + idx] = 1.0;
        }
    }
    x
}

fn predict_note(
    net: &Network<f64>,
    window: &[usize],
    vocab: usize,
) -> Result<usize, GenError> {
    let x = one_hot_window(window.iter().map(|&i| vec![i]), window.len(), vocab);
    let probs = net.forward_infer(&x)?;
    Ok(probs.argmax_rows()[0])
}

/// Greedy continuation of a fixed window: no reseeding, the emitted token
/// (end flag included) always slides into the context.
pub fn continue_greedy(
    net: &Network<f64>,
    window: &[usize],
    steps: usize,
    note_vocab: usize,
) -> Result<Vec<usize>, GenError> {
    let mut window = window.to_vec();
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let next = predict_note(net, &window, note_vocab)?;
        out.push(next);
        window.remove(0);
        window.push(next);
    }
    Ok(out)
}

/// Decodes exactly `predict_length` note indices (end flags included in
/// the count — each one reseeds the context for the next movement).
pub fn generate_notes(
    net: &Network<f64>,
    dicts: &TokenDicts,
    cfg: &GenerationConfig,
) -> Result<Vec<usize>, GenError> {
    let vocab = dicts.note_vocab();
    if net.output_width() != vocab {
        return Err(GenError::VocabMismatch {
            expected: vocab,
            got: net.output_width(),
        });
    }
    let n = cfg.sequence_length;
    let budget = cfg.predict_length()?;
    let flag = dicts.end_flag_index();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut window = seed_window(vocab, n, &mut rng);
    let advance = |window: &mut Vec<usize>, next: usize, rng: &mut ChaCha8Rng| {
        if next == flag {
            *window = seed_window(vocab, n, rng);
        } else {
            window.remove(0);
            window.push(next);
        }
    };

    // Warm-up: one window's worth of predictions is discarded.
    for _ in 0..n {
        let next = predict_note(net, &window, vocab)?;
        advance(&mut window, next, &mut rng);
    }
    let mut out = Vec::with_capacity(budget);
    while out.len() < budget {
        let next = predict_note(net, &window, vocab)?;
        out.push(next);
        advance(&mut window, next, &mut rng);
    }
    Ok(out)
}

/// Decodes one duration index per note. The first n positions are
/// bootstrapped to quarter notes; each later position is the argmax over
/// the (note ⧺ duration) one-hot window that precedes it.
pub fn generate_durations(
    net: &Network<f64>,
    notes: &[usize],
    dicts: &TokenDicts,
    sequence_length: usize,
) -> Result<Vec<usize>, GenError> {
    let n = sequence_length;
    if notes.len() < n {
        return Err(GenError::StreamTooShort {
            need: n,
            got: notes.len(),
        });
    }
    if net.output_width() != 3 {
        return Err(GenError::VocabMismatch {
            expected: 3,
            got: net.output_width(),
        });
    }
    let v = dicts.note_vocab();
    let quarter = DurationToken::Quarter.index();
    let mut durs: Vec<usize> = vec![quarter; n.min(notes.len())];
    for t in n..notes.len() {
        let window = (t - n..t).map(|s| vec![notes[s], v + durs[s]]);
        let x = one_hot_window(window, n, v + 3);
        let probs = net.forward_infer(&x)?;
        durs.push(probs.argmax_rows()[0]);
    }
    Ok(durs)
}

/// Identifies this output's inputs so any piece can be regenerated.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Provenance {
    pub notes_checkpoint_sha256: String,
    pub durations_checkpoint_sha256: String,
    pub dicts_sha256: String,
}

/// Flag-free token streams plus provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedPiece {
    pub note_tokens: Vec<NoteToken>,
    pub duration_tokens: Vec<DurationToken>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PieceReport {
    pub tokens_emitted: usize,
    pub tokens_kept: usize,
    pub boundary_positions: Vec<usize>,
    pub movements: usize,
    /// Counts per duration entry, dictionary order.
    pub duration_histogram: [usize; 3],
    pub length: usize,
    pub sequence_length: usize,
    pub seed: u64,
    pub tempo_bpm: f64,
    pub provenance: Provenance,
}

impl PieceReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str("generated piece report\n");
        out.push_str(&format!("tokens_emitted: {}\n", self.tokens_emitted));
        out.push_str(&format!("tokens_kept: {}\n", self.tokens_kept));
        out.push_str(&format!("movements: {}\n", self.movements));
        out.push_str(&format!(
            "boundary_positions: {:?}\n",
            self.boundary_positions
        ));
        out.push_str(&format!(
            "duration_histogram: eighth={} quarter={} half={}\n",
            self.duration_histogram[0], self.duration_histogram[1], self.duration_histogram[2]
        ));
        out.push_str(&format!("length: {}\n", self.length));
        out.push_str(&format!("sequence_length: {}\n", self.sequence_length));
        out.push_str(&format!("seed: {}\n", self.seed));
        out.push_str(&format!("tempo_bpm: {}\n", self.tempo_bpm));
        out.push_str(&format!(
            "notes_checkpoint_sha256: {}\n",
            self.provenance.notes_checkpoint_sha256
        ));
        out.push_str(&format!(
            "durations_checkpoint_sha256: {}\n",
            self.provenance.durations_checkpoint_sha256
        ));
        out.push_str(&format!("dicts_sha256: {}\n", self.provenance.dicts_sha256));
        out
    }
}

pub struct AssembledPiece {
    pub midi_bytes: Vec<u8>,
    pub report: PieceReport,
    pub piece: GeneratedPiece,
    /// The full event timeline that was rendered, movements already placed.
    pub events: Vec<NoteEvent>,
}

/// Strips end flags, splits at them into movements, detokenizes each on a
/// sequential timeline with a fixed gap between movements, and renders a
/// single-track MIDI file.
pub fn assemble_piece(
    notes: &[usize],
    durations: &[usize],
    dicts: &TokenDicts,
    cfg: &GenerationConfig,
    provenance: Provenance,
) -> Result<AssembledPiece, GenError> {
    if notes.len() != durations.len() {
        return Err(GenError::ParallelMismatch {
            notes: notes.len(),
            durs: durations.len(),
        });
    }
    let flag = dicts.end_flag_index();
    let mut boundary_positions = Vec::new();
    let mut movements: Vec<(Vec<NoteToken>, Vec<DurationToken>)> = Vec::new();
    let mut current: (Vec<NoteToken>, Vec<DurationToken>) = (Vec::new(), Vec::new());
    let mut histogram = [0usize; 3];

    for (pos, (&note, &dur)) in notes.iter().zip(durations).enumerate() {
        if note == flag {
            boundary_positions.push(pos);
            if !current.0.is_empty() {
                movements.push(std::mem::take(&mut current));
            }
            continue;
        }
        let token = dicts.index_to_note(note)?.clone();
        let duration = dicts.index_to_dur(dur)?;
        histogram[duration.index()] += 1;
        current.0.push(token);
        current.1.push(duration);
    }
    if !current.0.is_empty() {
        movements.push(current);
    }

    let mut timeline: Vec<NoteEvent> = Vec::new();
    let mut offset: Ql = Rational64::from_integer(0);
    for (movement_notes, movement_durs) in &movements {
        let events = detokenize(movement_notes, movement_durs, dicts)?;
        let end = events
            .last()
            .map(|e| e.end_ql())
            .unwrap_or_else(|| Rational64::from_integer(0));
        timeline.extend(events.iter().map(|e| e.shifted(offset)));
        offset = offset + end + Rational64::from_integer(MOVEMENT_GAP_QL);
    }

    let song = build_midi_from_events(&timeline, DEFAULT_DIVISION, cfg.tempo_bpm)?;
    let midi_bytes = write_smf(&song)?;

    let piece = GeneratedPiece {
        note_tokens: movements.iter().flat_map(|(n, _)| n.clone()).collect(),
        duration_tokens: movements.iter().flat_map(|(_, d)| d.clone()).collect(),
        provenance: provenance.clone(),
    };
    let report = PieceReport {
        tokens_emitted: notes.len(),
        tokens_kept: piece.note_tokens.len(),
        boundary_positions,
        movements: movements.len(),
        duration_histogram: histogram,
        length: cfg.length,
        sequence_length: cfg.sequence_length,
        seed: cfg.seed,
        tempo_bpm: cfg.tempo_bpm,
        provenance,
    };
    Ok(AssembledPiece {
        midi_bytes,
        report,
        piece,
        events: timeline,
    })
}
