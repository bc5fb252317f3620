//! Standard MIDI File I/O and reduction to quantized note events.
//!
//! The parser and writer speak the chunked SMF wire format (big-endian
//! lengths, `MThd`/`MTrk` tags, variable-length-quantity delta times,
//! running status on read). [`extract_note_events`] collapses a song to a
//! single onset-ordered stream of [`NoteEvent`]s, merging simultaneous
//! note-ons into chords; [`build_midi_from_events`] is its inverse on the
//! tick grid.

mod parse;
mod vlq;
mod write;

pub use parse::parse_smf;
pub use vlq::{decode_vlq, encode_vlq, MAX_VLQ};
pub use write::write_smf;

use crate::Ql;
use num_rational::Rational64;
use num_traits::Zero;
use std::collections::BTreeMap;
use thiserror::Error;

pub const DEFAULT_DIVISION: u16 = 480;
pub const DEFAULT_TEMPO_BPM: f64 = 120.0;
const DEFAULT_VELOCITY: u8 = 64;

#[derive(Debug, Error)]
pub enum MidiError {
    #[error("malformed SMF at byte {offset}: {detail}")]
    Parse { offset: usize, detail: String },
    #[error("SMPTE time division is not supported")]
    SmpteDivision,
    #[error("delta time {delta} exceeds the variable-length encoding range")]
    VlqOverflow { delta: u64 },
    #[error("note event has negative onset")]
    NegativeOnset,
    #[error("note events must be sorted by onset")]
    UnsortedEvents,
    #[error("tempo must be positive, got {0}")]
    BadTempo(f64),
    #[error("invalid note event: {0}")]
    InvalidNote(String),
}

fn parse_err(offset: usize, detail: impl Into<String>) -> MidiError {
    MidiError::Parse {
        offset,
        detail: detail.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MidiEventKind {
    NoteOn { channel: u8, pitch: u8, velocity: u8 },
    NoteOff { channel: u8, pitch: u8, velocity: u8 },
    Tempo { micros_per_quarter: u32 },
    /// Anything we do not interpret: other channel messages, meta events,
    /// sysex. `status` is the leading status byte; `data` is the payload
    /// (for meta events the first payload byte is the meta type).
    Other { status: u8, data: Vec<u8> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MidiEvent {
    /// Absolute time in ticks from the start of the track.
    pub tick: u64,
    pub kind: MidiEventKind,
}

/// A parsed MIDI file: a time division plus per-track event lists with
/// absolute tick times, sorted by tick (stable on ties).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MidiSong {
    pub ticks_per_quarter: u16,
    pub tracks: Vec<Vec<MidiEvent>>,
}

impl MidiSong {
    pub fn note_count(&self) -> usize {
        self.tracks
            .iter()
            .flatten()
            .filter(|e| {
                matches!(
                    e.kind,
                    MidiEventKind::NoteOn { velocity, .. } if velocity > 0
                )
            })
            .count()
    }
}

/// A quantized musical event: one note or chord with exact rational onset
/// and duration in quarter-length units.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoteEvent {
    pitches: Vec<u8>,
    onset_ql: Ql,
    dur_ql: Ql,
}

impl NoteEvent {
    pub fn new(mut pitches: Vec<u8>, onset_ql: Ql, dur_ql: Ql) -> Result<Self, MidiError> {
        if pitches.is_empty() {
            return Err(MidiError::InvalidNote("empty pitch set".into()));
        }
        pitches.sort_unstable();
        pitches.dedup();
        if pitches.iter().any(|&p| p > 127) {
            return Err(MidiError::InvalidNote("pitch above 127".into()));
        }
        if onset_ql < Ql::zero() {
            return Err(MidiError::NegativeOnset);
        }
        if dur_ql <= Ql::zero() {
            return Err(MidiError::InvalidNote("non-positive duration".into()));
        }
        Ok(NoteEvent {
            pitches,
            onset_ql,
            dur_ql,
        })
    }

    pub fn pitches(&self) -> &[u8] {
        &self.pitches
    }

    pub fn onset_ql(&self) -> Ql {
        self.onset_ql
    }

    pub fn dur_ql(&self) -> Ql {
        self.dur_ql
    }

    pub fn end_ql(&self) -> Ql {
        self.onset_ql + self.dur_ql
    }

    /// Shifts the onset by `offset` quarter-lengths.
    pub fn shifted(&self, offset: Ql) -> NoteEvent {
        NoteEvent {
            pitches: self.pitches.clone(),
            onset_ql: self.onset_ql + offset,
            dur_ql: self.dur_ql,
        }
    }
}

/// Result of [`extract_note_events`]: the merged event stream plus counts
/// of everything that had to be discarded to satisfy the invariants.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExtractStats {
    /// Note-ons that never saw a matching note-off.
    pub dangling_note_ons: usize,
    /// Matched pairs with zero tick duration.
    pub zero_duration_notes: usize,
}

/// Reduces a song to one onset-ordered stream of note events.
///
/// All tracks are merged. Note-ons sharing an exact onset tick become a
/// single chord whose duration is the minimum member duration. Dangling
/// note-ons and zero-length notes are dropped and counted in the stats.
pub fn extract_note_events(song: &MidiSong) -> (Vec<NoteEvent>, ExtractStats) {
    let division = song.ticks_per_quarter.max(1) as i64;
    let mut stats = ExtractStats::default();

    // (on_tick, off_tick, pitch), FIFO-matched per (channel, pitch).
    let mut spans: Vec<(u64, u64, u8)> = Vec::new();
    for track in &song.tracks {
        let mut open: BTreeMap<(u8, u8), Vec<(u64, u8)>> = BTreeMap::new();
        // Within a tick, process note-offs before note-ons so back-to-back
        // notes on the same pitch pair up correctly.
        let mut ordered: Vec<&MidiEvent> = track.iter().collect();
        ordered.sort_by_key(|e| {
            let off_first = match e.kind {
                MidiEventKind::NoteOff { .. } => 0,
                MidiEventKind::NoteOn { velocity: 0, .. } => 0,
                _ => 1,
            };
            (e.tick, off_first)
        });
        for event in ordered {
            match event.kind {
                MidiEventKind::NoteOn {
                    channel,
                    pitch,
                    velocity,
                } if velocity > 0 => {
                    open.entry((channel, pitch))
                        .or_default()
                        .push((event.tick, pitch));
                }
                MidiEventKind::NoteOff { channel, pitch, .. }
                | MidiEventKind::NoteOn {
                    channel,
                    pitch,
                    velocity: 0,
                } => {
                    let queue = open.entry((channel, pitch)).or_default();
                    if queue.is_empty() {
                        continue; // stray note-off
                    }
                    let (on_tick, p) = queue.remove(0);
                    if event.tick == on_tick {
                        stats.zero_duration_notes += 1;
                    } else {
                        spans.push((on_tick, event.tick, p));
                    }
                }
                _ => {}
            }
        }
        stats.dangling_note_ons += open.values().map(Vec::len).sum::<usize>();
    }

    // Group by exact onset tick; chord duration = minimum member duration.
    let mut by_onset: BTreeMap<u64, (Vec<u8>, u64)> = BTreeMap::new();
    for (on, off, pitch) in spans {
        let entry = by_onset.entry(on).or_insert_with(|| (Vec::new(), u64::MAX));
        entry.0.push(pitch);
        entry.1 = entry.1.min(off - on);
    }

    let events = by_onset
        .into_iter()
        .map(|(on, (pitches, dur_ticks))| {
            NoteEvent::new(
                pitches,
                Rational64::new(on as i64, division),
                Rational64::new(dur_ticks as i64, division),
            )
            .expect("grouped spans satisfy note invariants")
        })
        .collect();
    (events, stats)
}

/// Builds a single-track song from note events; inverse of
/// [`extract_note_events`] when onsets and durations sit on the tick grid.
pub fn build_midi_from_events(
    events: &[NoteEvent],
    ticks_per_quarter: u16,
    tempo_bpm: f64,
) -> Result<MidiSong, MidiError> {
    if ticks_per_quarter == 0 {
        return Err(MidiError::InvalidNote("division must be >= 1".into()));
    }
    if !(tempo_bpm.is_finite() && tempo_bpm > 0.0) {
        return Err(MidiError::BadTempo(tempo_bpm));
    }
    for pair in events.windows(2) {
        if pair[1].onset_ql < pair[0].onset_ql {
            return Err(MidiError::UnsortedEvents);
        }
    }

    let division = Rational64::from_integer(ticks_per_quarter as i64);
    let to_tick = |ql: Ql| -> Result<u64, MidiError> {
        let ticks = (ql * division).round();
        let t = ticks.to_integer();
        if t < 0 {
            return Err(MidiError::NegativeOnset);
        }
        Ok(t as u64)
    };

    let mut track = Vec::new();
    track.push(MidiEvent {
        tick: 0,
        kind: MidiEventKind::Tempo {
            micros_per_quarter: (60_000_000.0 / tempo_bpm).round() as u32,
        },
    });
    for event in events {
        let on = to_tick(event.onset_ql())?;
        let off = to_tick(event.end_ql())?.max(on + 1);
        for &pitch in event.pitches() {
            track.push(MidiEvent {
                tick: on,
                kind: MidiEventKind::NoteOn {
                    channel: 0,
                    pitch,
                    velocity: DEFAULT_VELOCITY,
                },
            });
            track.push(MidiEvent {
                tick: off,
                kind: MidiEventKind::NoteOff {
                    channel: 0,
                    pitch,
                    velocity: 0,
                },
            });
        }
    }
    // Stable sort keeps same-tick note-offs ahead of the note-ons emitted
    // for the next event only when ticks differ; enforce offs-first order.
    track.sort_by_key(|e| {
        let off_first = match e.kind {
            MidiEventKind::Tempo { .. } => 0,
            MidiEventKind::NoteOff { .. } => 1,
            _ => 2,
        };
        (e.tick, off_first)
    });

    Ok(MidiSong {
        ticks_per_quarter,
        tracks: vec![track],
    })
}
