//! Note/chord and duration tokenization.
//!
//! A note token is either a single MIDI pitch rendered in decimal ("60"),
//! a chord as dot-joined ascending pitches ("60.64.67"), or the end flag
//! "&" that marks a song boundary. Durations collapse onto a fixed
//! three-entry vocabulary (eighth, quarter, half) by nearest quarter-length
//! with ties broken toward the shorter value.

use crate::midi::NoteEvent;
use crate::rational::format_fixed;
use crate::Ql;
use num_rational::Rational64;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use thiserror::Error;

pub const END_FLAG: &str = "&";
pub const DICT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TokenError {
    #[error("invalid note token {0:?}")]
    InvalidToken(String),
    #[error("token {0:?} is not in the dictionary")]
    UnknownToken(String),
    #[error("unexpected end flag in a detokenization stream")]
    EndFlagInStream,
    #[error("duration must be positive, got {0}")]
    NonPositiveDuration(Ql),
    #[error("unknown duration name {0:?}")]
    UnknownDuration(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("corpus line {line}: {detail}")]
    CorpusFormat { line: usize, detail: String },
    #[error("dictionary file: {0}")]
    DictFormat(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// A validated note token.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NoteToken(String);

impl NoteToken {
    pub fn end_flag() -> Self {
        NoteToken(END_FLAG.to_string())
    }

    pub fn from_pitches(pitches: &[u8]) -> Result<Self, TokenError> {
        if pitches.is_empty() {
            return Err(TokenError::InvalidToken(String::new()));
        }
        let mut text = String::new();
        for (i, &p) in pitches.iter().enumerate() {
            if p > 127 || (i > 0 && pitches[i - 1] >= p) {
                return Err(TokenError::InvalidToken(format!("{pitches:?}")));
            }
            if i > 0 {
                text.push('.');
            }
            text.push_str(&p.to_string());
        }
        Ok(NoteToken(text))
    }

    /// Parses and validates the token grammar:
    /// `INT ("." INT)*` strictly ascending in 0..=127, or exactly "&".
    pub fn parse(text: &str) -> Result<Self, TokenError> {
        if text == END_FLAG {
            return Ok(NoteToken::end_flag());
        }
        let bad = || TokenError::InvalidToken(text.to_string());
        let mut prev: Option<u8> = None;
        let mut any = false;
        for part in text.split('.') {
            if part.is_empty() || (part.len() > 1 && part.starts_with('0')) {
                return Err(bad());
            }
            if !part.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            let value: u8 = part.parse().map_err(|_| bad())?;
            if value > 127 || prev.is_some_and(|p| p >= value) {
                return Err(bad());
            }
            prev = Some(value);
            any = true;
        }
        if !any {
            return Err(bad());
        }
        Ok(NoteToken(text.to_string()))
    }

    pub fn is_end_flag(&self) -> bool {
        self.0 == END_FLAG
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The pitch set, or `None` for the end flag.
    pub fn pitches(&self) -> Option<Vec<u8>> {
        if self.is_end_flag() {
            return None;
        }
        Some(self.0.split('.').map(|p| p.parse().unwrap()).collect())
    }
}

impl fmt::Display for NoteToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// The fixed three-entry duration vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DurationToken {
    Eighth,
    Quarter,
    Half,
}

impl DurationToken {
    pub const ALL: [DurationToken; 3] = [
        DurationToken::Eighth,
        DurationToken::Quarter,
        DurationToken::Half,
    ];

    pub fn quarter_length(self) -> Ql {
        match self {
            DurationToken::Eighth => Rational64::new(1, 2),
            DurationToken::Quarter => Rational64::from_integer(1),
            DurationToken::Half => Rational64::from_integer(2),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DurationToken::Eighth => "eighth",
            DurationToken::Quarter => "quarter",
            DurationToken::Half => "half",
        }
    }

    pub fn from_name(name: &str) -> Result<Self, TokenError> {
        Self::ALL
            .into_iter()
            .find(|d| d.name() == name)
            .ok_or_else(|| TokenError::UnknownDuration(name.to_string()))
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }
}

impl fmt::Display for DurationToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Maps a positive duration to the nearest vocabulary entry; exact ties go
/// to the shorter duration.
pub fn quantize_duration(dur_ql: Ql) -> Result<DurationToken, TokenError> {
    if dur_ql <= Ql::zero() {
        return Err(TokenError::NonPositiveDuration(dur_ql));
    }
    let mut best = DurationToken::Eighth;
    let mut best_gap = (dur_ql - best.quarter_length()).abs();
    for cand in [DurationToken::Quarter, DurationToken::Half] {
        let gap = (dur_ql - cand.quarter_length()).abs();
        // Strict inequality keeps ties on the shorter entry.
        if gap < best_gap {
            best = cand;
            best_gap = gap;
        }
    }
    Ok(best)
}

/// One song as parallel token streams of equal length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedSong {
    pub notes: Vec<NoteToken>,
    pub durations: Vec<DurationToken>,
}

/// Converts a sorted event stream to parallel note/duration tokens.
/// No end flag is appended here; the dataset layer does that.
pub fn tokenize_song(events: &[NoteEvent]) -> (Vec<NoteToken>, Vec<DurationToken>) {
    let mut notes = Vec::with_capacity(events.len());
    let mut durations = Vec::with_capacity(events.len());
    for event in events {
        notes.push(NoteToken::from_pitches(event.pitches()).expect("NoteEvent pitches are valid"));
        durations
            .push(quantize_duration(event.dur_ql()).expect("NoteEvent durations are positive"));
    }
    (notes, durations)
}

/// Note and duration vocabularies with dense contiguous indices.
/// The end flag is always the last note index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenDicts {
    notes: Vec<NoteToken>,
    note_index: HashMap<NoteToken, usize>,
}

impl TokenDicts {
    /// Builds the dictionaries from a tokenized corpus: distinct note
    /// tokens sorted lexicographically, then "&" appended last. The
    /// duration vocabulary is fixed.
    pub fn build(corpus: &[TokenizedSong]) -> Result<Self, TokenError> {
        if corpus.is_empty() {
            return Err(TokenError::EmptyCorpus);
        }
        let distinct: BTreeSet<&NoteToken> = corpus
            .iter()
            .flat_map(|song| song.notes.iter())
            .filter(|t| !t.is_end_flag())
            .collect();
        let mut notes: Vec<NoteToken> = distinct.into_iter().cloned().collect();
        notes.push(NoteToken::end_flag());
        Ok(Self::from_note_list(notes))
    }

    fn from_note_list(notes: Vec<NoteToken>) -> Self {
        let note_index = notes
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        TokenDicts { notes, note_index }
    }

    /// Note vocabulary size, end flag included.
    pub fn note_vocab(&self) -> usize {
        self.notes.len()
    }

    pub fn dur_vocab(&self) -> usize {
        DurationToken::ALL.len()
    }

    pub fn end_flag_index(&self) -> usize {
        self.notes.len() - 1
    }

    pub fn note_to_index(&self, token: &NoteToken) -> Result<usize, TokenError> {
        self.note_index
            .get(token)
            .copied()
            .ok_or_else(|| TokenError::UnknownToken(token.as_str().to_string()))
    }

    pub fn index_to_note(&self, index: usize) -> Result<&NoteToken, TokenError> {
        self.notes
            .get(index)
            .ok_or_else(|| TokenError::UnknownToken(format!("#{index}")))
    }

    pub fn dur_to_index(&self, token: DurationToken) -> usize {
        token.index()
    }

    pub fn index_to_dur(&self, index: usize) -> Result<DurationToken, TokenError> {
        DurationToken::from_index(index)
            .ok_or_else(|| TokenError::UnknownDuration(format!("#{index}")))
    }

    pub fn note_tokens(&self) -> &[NoteToken] {
        &self.notes
    }

    /// Serializes to the dictionary file format (versioned JSON).
    pub fn to_json(&self) -> String {
        let file = DictFile {
            version: DICT_FORMAT_VERSION,
            notes: self.notes.iter().map(|t| t.as_str().to_string()).collect(),
            durations: DurationToken::ALL
                .iter()
                .map(|d| d.name().to_string())
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("dict serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, TokenError> {
        let file: DictFile = serde_json::from_str(text)?;
        if file.version != DICT_FORMAT_VERSION {
            return Err(TokenError::DictFormat(format!(
                "unsupported format version {}",
                file.version
            )));
        }
        let expected: Vec<String> = DurationToken::ALL
            .iter()
            .map(|d| d.name().to_string())
            .collect();
        if file.durations != expected {
            return Err(TokenError::DictFormat(
                "duration vocabulary must be exactly [eighth, quarter, half]".into(),
            ));
        }
        if file.notes.is_empty() {
            return Err(TokenError::DictFormat("empty note vocabulary".into()));
        }
        let mut notes = Vec::with_capacity(file.notes.len());
        for (i, text) in file.notes.iter().enumerate() {
            let token = NoteToken::parse(text)?;
            if token.is_end_flag() && i != file.notes.len() - 1 {
                return Err(TokenError::DictFormat(
                    "end flag must be the last note entry".into(),
                ));
            }
            notes.push(token);
        }
        if !notes.last().is_some_and(|t| t.is_end_flag()) {
            return Err(TokenError::DictFormat(
                "note vocabulary must end with the end flag".into(),
            ));
        }
        let dicts = Self::from_note_list(notes);
        if dicts.note_index.len() != dicts.notes.len() {
            return Err(TokenError::DictFormat("duplicate note tokens".into()));
        }
        Ok(dicts)
    }

    /// Digest of the note vocabulary (order-sensitive).
    pub fn note_digest(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        for token in &self.notes {
            hasher.update(token.as_str().as_bytes());
            hasher.update([0u8]);
        }
        hasher.finalize().into()
    }

    /// Digest of the duration vocabulary.
    pub fn dur_digest(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        for d in DurationToken::ALL {
            hasher.update(d.name().as_bytes());
            hasher.update([0u8]);
        }
        hasher.finalize().into()
    }
}

#[derive(Serialize, Deserialize)]
struct DictFile {
    version: u32,
    notes: Vec<String>,
    durations: Vec<String>,
}

/// Rebuilds events from parallel token streams on a sequential timeline:
/// each event starts where the previous one ends, the first at zero.
/// End flags must already be stripped.
pub fn detokenize(
    notes: &[NoteToken],
    durations: &[DurationToken],
    dicts: &TokenDicts,
) -> Result<Vec<NoteEvent>, TokenError> {
    if notes.len() != durations.len() {
        return Err(TokenError::CorpusFormat {
            line: 0,
            detail: format!(
                "parallel streams differ in length: {} notes vs {} durations",
                notes.len(),
                durations.len()
            ),
        });
    }
    let mut events = Vec::with_capacity(notes.len());
    let mut onset = Ql::zero();
    for (token, duration) in notes.iter().zip(durations) {
        if token.is_end_flag() {
            return Err(TokenError::EndFlagInStream);
        }
        dicts.note_to_index(token)?;
        let pitches = token.pitches().expect("non-flag token has pitches");
        let dur = duration.quarter_length();
        events.push(
            NoteEvent::new(pitches, onset, dur)
                .map_err(|e| TokenError::InvalidToken(e.to_string()))?,
        );
        onset += dur;
    }
    Ok(events)
}

/// Writes the corpus file format: one song per line, events space-separated
/// as `noteToken|durName`.
pub fn write_corpus(songs: &[TokenizedSong]) -> String {
    let mut out = String::new();
    for song in songs {
        let line: Vec<String> = song
            .notes
            .iter()
            .zip(&song.durations)
            .map(|(n, d)| format!("{n}|{d}"))
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn read_corpus(text: &str) -> Result<Vec<TokenizedSong>, TokenError> {
    let mut songs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut notes = Vec::new();
        let mut durations = Vec::new();
        for field in line.split_whitespace() {
            let (note, dur) =
                field
                    .split_once('|')
                    .ok_or_else(|| TokenError::CorpusFormat {
                        line: lineno + 1,
                        detail: format!("event {field:?} is missing the '|' separator"),
                    })?;
            let token = NoteToken::parse(note)?;
            if token.is_end_flag() {
                return Err(TokenError::CorpusFormat {
                    line: lineno + 1,
                    detail: "corpus files store unflagged songs".into(),
                });
            }
            notes.push(token);
            durations.push(DurationToken::from_name(dur)?);
        }
        songs.push(TokenizedSong { notes, durations });
    }
    Ok(songs)
}

/// Histogram of |actual − quantized| duration errors, in quarter-lengths.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QuantizationHistogram {
    pub exact: usize,
    pub upto_quarter_of_ql: usize,
    pub upto_half_ql: usize,
    pub upto_one_ql: usize,
    pub beyond_one_ql: usize,
}

impl QuantizationHistogram {
    pub fn record(&mut self, dur_ql: Ql) {
        let token = match quantize_duration(dur_ql) {
            Ok(t) => t,
            Err(_) => return,
        };
        let err = (dur_ql - token.quarter_length()).abs();
        if err.is_zero() {
            self.exact += 1;
        } else if err <= Rational64::new(1, 4) {
            self.upto_quarter_of_ql += 1;
        } else if err <= Rational64::new(1, 2) {
            self.upto_half_ql += 1;
        } else if err <= Rational64::from_integer(1) {
            self.upto_one_ql += 1;
        } else {
            self.beyond_one_ql += 1;
        }
    }

    pub fn total(&self) -> usize {
        self.exact
            + self.upto_quarter_of_ql
            + self.upto_half_ql
            + self.upto_one_ql
            + self.beyond_one_ql
    }
}

impl fmt::Display for QuantizationHistogram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "  exact:        {}", self.exact)?;
        writeln!(f, "  (0, 0.25] ql: {}", self.upto_quarter_of_ql)?;
        writeln!(f, "  (0.25, 0.5]:  {}", self.upto_half_ql)?;
        writeln!(f, "  (0.5, 1.0]:   {}", self.upto_one_ql)?;
        write!(f, "  beyond 1.0:   {}", self.beyond_one_ql)
    }
}

/// Formats a quarter-length for reports.
pub fn format_ql(ql: Ql) -> String {
    format_fixed(ql, 4)
}
