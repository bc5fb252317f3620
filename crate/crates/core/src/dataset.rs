//! Training-window assembly and batch streaming.
//!
//! Songs are flagged with a trailing "&", then sliced into stride-1
//! windows per song, so no window can span a song boundary. Windows are
//! stored as (song, offset) references into the indexed corpus; one-hot
//! matrices are materialized lazily per batch, keeping peak memory at
//! O(batch × window × vocab) rather than O(corpus).

use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::tokenizer::{NoteToken, TokenDicts, TokenError, TokenizedSong};
use crate::Ql;
use num_rational::Rational64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub const WINDOW_INDEX_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("song {0} already ends with the end flag")]
    AlreadyFlagged(usize),
    #[error("song {song}: note stream length {notes} does not fit duration stream length {durs}")]
    StreamLengths {
        song: usize,
        notes: usize,
        durs: usize,
    },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("corpus has no trainable windows for sequence length {0}")]
    NoTrainableWindows(usize),
    #[error("window index file: {0}")]
    IndexFormat(String),
    #[error("window index corpus hash does not match")]
    CorpusHashMismatch,
    #[error(transparent)]
    Token(#[from] TokenError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Windowing and batching parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowConfig {
    /// Window width n: the number of input timesteps.
    pub sequence_length: usize,
    /// Batch size m: rows per batch.
    pub batch_size: usize,
    /// Seed for the per-epoch row shuffle.
    pub shuffle_seed: u64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            sequence_length: 50,
            batch_size: 64,
            shuffle_seed: 0,
        }
    }
}

/// A corpus whose songs all carry the trailing end flag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlaggedCorpus {
    songs: Vec<TokenizedSong>,
}

/// Appends the end flag to every song's note stream. Duration streams are
/// untouched: the flag has no duration. Double flagging is an ingestion
/// bug and is rejected.
pub fn append_end_flags(songs: Vec<TokenizedSong>) -> Result<FlaggedCorpus, DatasetError> {
    let mut flagged = Vec::with_capacity(songs.len());
    for (i, mut song) in songs.into_iter().enumerate() {
        if song.notes.last().is_some_and(NoteToken::is_end_flag) {
            return Err(DatasetError::AlreadyFlagged(i));
        }
        if song.notes.len() != song.durations.len() {
            return Err(DatasetError::StreamLengths {
                song: i,
                notes: song.notes.len(),
                durs: song.durations.len(),
            });
        }
        song.notes.push(NoteToken::end_flag());
        flagged.push(song);
    }
    Ok(FlaggedCorpus { songs: flagged })
}

impl FlaggedCorpus {
    pub fn songs(&self) -> &[TokenizedSong] {
        &self.songs
    }

    pub fn len(&self) -> usize {
        self.songs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.songs.is_empty()
    }

    /// Flagged note stream lengths (unflagged length + 1).
    pub fn flagged_lengths(&self) -> impl Iterator<Item = usize> + '_ {
        self.songs.iter().map(|s| s.notes.len())
    }
}

/// The coverage index: sequence length over mean (unflagged) song length.
/// Reported as an ingest diagnostic for window/boundary mismatch severity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoverageIndex(pub Ql);

impl CoverageIndex {
    pub fn as_f64(self) -> f64 {
        crate::rational::ratio_to_f64(self.0)
    }
}

/// I = n / (Σ song_length_i / #songs), over unflagged song lengths.
pub fn compute_coverage_index(
    corpus: &FlaggedCorpus,
    sequence_length: usize,
) -> Result<CoverageIndex, DatasetError> {
    if corpus.is_empty() {
        return Err(DatasetError::EmptyCorpus);
    }
    let total: i64 = corpus.songs.iter().map(|s| s.notes.len() as i64 - 1).sum();
    if total == 0 {
        return Err(DatasetError::NoTrainableWindows(sequence_length));
    }
    let n = Rational64::from_integer(sequence_length as i64);
    let mean = Rational64::new(total, corpus.len() as i64);
    Ok(CoverageIndex(n / mean))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowRef {
    pub song: u32,
    pub offset: u32,
}

/// Note-model windows: each row is n consecutive note indices from one
/// song; the target is the index immediately after the window (possibly
/// the end flag).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowSet {
    songs: Vec<Vec<u32>>,
    refs: Vec<WindowRef>,
    sequence_length: usize,
    note_vocab: usize,
    skipped_songs: usize,
}

/// Duration-model windows: each timestep is the concatenation
/// one-hot(note) ⧺ one-hot(duration); the target is the duration index at
/// the position right after the window. Positions whose target would be
/// the end flag are excluded entirely.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DurationWindowSet {
    notes: Vec<Vec<u32>>,
    durs: Vec<Vec<u32>>,
    refs: Vec<WindowRef>,
    sequence_length: usize,
    note_vocab: usize,
    skipped_songs: usize,
}

fn index_notes(corpus: &FlaggedCorpus, dicts: &TokenDicts) -> Result<Vec<Vec<u32>>, DatasetError> {
    corpus
        .songs
        .iter()
        .map(|song| {
            song.notes
                .iter()
                .map(|t| dicts.note_to_index(t).map(|i| i as u32))
                .collect::<Result<Vec<u32>, TokenError>>()
        })
        .collect::<Result<Vec<_>, TokenError>>()
        .map_err(DatasetError::from)
}

/// Builds note-model windows. Songs shorter (flagged) than n+1 are skipped
/// and counted; a corpus yielding no windows at all is an error.
pub fn make_note_windows(
    corpus: &FlaggedCorpus,
    dicts: &TokenDicts,
    cfg: &WindowConfig,
) -> Result<WindowSet, DatasetError> {
    let n = cfg.sequence_length;
    let songs = index_notes(corpus, dicts)?;
    let mut refs = Vec::new();
    let mut skipped = 0usize;
    for (si, song) in songs.iter().enumerate() {
        let flagged_len = song.len();
        if flagged_len < n + 1 {
            skipped += 1;
            continue;
        }
        for offset in 0..=(flagged_len - n - 1) {
            refs.push(WindowRef {
                song: si as u32,
                offset: offset as u32,
            });
        }
    }
    if refs.is_empty() {
        return Err(DatasetError::NoTrainableWindows(n));
    }
    Ok(WindowSet {
        songs,
        refs,
        sequence_length: n,
        note_vocab: dicts.note_vocab(),
        skipped_songs: skipped,
    })
}

/// Builds duration-model windows. A song with K events contributes
/// K − n windows (none when K ≤ n): inputs are steps t..t+n−1 of
/// (note, duration) pairs, the target is the duration at t+n.
pub fn make_duration_windows(
    corpus: &FlaggedCorpus,
    dicts: &TokenDicts,
    cfg: &WindowConfig,
) -> Result<DurationWindowSet, DatasetError> {
    let n = cfg.sequence_length;
    let notes = index_notes(corpus, dicts)?;
    let durs: Vec<Vec<u32>> = corpus
        .songs
        .iter()
        .map(|song| {
            song.durations
                .iter()
                .map(|d| d.index() as u32)
                .collect::<Vec<u32>>()
        })
        .collect();

    let mut refs = Vec::new();
    let mut skipped = 0usize;
    for (si, song_durs) in durs.iter().enumerate() {
        let events = song_durs.len();
        if events < n + 1 {
            skipped += 1;
            continue;
        }
        for offset in 0..=(events - n - 1) {
            refs.push(WindowRef {
                song: si as u32,
                offset: offset as u32,
            });
        }
    }
    if refs.is_empty() {
        return Err(DatasetError::NoTrainableWindows(n));
    }
    Ok(DurationWindowSet {
        notes,
        durs,
        refs,
        sequence_length: n,
        note_vocab: dicts.note_vocab(),
        skipped_songs: skipped,
    })
}

/// A window source that can materialize one-hot batches.
pub trait BatchProvider<S: Scalar> {
    fn rows(&self) -> usize;
    /// Input feature width per timestep.
    fn feature_width(&self) -> usize;
    fn sequence_length(&self) -> usize;
    /// Target one-hot width.
    fn target_width(&self) -> usize;
    /// Materializes (X: m×n×feature, R: m×target) for the given rows.
    fn one_hot_batch(&self, rows: &[usize]) -> (Tensor<S>, Tensor<S>);
}

impl WindowSet {
    pub fn len(&self) -> usize {
        self.refs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.refs.is_empty()
    }

    pub fn skipped_songs(&self) -> usize {
        self.skipped_songs
    }

    pub fn note_vocab(&self) -> usize {
        self.note_vocab
    }

    pub fn refs(&self) -> &[WindowRef] {
        &self.refs
    }

    /// The n input indices of window `row`.
    pub fn input_row(&self, row: usize) -> &[u32] {
        let r = self.refs[row];
        let o = r.offset as usize;
        &self.songs[r.song as usize][o..o + self.sequence_length]
    }

    pub fn target(&self, row: usize) -> u32 {
        let r = self.refs[row];
        self.songs[r.song as usize][r.offset as usize + self.sequence_length]
    }
}

impl<S: Scalar> BatchProvider<S> for WindowSet {
    fn rows(&self) -> usize {
        self.refs.len()
    }

    fn feature_width(&self) -> usize {
        self.note_vocab
    }

    fn sequence_length(&self) -> usize {
        self.sequence_length
    }

    fn target_width(&self) -> usize {
        self.note_vocab
    }

    fn one_hot_batch(&self, rows: &[usize]) -> (Tensor<S>, Tensor<S>) {
        let (m, n, v) = (rows.len(), self.sequence_length, self.note_vocab);
        let mut x = Tensor::zeros(&[m, n, v]);
        let mut r = Tensor::zeros(&[m, v]);
        for (bi, &row) in rows.iter().enumerate() {
            for (t, &idx) in self.input_row(row).iter().enumerate() {
                x.data_mut()[bi * n * v + t * v + idx as usize] = S::one();
            }
            r.data_mut()[bi * v + self.target(row) as usize] = S::one();
        }
        (x, r)
    }
}

impl DurationWindowSet {
    pub fn len(&self) -> usize {
        self.refs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.refs.is_empty()
    }

    pub fn skipped_songs(&self) -> usize {
        self.skipped_songs
    }

    /// The (note, duration) index pairs of window `row`.
    pub fn input_row(&self, row: usize) -> Vec<(u32, u32)> {
        let r = self.refs[row];
        let (s, o) = (r.song as usize, r.offset as usize);
        (o..o + self.sequence_length)
            .map(|t| (self.notes[s][t], self.durs[s][t]))
            .collect()
    }

    pub fn target(&self, row: usize) -> u32 {
        let r = self.refs[row];
        self.durs[r.song as usize][r.offset as usize + self.sequence_length]
    }
}

impl<S: Scalar> BatchProvider<S> for DurationWindowSet {
    fn rows(&self) -> usize {
        self.refs.len()
    }

    fn feature_width(&self) -> usize {
        self.note_vocab + 3
    }

    fn sequence_length(&self) -> usize {
        self.sequence_length
    }

    fn target_width(&self) -> usize {
        3
    }

    fn one_hot_batch(&self, rows: &[usize]) -> (Tensor<S>, Tensor<S>) {
        let (m, n) = (rows.len(), self.sequence_length);
        let w = self.note_vocab + 3;
        let mut x = Tensor::zeros(&[m, n, w]);
        let mut r = Tensor::zeros(&[m, 3]);
        for (bi, &row) in rows.iter().enumerate() {
            for (t, (note, dur)) in self.input_row(row).into_iter().enumerate() {
                let base = bi * n * w + t * w;
                x.data_mut()[base + note as usize] = S::one();
                x.data_mut()[base + self.note_vocab + dur as usize] = S::one();
            }
            r.data_mut()[bi * 3 + self.target(row) as usize] = S::one();
        }
        (x, r)
    }
}

/// Deterministic per-epoch batching: rows are shuffled by a generator
/// seeded with `shuffle_seed + epoch`, then chunked into ⌈rows/m⌉ batches.
pub fn epoch_row_batches(rows: usize, cfg: &WindowConfig, epoch: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..rows).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.shuffle_seed.wrapping_add(epoch));
    order.shuffle(&mut rng);
    order
        .chunks(cfg.batch_size.max(1))
        .map(<[usize]>::to_vec)
        .collect()
}

/// Serializes the window index: version, n, corpus hash, then
/// (song, offset) pairs, all little-endian.
pub fn write_window_index(windows: &WindowSet, corpus_hash: &[u8; 32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(44 + windows.refs.len() * 8);
    out.extend_from_slice(&WINDOW_INDEX_VERSION.to_le_bytes());
    out.extend_from_slice(&(windows.sequence_length as u32).to_le_bytes());
    out.extend_from_slice(corpus_hash);
    for r in &windows.refs {
        out.extend_from_slice(&r.song.to_le_bytes());
        out.extend_from_slice(&r.offset.to_le_bytes());
    }
    out
}

pub struct WindowIndexFile {
    pub sequence_length: usize,
    pub corpus_hash: [u8; 32],
    pub refs: Vec<WindowRef>,
}

pub fn read_window_index(bytes: &[u8]) -> Result<WindowIndexFile, DatasetError> {
    if bytes.len() < 40 {
        return Err(DatasetError::IndexFormat("file too short".into()));
    }
    let version = u32::from_le_bytes(bytes[0..4].try_into().unwrap());
    if version != WINDOW_INDEX_VERSION {
        return Err(DatasetError::IndexFormat(format!(
            "unsupported version {version}"
        )));
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let mut corpus_hash = [0u8; 32];
    corpus_hash.copy_from_slice(&bytes[8..40]);
    let body = &bytes[40..];
    if body.len() % 8 != 0 {
        return Err(DatasetError::IndexFormat(
            "window pair section is not a multiple of 8 bytes".into(),
        ));
    }
    let refs = body
        .chunks_exact(8)
        .map(|pair| WindowRef {
            song: u32::from_le_bytes(pair[0..4].try_into().unwrap()),
            offset: u32::from_le_bytes(pair[4..8].try_into().unwrap()),
        })
        .collect();
    Ok(WindowIndexFile {
        sequence_length: n,
        corpus_hash,
        refs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenizer::DurationToken;
    use rand::Rng;

    fn song(notes: &[&str]) -> TokenizedSong {
        TokenizedSong {
            notes: notes.iter().map(|t| NoteToken::parse(t).unwrap()).collect(),
            durations: vec![DurationToken::Quarter; notes.len()],
        }
    }

    fn cfg(n: usize, m: usize) -> WindowConfig {
        WindowConfig {
            sequence_length: n,
            batch_size: m,
            shuffle_seed: 7,
        }
    }

    fn dicts_for(corpus: &FlaggedCorpus) -> TokenDicts {
        TokenDicts::build(corpus.songs()).unwrap()
    }

    #[test]
    fn end_flags_appended_once_per_song() {
        let corpus = append_end_flags(vec![song(&["60", "62"]), song(&["64"])]).unwrap();
        let flags: usize = corpus
            .songs()
            .iter()
            .flat_map(|s| &s.notes)
            .filter(|t| t.is_end_flag())
            .count();
        assert_eq!(flags, 2);
        assert_eq!(corpus.songs()[0].notes.last().unwrap().as_str(), "&");
        assert_eq!(corpus.songs()[0].durations.len(), 2);
    }

    #[test]
    fn empty_corpus_flags_to_empty() {
        let corpus = append_end_flags(vec![]).unwrap();
        assert!(corpus.is_empty());
    }

    #[test]
    fn double_flagging_rejected() {
        let corpus = append_end_flags(vec![song(&["60"])]).unwrap();
        let songs = corpus.songs().to_vec();
        assert!(matches!(
            append_end_flags(songs),
            Err(DatasetError::AlreadyFlagged(0))
        ));
    }

    #[test]
    fn note_windows_enumerate_per_song() {
        // [A,B,C,D,&] with n=2 -> (A,B)->C, (B,C)->D, (C,D)->&
        let corpus = append_end_flags(vec![song(&["60", "62", "64", "65"])]).unwrap();
        let dicts = dicts_for(&corpus);
        let ws = make_note_windows(&corpus, &dicts, &cfg(2, 4)).unwrap();
        assert_eq!(ws.len(), 3);
        assert_eq!(ws.input_row(0), &[0, 1]);
        assert_eq!(ws.target(0), 2);
        assert_eq!(ws.input_row(2), &[2, 3]);
        assert_eq!(ws.target(2) as usize, dicts.end_flag_index());
    }

    #[test]
    fn windows_never_span_songs() {
        let corpus = append_end_flags(vec![song(&["60", "62"]), song(&["64", "65"])]).unwrap();
        let dicts = dicts_for(&corpus);
        let ws = make_note_windows(&corpus, &dicts, &cfg(2, 4)).unwrap();
        assert_eq!(ws.len(), 2);
        for row in 0..ws.len() {
            let r = ws.refs()[row];
            let flagged_len = corpus.songs()[r.song as usize].notes.len();
            assert!(r.offset as usize + 2 < flagged_len + 1);
        }
        // Count matches T - s*n over flagged lengths.
        let total: usize = corpus.flagged_lengths().sum();
        assert_eq!(ws.len(), total - 2 * 2);
    }

    #[test]
    fn short_songs_are_skipped_with_count() {
        let corpus = append_end_flags(vec![song(&["60"]), song(&["60", "62", "64"])]).unwrap();
        let dicts = dicts_for(&corpus);
        let ws = make_note_windows(&corpus, &dicts, &cfg(3, 4)).unwrap();
        assert_eq!(ws.skipped_songs(), 1);
        assert_eq!(ws.len(), 1);
    }

    #[test]
    fn no_trainable_windows_is_an_error() {
        let corpus = append_end_flags(vec![song(&["60"])]).unwrap();
        let dicts = dicts_for(&corpus);
        assert!(matches!(
            make_note_windows(&corpus, &dicts, &cfg(5, 4)),
            Err(DatasetError::NoTrainableWindows(5))
        ));
    }

    #[test]
    fn duration_windows_exclude_the_flag_position() {
        // notes [A,B,C,&], durs [q,q,h], n=2 -> one window (A,q),(B,q) -> h
        let mut s = song(&["60", "62", "64"]);
        s.durations = vec![
            DurationToken::Quarter,
            DurationToken::Quarter,
            DurationToken::Half,
        ];
        let corpus = append_end_flags(vec![s]).unwrap();
        let dicts = dicts_for(&corpus);
        let ws = make_duration_windows(&corpus, &dicts, &cfg(2, 4)).unwrap();
        assert_eq!(ws.len(), 1);
        let row = ws.input_row(0);
        assert_eq!(row.len(), 2);
        assert_eq!(row[0].1, DurationToken::Quarter.index() as u32);
        assert_eq!(ws.target(0), DurationToken::Half.index() as u32);
    }

    #[test]
    fn duration_window_feature_width_is_vocab_plus_three() {
        let corpus = append_end_flags(vec![song(&["60", "62", "64"])]).unwrap();
        let dicts = dicts_for(&corpus);
        let ws = make_duration_windows(&corpus, &dicts, &cfg(2, 4)).unwrap();
        let (x, r) = BatchProvider::<f64>::one_hot_batch(&ws, &[0]);
        assert_eq!(x.shape(), &[1, 2, dicts.note_vocab() + 3]);
        assert_eq!(r.shape(), &[1, 3]);
        // Each timestep row sums to exactly 2: one note bit, one duration bit.
        for t in 0..2 {
            let sum: f64 = x.data()[t * (dicts.note_vocab() + 3)..(t + 1) * (dicts.note_vocab() + 3)]
                .iter()
                .sum();
            assert_eq!(sum, 2.0);
        }
    }

    #[test]
    fn duration_windows_empty_when_songs_too_short() {
        let corpus = append_end_flags(vec![song(&["60", "62"])]).unwrap();
        let dicts = dicts_for(&corpus);
        assert!(matches!(
            make_duration_windows(&corpus, &dicts, &cfg(2, 4)),
            Err(DatasetError::NoTrainableWindows(2))
        ));
    }

    #[test]
    fn coverage_index_matches_the_formula() {
        let corpus = append_end_flags(vec![
            song(&vec!["60"; 100].iter().map(|s| *s).collect::<Vec<_>>()),
            song(&vec!["62"; 300].iter().map(|s| *s).collect::<Vec<_>>()),
        ])
        .unwrap();
        let idx = compute_coverage_index(&corpus, 50).unwrap();
        assert_eq!(idx.0, Rational64::new(1, 4));
        let one = compute_coverage_index(
            &append_end_flags(vec![song(&["60", "62"]), song(&["64", "65"])]).unwrap(),
            2,
        )
        .unwrap();
        assert_eq!(one.0, Rational64::from_integer(1));
        let tenth = compute_coverage_index(
            &append_end_flags(vec![song(&vec!["60"; 1000])]).unwrap(),
            100,
        )
        .unwrap();
        assert_eq!(tenth.0, Rational64::new(1, 10));
    }

    #[test]
    fn coverage_of_empty_corpus_errors() {
        let corpus = append_end_flags(vec![]).unwrap();
        assert!(compute_coverage_index(&corpus, 10).is_err());
    }

    #[test]
    fn batch_sizes_follow_ceiling_division() {
        let batches = epoch_row_batches(10, &cfg(2, 4), 0);
        let sizes: Vec<usize> = batches.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![4, 4, 2]);
    }

    #[test]
    fn epoch_shuffle_is_a_permutation_and_deterministic() {
        let a = epoch_row_batches(100, &cfg(2, 16), 3);
        let b = epoch_row_batches(100, &cfg(2, 16), 3);
        assert_eq!(a, b);
        let mut seen: Vec<usize> = a.into_iter().flatten().collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..100).collect::<Vec<_>>());
        let c = epoch_row_batches(100, &cfg(2, 16), 4);
        assert_ne!(
            b.into_iter().flatten().collect::<Vec<_>>(),
            c.into_iter().flatten().collect::<Vec<_>>()
        );
    }

    #[test]
    fn one_hot_rows_sum_to_one() {
        let corpus = append_end_flags(vec![song(&["60", "62", "64", "65"])]).unwrap();
        let dicts = dicts_for(&corpus);
        let ws = make_note_windows(&corpus, &dicts, &cfg(2, 4)).unwrap();
        let (x, r) = BatchProvider::<f64>::one_hot_batch(&ws, &[0, 1, 2]);
        let v = dicts.note_vocab();
        for chunk in x.data().chunks(v) {
            assert_eq!(chunk.iter().sum::<f64>(), 1.0);
        }
        for chunk in r.data().chunks(v) {
            assert_eq!(chunk.iter().sum::<f64>(), 1.0);
        }
        // index 2 in a vocab of 5 -> [0,0,1,0,0]
        let mut probe: Tensor<f64> = Tensor::zeros(&[1, 5]);
        probe.data_mut()[2] = 1.0;
        assert_eq!(probe.data(), &[0.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn window_count_matches_bruteforce_on_random_corpora() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.gen_range(1..5);
            let songs: Vec<TokenizedSong> = (0..rng.gen_range(1..6))
                .map(|_| {
                    let len = rng.gen_range(n + 1..n + 12);
                    let notes: Vec<String> =
                        (0..len).map(|_| rng.gen_range(40u8..80).to_string()).collect();
                    song(&notes.iter().map(String::as_str).collect::<Vec<_>>())
                })
                .collect();
            let corpus = append_end_flags(songs).unwrap();
            let dicts = dicts_for(&corpus);
            let ws = make_note_windows(&corpus, &dicts, &cfg(n, 4)).unwrap();

            // Brute force: enumerate every in-song window directly.
            let mut expected = Vec::new();
            for (si, s) in corpus.songs().iter().enumerate() {
                let stream: Vec<u32> = s
                    .notes
                    .iter()
                    .map(|t| dicts.note_to_index(t).unwrap() as u32)
                    .collect();
                for o in 0..stream.len().saturating_sub(n) {
                    expected.push((si, stream[o..o + n].to_vec(), stream[o + n]));
                }
            }
            assert_eq!(ws.len(), expected.len());
            let total: usize = corpus.flagged_lengths().sum();
            assert_eq!(ws.len(), total - corpus.len() * n);
            for (row, (si, input, target)) in expected.iter().enumerate() {
                assert_eq!(ws.refs()[row].song as usize, *si);
                assert_eq!(ws.input_row(row), input.as_slice());
                assert_eq!(ws.target(row), *target);
            }
        }
    }

    #[test]
    fn window_index_round_trips() {
        let corpus = append_end_flags(vec![song(&["60", "62", "64", "65"])]).unwrap();
        let dicts = dicts_for(&corpus);
        let ws = make_note_windows(&corpus, &dicts, &cfg(2, 4)).unwrap();
        let hash = [7u8; 32];
        let bytes = write_window_index(&ws, &hash);
        let file = read_window_index(&bytes).unwrap();
        assert_eq!(file.sequence_length, 2);
        assert_eq!(file.corpus_hash, hash);
        assert_eq!(file.refs, ws.refs());
        assert!(read_window_index(&bytes[..20]).is_err());
    }
}
