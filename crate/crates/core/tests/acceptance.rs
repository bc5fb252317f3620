//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (run with `--nocapture` to see them all).
//!
//! Every tolerance is pinned here, in code. The reference-table checks are
//! exact string equality on displayed values; the numeric criteria state
//! their thresholds inline.

use chorale_core::dataset::{
    append_end_flags, compute_coverage_index, epoch_row_batches, make_note_windows, BatchProvider,
    WindowConfig,
};
use chorale_core::generate::{
    assemble_piece, continue_greedy, generate_durations, generate_notes, seed_window,
    GenerationConfig, Provenance,
};
use chorale_core::midi::{
    build_midi_from_events, extract_note_events, parse_smf, write_smf, NoteEvent,
};
use chorale_core::models::{
    build_duration_model, build_note_model, init_network, train, TrainConfig,
};
use chorale_core::nn::{gradient_check, GradCheckConfig, Network};
use chorale_core::survey::{
    aggregate_scores, distinguish_rates, familiarity_rates, matching_denominators,
    parse_responses,
};
use chorale_core::tensor::Tensor;
use chorale_core::tokenizer::{
    detokenize, quantize_duration, tokenize_song, DurationToken, NoteToken, TokenDicts,
    TokenizedSong,
};
use chorale_core::Ql;
use num_rational::Rational64;
use num_traits::Signed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn report(criterion: usize, desc: &str, ok: bool) {
    println!(
        "criterion {criterion:>2}: {} - {desc}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {criterion} failed: {desc}");
}

fn fixture_responses() -> Vec<chorale_core::survey::SurveyResponse> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/survey19.csv");
    let text = std::fs::read_to_string(path).expect("fixture present");
    parse_responses(&text).expect("fixture parses")
}

#[test]
fn criterion_01_score_table_reproduction() {
    let responses = fixture_responses();
    assert_eq!(responses.len(), 19);
    let table = aggregate_scores(&responses).unwrap();
    let overalls = table.overall_display();
    let expected = ["4.17", "3.93", "3.40", "3.87", "3.77", "3.93"];
    let ok = overalls == expected;
    if !ok {
        eprintln!("got {overalls:?}, expected {expected:?}");
    }
    // The published criterion columns must regenerate verbatim as well.
    let criterion_cols: Vec<[String; 3]> = table
        .rows
        .iter()
        .map(|r| {
            [
                chorale_core::rational::format_fixed(r.published_interval(), 1),
                chorale_core::rational::format_fixed(r.published_rhythm(), 1),
                chorale_core::rational::format_fixed(r.published_melody(), 1),
            ]
        })
        .collect();
    let expected_cols = [
        ["4.0", "4.7", "3.8"],
        ["3.8", "4.3", "3.7"],
        ["3.3", "3.5", "3.4"],
        ["3.8", "4.0", "3.8"],
        ["4.0", "3.8", "3.5"],
        ["3.8", "4.2", "3.8"],
    ];
    let cols_ok = criterion_cols
        .iter()
        .zip(&expected_cols)
        .all(|(got, want)| got.iter().zip(want.iter()).all(|(g, w)| g == w));
    report(
        1,
        "19-respondent fixture reproduces all six overall scores exactly",
        ok && cols_ok,
    );
}

#[test]
fn criterion_02_rate_tables_and_denominator() {
    let started = Instant::now();
    let responses = fixture_responses();
    let distinguish = distinguish_rates(&responses).unwrap();
    let familiar = familiarity_rates(&responses).unwrap();
    let d_expected = ["15.79", "21.05", "26.32", "21.05", "26.32", "36.84", "15.79"];
    let f_expected = ["21.05", "0.00", "0.00", "0.00", "0.00", "10.53", "73.68"];
    let d_ok = distinguish.display_rates() == d_expected;
    let f_ok = familiar.display_rates() == f_expected;

    // The respondent count is reconstructed from the published rates:
    // brute-force search over 1..=200 must find 19 as the smallest
    // denominator, with only its multiples also matching.
    let published: Vec<Rational64> = d_expected
        .iter()
        .chain(f_expected.iter())
        .map(|s| {
            let clean: String = s.chars().filter(|c| *c != '.').collect();
            Rational64::new(clean.parse::<i64>().unwrap(), 100)
        })
        .collect();
    let matches = matching_denominators(&published, 200);
    let denom_ok = matches.first() == Some(&19) && matches.iter().all(|n| n % 19 == 0);
    let fast = started.elapsed().as_secs_f64() < 1.0;
    if !(d_ok && f_ok) {
        eprintln!(
            "distinguish {:?} familiar {:?}",
            distinguish.display_rates(),
            familiar.display_rates()
        );
    }
    report(
        2,
        "rate tables exact; denominator 19 validated by brute force in < 1 s",
        d_ok && f_ok && denom_ok && fast,
    );
}

fn one_hot_batch(
    m: usize,
    n: usize,
    width: usize,
    sections: &[usize],
    target_width: usize,
    seed: u64,
) -> (Tensor<f64>, Tensor<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Tensor::zeros(&[m, n, width]);
    let mut t = Tensor::zeros(&[m, target_width]);
    for i in 0..m {
        for step in 0..n {
            let mut base = 0;
            for &section in sections {
                let idx = rng.gen_range(0..section);
                x.data_mut()[i * n * width + step * width + base + idx] = 1.0;
                base += section;
            }
        }
        let idx = rng.gen_range(0..target_width);
        t.data_mut()[i * target_width + idx] = 1.0;
    }
    (x, t)
}

#[test]
fn criterion_03_gradient_verification() {
    let started = Instant::now();
    // Scaled note model: widths 32/16, vocab 12, n = 5, m = 2.
    let note_spec = build_note_model(12, 0.0625);
    assert_eq!(note_spec.layers[0].width, Some(32));
    assert_eq!(note_spec.layers[2].width, Some(16));
    let note_net: Network<f64> = init_network(&note_spec, 7).unwrap();
    let (x, t) = one_hot_batch(2, 5, 12, &[12], 12, 99);
    let cfg = GradCheckConfig {
        eps: 1e-5,
        samples_per_tensor: 200,
        seed: 7,
        dropout_active: false,
    };
    let note_report = gradient_check(&note_net, &x, &t, &cfg).unwrap();

    let dur_spec = build_duration_model(12, 0.0625);
    let dur_net: Network<f64> = init_network(&dur_spec, 7).unwrap();
    let (x, t) = one_hot_batch(2, 5, 15, &[12, 3], 3, 99);
    let dur_report = gradient_check(&dur_net, &x, &t, &cfg).unwrap();

    let elapsed = started.elapsed().as_secs_f64();
    let ok = note_report.max_rel_error < 1e-4 && dur_report.max_rel_error < 1e-4;
    let fast = elapsed < 60.0;
    println!(
        "  note model {:.3e}, duration model {:.3e}, {elapsed:.1}s",
        note_report.max_rel_error, dur_report.max_rel_error
    );
    report(
        3,
        "finite-difference check < 1e-4 for both models in < 60 s",
        ok && fast,
    );
}

/// Two songs of 32 globally distinct tokens: every window context is
/// unique, so the window set is perfectly memorizable.
fn memorization_corpus() -> (Vec<TokenizedSong>, TokenDicts) {
    let songs: Vec<TokenizedSong> = (0..2)
        .map(|s| {
            let notes: Vec<NoteToken> = (0..32)
                .map(|i| NoteToken::parse(&format!("{}", 30 + s * 40 + i)).unwrap())
                .collect();
            TokenizedSong {
                durations: vec![DurationToken::Quarter; notes.len()],
                notes,
            }
        })
        .collect();
    let dicts = TokenDicts::build(&songs).unwrap();
    (songs, dicts)
}

#[test]
fn criterion_04_memorization_convergence() {
    let started = Instant::now();
    let (songs, dicts) = memorization_corpus();
    let corpus = append_end_flags(songs).unwrap();
    let window_cfg = WindowConfig {
        sequence_length: 8,
        batch_size: 8,
        shuffle_seed: 11,
    };
    let windows = make_note_windows(&corpus, &dicts, &window_cfg).unwrap();
    let spec = build_note_model(dicts.note_vocab(), 0.0625);
    let mut net: Network<f64> = init_network(&spec, 11).unwrap();
    let train_cfg = TrainConfig {
        epochs: 200,
        patience: None,
        target_accuracy: None,
        // A slightly sharper step than the training default pushes the
        // memorized logit margins past the train-mode dropout noise.
        optimizer: chorale_core::nn::rmsprop::RmspropConfig {
            learning_rate: 2e-3,
            ..Default::default()
        },
        ..TrainConfig::default()
    };
    let (history, _) = train(&mut net, &windows, &window_cfg, &train_cfg).unwrap();
    assert_eq!(history.records.len(), 200);
    let best_acc = history.best_accuracy();
    let first_loss = history.records[0].loss;
    let last_loss = history.records[199].loss;
    let elapsed = started.elapsed().as_secs_f64();
    println!(
        "  best accuracy {best_acc:.4}, loss epoch 1 {first_loss:.4} -> epoch 200 {last_loss:.4} ({:.1}% of start), {elapsed:.1}s",
        100.0 * last_loss / first_loss
    );
    report(
        4,
        "scaled note model memorizes the toy corpus (acc >= 0.99, final loss < 5% of epoch 1) in < 5 min",
        best_acc >= 0.99 && last_loss < 0.05 * first_loss && elapsed < 300.0,
    );
}

#[test]
fn criterion_05_decoded_token_budget() {
    // Tiny random-weight model; the count contract is architecture-free.
    let tokens = ["50", "52", "55", "57", "60", "62"];
    let dicts = TokenDicts::build(&[TokenizedSong {
        notes: tokens.iter().map(|t| NoteToken::parse(t).unwrap()).collect(),
        durations: vec![DurationToken::Quarter; tokens.len()],
    }])
    .unwrap();
    let spec = build_note_model(dicts.note_vocab(), 0.02);
    let net: Network<f64> = init_network(&spec, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut ok = true;
    for trial in 0..50 {
        let n = rng.gen_range(1..12);
        let predict = rng.gen_range(1..40);
        let cfg = GenerationConfig {
            length: 2 * n + predict,
            sequence_length: n,
            seed: trial,
            tempo_bpm: 120.0,
        };
        let out = generate_notes(&net, &dicts, &cfg).unwrap();
        ok &= out.len() == predict;
    }
    report(
        5,
        "decoded token count equals Length - 2n exactly on 50 random configurations",
        ok,
    );
}

#[test]
fn criterion_06_coverage_index_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut ok = true;
    for _ in 0..100 {
        let songs: Vec<TokenizedSong> = (0..rng.gen_range(1..8))
            .map(|_| {
                let len = rng.gen_range(1..50);
                TokenizedSong {
                    notes: (0..len)
                        .map(|_| NoteToken::parse(&rng.gen_range(30u8..100).to_string()).unwrap())
                        .collect(),
                    durations: vec![DurationToken::Quarter; len],
                }
            })
            .collect();
        let lengths: Vec<i64> = songs.iter().map(|s| s.notes.len() as i64).collect();
        let n = rng.gen_range(1..60usize);
        let corpus = append_end_flags(songs).unwrap();
        let got = compute_coverage_index(&corpus, n).unwrap();
        // Independent route: I = n · s / Σ lengths, exact.
        let expected = Rational64::new(n as i64 * lengths.len() as i64, lengths.iter().sum());
        ok &= got.0 == expected;
    }
    report(
        6,
        "coverage index matches an independent recomputation exactly on 100 random corpora",
        ok,
    );
}

#[test]
fn criterion_07_windowing_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut ok = true;
    for _ in 0..100 {
        let n = rng.gen_range(1..6);
        let song_count = rng.gen_range(1..6);
        let songs: Vec<TokenizedSong> = (0..song_count)
            .map(|_| {
                let len = rng.gen_range(n + 1..n + 15);
                TokenizedSong {
                    notes: (0..len)
                        .map(|_| NoteToken::parse(&rng.gen_range(30u8..90).to_string()).unwrap())
                        .collect(),
                    durations: vec![DurationToken::Quarter; len],
                }
            })
            .collect();
        let corpus = append_end_flags(songs).unwrap();
        let dicts = TokenDicts::build(corpus.songs()).unwrap();
        let cfg = WindowConfig {
            sequence_length: n,
            batch_size: 4,
            shuffle_seed: 0,
        };
        let windows = make_note_windows(&corpus, &dicts, &cfg).unwrap();

        // Brute-force enumeration, one song at a time.
        let mut expected: Vec<(Vec<u32>, u32)> = Vec::new();
        for song in corpus.songs() {
            let stream: Vec<u32> = song
                .notes
                .iter()
                .map(|t| dicts.note_to_index(t).unwrap() as u32)
                .collect();
            for offset in 0..stream.len() - n {
                expected.push((stream[offset..offset + n].to_vec(), stream[offset + n]));
            }
        }
        let flagged_total: usize = corpus.flagged_lengths().sum();
        ok &= windows.len() == expected.len();
        ok &= windows.len() == flagged_total - song_count * n;
        for (row, (input, target)) in expected.iter().enumerate() {
            ok &= windows.input_row(row) == input.as_slice();
            ok &= windows.target(row) == *target;
            // Cross-song check: the window must sit inside one flagged song.
            let r = windows.refs()[row];
            let song_len = corpus.songs()[r.song as usize].notes.len();
            ok &= (r.offset as usize) + n < song_len + 1;
        }
    }
    report(
        7,
        "window enumeration equals brute force with zero cross-song windows and count T - s*n",
        ok,
    );
}

fn random_grid_events(rng: &mut ChaCha8Rng) -> Vec<NoteEvent> {
    let division = 480i64;
    let mut onset_ticks = 0i64;
    let count = rng.gen_range(1..25);
    (0..count)
        .map(|_| {
            let gap = if rng.gen_bool(0.3) {
                rng.gen_range(1..960)
            } else {
                0
            };
            onset_ticks += gap;
            let dur_ticks = rng.gen_range(1..1920i64);
            let mut pitches: Vec<u8> = (0..rng.gen_range(1..4))
                .map(|_| rng.gen_range(30u8..100))
                .collect();
            pitches.sort_unstable();
            pitches.dedup();
            let event = NoteEvent::new(
                pitches,
                Rational64::new(onset_ticks, division),
                Rational64::new(dur_ticks, division),
            )
            .unwrap();
            onset_ticks += dur_ticks;
            event
        })
        .collect()
}

#[test]
fn criterion_08_midi_round_trip_and_fuzz() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let mut ok = true;
    for _ in 0..1000 {
        let events = random_grid_events(&mut rng);
        let song = build_midi_from_events(&events, 480, 120.0).unwrap();
        let bytes = write_smf(&song).unwrap();
        let parsed = parse_smf(&bytes).unwrap();
        let (back, stats) = extract_note_events(&parsed);
        ok &= back == events && stats.dangling_note_ons == 0;
    }

    // Byte fuzz: random garbage, random mutations of a valid file, and
    // truncations. The parser must return (Ok or Err), never panic.
    let valid = write_smf(&build_midi_from_events(&random_grid_events(&mut rng), 480, 90.0).unwrap())
        .unwrap();
    for case in 0..10_000 {
        let bytes: Vec<u8> = match case % 3 {
            0 => {
                let len = rng.gen_range(0..256);
                (0..len).map(|_| rng.gen()).collect()
            }
            1 => {
                let mut mutated = valid.clone();
                for _ in 0..rng.gen_range(1..8) {
                    let pos = rng.gen_range(0..mutated.len());
                    mutated[pos] = rng.gen();
                }
                mutated
            }
            _ => valid[..rng.gen_range(0..valid.len())].to_vec(),
        };
        let _ = parse_smf(&bytes); // must not panic
    }
    report(
        8,
        "1000 grid event lists round-trip exactly; 10000-case byte fuzz survives",
        ok,
    );
}

#[test]
fn criterion_09_tokenizer_properties() {
    let mut ok = DurationToken::ALL.len() == 3;

    // detokenize . tokenize identity on quantized sequential streams.
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let vocab = ["40", "52.55", "60", "60.64.67", "72", "99"];
    let dicts = TokenDicts::build(&[TokenizedSong {
        notes: vocab.iter().map(|t| NoteToken::parse(t).unwrap()).collect(),
        durations: vec![DurationToken::Quarter; vocab.len()],
    }])
    .unwrap();
    for _ in 0..200 {
        let len = rng.gen_range(0..30);
        let notes: Vec<NoteToken> = (0..len)
            .map(|_| NoteToken::parse(vocab[rng.gen_range(0..vocab.len())]).unwrap())
            .collect();
        let durs: Vec<DurationToken> = (0..len)
            .map(|_| DurationToken::ALL[rng.gen_range(0..3)])
            .collect();
        let events = detokenize(&notes, &durs, &dicts).unwrap();
        let (notes2, durs2) = tokenize_song(&events);
        ok &= notes == notes2 && durs == durs2;
    }

    // Quantization is truly nearest with ties to the shorter entry.
    for numer in 1..200i64 {
        for denom in [1i64, 2, 3, 4, 8, 16] {
            let x: Ql = Rational64::new(numer, denom);
            let got = quantize_duration(x).unwrap();
            let gap = (x - got.quarter_length()).abs();
            for cand in DurationToken::ALL {
                let cand_gap = (x - cand.quarter_length()).abs();
                ok &= gap < cand_gap
                    || (gap == cand_gap && got.quarter_length() <= cand.quarter_length());
            }
        }
    }
    report(
        9,
        "duration vocabulary is 3 entries; round-trip identity; nearest-with-short-ties quantization",
        ok,
    );
}

/// The full pipeline as the CLI wires it, at library level.
fn pipeline_run(midi_dir: &std::path::Path, seed: u64) -> Vec<u8> {
    let mut files: Vec<_> = std::fs::read_dir(midi_dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    let mut songs = Vec::new();
    for file in files {
        let song = parse_smf(&std::fs::read(file).unwrap()).unwrap();
        let (events, _) = extract_note_events(&song);
        let (notes, durations) = tokenize_song(&events);
        songs.push(TokenizedSong { notes, durations });
    }
    let dicts = TokenDicts::build(&songs).unwrap();
    let corpus = append_end_flags(songs).unwrap();
    let window_cfg = WindowConfig {
        sequence_length: 6,
        batch_size: 8,
        shuffle_seed: seed.wrapping_add(2),
    };
    let train_cfg = TrainConfig {
        epochs: 5,
        patience: None,
        dropout_seed: seed.wrapping_add(1),
        ..TrainConfig::default()
    };

    let note_windows = make_note_windows(&corpus, &dicts, &window_cfg).unwrap();
    let note_spec = build_note_model(dicts.note_vocab(), 0.03125);
    let mut note_net: Network<f64> = init_network(&note_spec, seed).unwrap();
    train(&mut note_net, &note_windows, &window_cfg, &train_cfg).unwrap();

    let dur_windows =
        chorale_core::dataset::make_duration_windows(&corpus, &dicts, &window_cfg).unwrap();
    let dur_spec = build_duration_model(dicts.note_vocab(), 0.03125);
    let mut dur_net: Network<f64> = init_network(&dur_spec, seed).unwrap();
    train(&mut dur_net, &dur_windows, &window_cfg, &train_cfg).unwrap();

    let gen_cfg = GenerationConfig {
        length: 40,
        sequence_length: 6,
        seed,
        tempo_bpm: 96.0,
    };
    let notes = generate_notes(&note_net, &dicts, &gen_cfg).unwrap();
    let durations = generate_durations(&dur_net, &notes, &dicts, 6).unwrap();
    assemble_piece(&notes, &durations, &dicts, &gen_cfg, Provenance::default())
        .unwrap()
        .midi_bytes
}

#[test]
fn criterion_10_end_to_end_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for i in 0..3 {
        let mut onset = Rational64::new(0, 1);
        let events: Vec<NoteEvent> = (0..24)
            .map(|_| {
                let dur = DurationToken::ALL[rng.gen_range(0..3)].quarter_length();
                let e = NoteEvent::new(vec![rng.gen_range(50u8..80)], onset, dur).unwrap();
                onset += dur;
                e
            })
            .collect();
        let song = build_midi_from_events(&events, 480, 120.0).unwrap();
        std::fs::write(
            dir.path().join(format!("song{i}.mid")),
            write_smf(&song).unwrap(),
        )
        .unwrap();
    }
    let first = pipeline_run(dir.path(), 31);
    let second = pipeline_run(dir.path(), 31);
    report(
        10,
        "ingest -> train (5 epochs) -> generate twice yields byte-identical MIDI",
        first == second,
    );
}

#[test]
fn criterion_11_generation_sanity() {
    // One looped song: an 8-token cycle repeated 16 times. All cycle
    // windows are unambiguous; only the final end-flag target is not
    // learnable, bounding accuracy at 120/121 ≈ 0.9917.
    let cycle: Vec<NoteToken> = (0..8)
        .map(|i| NoteToken::parse(&format!("{}", 60 + i)).unwrap())
        .collect();
    let notes: Vec<NoteToken> = cycle.iter().cloned().cycle().take(128).collect();
    let songs = vec![TokenizedSong {
        durations: vec![DurationToken::Quarter; notes.len()],
        notes,
    }];
    let dicts = TokenDicts::build(&songs).unwrap();
    let corpus = append_end_flags(songs).unwrap();
    let n = 8;
    let window_cfg = WindowConfig {
        sequence_length: n,
        batch_size: 16,
        shuffle_seed: 37,
    };
    let windows = make_note_windows(&corpus, &dicts, &window_cfg).unwrap();
    let spec = build_note_model(dicts.note_vocab(), 0.0625);
    let mut net: Network<f64> = init_network(&spec, 37).unwrap();
    let train_cfg = TrainConfig {
        epochs: 400,
        patience: None,
        target_accuracy: Some(0.99),
        ..TrainConfig::default()
    };
    let (history, _) = train(&mut net, &windows, &window_cfg, &train_cfg).unwrap();
    let acc = history.final_accuracy();
    assert!(
        acc >= 0.99,
        "memorization did not reach 0.99 (got {acc:.4})"
    );

    let cycle_idx: Vec<usize> = cycle.iter().map(|t| dicts.note_to_index(t).unwrap()).collect();
    let mut ok = true;
    for offset in 0..cycle_idx.len() {
        let window: Vec<usize> = (0..n).map(|i| cycle_idx[(offset + i) % 8]).collect();
        let generated = continue_greedy(&net, &window, 50, dicts.note_vocab()).unwrap();
        let expected: Vec<usize> = (0..50).map(|i| cycle_idx[(offset + n + i) % 8]).collect();
        ok &= generated == expected;
    }
    report(
        11,
        "memorized loop regenerates its cycle exactly for >= 50 steps from every in-song window",
        ok,
    );
}

#[test]
fn seed_window_excludes_the_end_flag() {
    // Support check used by criterion 5's generator path.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        for idx in seed_window(9, 12, &mut rng) {
            assert!(idx < 8);
        }
    }
}

#[test]
fn epoch_shuffle_reuse_matches_training_order() {
    // The acceptance pipeline relies on epoch batching being stable.
    let cfg = WindowConfig {
        sequence_length: 4,
        batch_size: 8,
        shuffle_seed: 5,
    };
    assert_eq!(epoch_row_batches(20, &cfg, 0), epoch_row_batches(20, &cfg, 0));
}

#[test]
fn duration_windows_feed_training_shapes() {
    // Shape glue between dataset and models used by criteria 4 and 10.
    let (songs, dicts) = memorization_corpus();
    let corpus = append_end_flags(songs).unwrap();
    let cfg = WindowConfig {
        sequence_length: 8,
        batch_size: 4,
        shuffle_seed: 0,
    };
    let windows = chorale_core::dataset::make_duration_windows(&corpus, &dicts, &cfg).unwrap();
    let (x, t) = BatchProvider::<f64>::one_hot_batch(&windows, &[0, 1]);
    assert_eq!(x.shape(), &[2, 8, dicts.note_vocab() + 3]);
    assert_eq!(t.shape(), &[2, 3]);
    let spec = build_duration_model(dicts.note_vocab(), 0.0625);
    assert_eq!(spec.input_width, dicts.note_vocab() + 3);
}
