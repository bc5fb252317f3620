//! Subcommand implementations.

use anyhow::{bail, Context, Result};
use chorale_core::checkpoint::{save_to_path, Checkpoint, CheckpointMeta};
use chorale_core::dataset::{
    append_end_flags, compute_coverage_index, make_duration_windows, make_note_windows,
    write_window_index, BatchProvider, WindowConfig,
};
use chorale_core::generate::{
    assemble_piece, generate_durations, generate_notes, GenerationConfig, Provenance,
};
use chorale_core::midi::{extract_note_events, parse_smf};
use chorale_core::models::{
    build_duration_model, build_note_model, init_network, train, ModelSpec, TrainConfig,
};
use chorale_core::nn::rmsprop::RmspropConfig;
use chorale_core::nn::{gradient_check, GradCheckConfig, Network};
use chorale_core::rational::format_fixed;
use chorale_core::survey::{aggregate_scores, distinguish_rates, familiarity_rates, parse_responses};
use chorale_core::tensor::Tensor;
use chorale_core::tokenizer::{
    read_corpus, tokenize_song, write_corpus, QuantizationHistogram, TokenDicts, TokenizedSong,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

/// All randomness in a run flows from one master seed.
pub struct SeedPlan {
    pub master: u64,
    pub init: u64,
    pub dropout: u64,
    pub shuffle: u64,
}

impl SeedPlan {
    pub fn new(master: u64) -> Self {
        SeedPlan {
            master,
            init: master,
            dropout: master.wrapping_add(1),
            shuffle: master.wrapping_add(2),
        }
    }
}

pub struct IngestArgs {
    pub midi_dir: PathBuf,
    pub out_dir: PathBuf,
    pub seq_len: usize,
}

pub fn ingest(args: &IngestArgs) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(&args.midi_dir)
        .with_context(|| format!("reading {}", args.midi_dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("mid") || e.eq_ignore_ascii_case("midi"))
        })
        .collect();
    entries.sort();
    if entries.is_empty() {
        bail!("no .mid files in {}", args.midi_dir.display());
    }

    let mut songs: Vec<TokenizedSong> = Vec::new();
    let mut histogram = QuantizationHistogram::default();
    let mut parse_failures = 0usize;
    let mut empty_songs = 0usize;
    let mut dangling = 0usize;
    let mut event_total = 0usize;
    for path in &entries {
        let bytes = fs::read(path)?;
        let song = match parse_smf(&bytes) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("warning: skipping {}: {e}", path.display());
                parse_failures += 1;
                continue;
            }
        };
        let (events, stats) = extract_note_events(&song);
        dangling += stats.dangling_note_ons + stats.zero_duration_notes;
        if events.is_empty() {
            empty_songs += 1;
            continue;
        }
        event_total += events.len();
        for event in &events {
            histogram.record(event.dur_ql());
        }
        let (notes, durations) = tokenize_song(&events);
        songs.push(TokenizedSong { notes, durations });
    }
    if songs.is_empty() {
        bail!("no usable songs found (parse failures: {parse_failures}, empty: {empty_songs})");
    }

    fs::create_dir_all(&args.out_dir)?;
    let corpus_text = write_corpus(&songs);
    let corpus_path = args.out_dir.join("corpus.txt");
    fs::write(&corpus_path, &corpus_text)?;
    let corpus_hash: [u8; 32] = Sha256::digest(corpus_text.as_bytes()).into();

    let dicts = TokenDicts::build(&songs)?;
    fs::write(args.out_dir.join("dicts.json"), dicts.to_json())?;

    let flagged = append_end_flags(songs)?;
    let coverage = compute_coverage_index(&flagged, args.seq_len)?;
    let window_cfg = WindowConfig {
        sequence_length: args.seq_len,
        batch_size: 1,
        shuffle_seed: 0,
    };
    let windows = match make_note_windows(&flagged, &dicts, &window_cfg) {
        Ok(ws) => {
            fs::write(
                args.out_dir.join("windows.idx"),
                write_window_index(&ws, &corpus_hash),
            )?;
            Some(ws)
        }
        Err(e) => {
            eprintln!("warning: no window index written: {e}");
            None
        }
    };

    let mut stats = String::new();
    let _ = writeln!(stats, "songs: {}", flagged.len());
    let _ = writeln!(stats, "events_total: {event_total}");
    let _ = writeln!(stats, "note_vocab (incl end flag): {}", dicts.note_vocab());
    let _ = writeln!(stats, "duration_vocab: {}", dicts.dur_vocab());
    let _ = writeln!(
        stats,
        "coverage_index: {} (sequence_length {} over mean song length)",
        format_fixed(coverage.0, 4),
        args.seq_len
    );
    if let Some(ws) = &windows {
        let _ = writeln!(stats, "windows: {}", ws.len());
        let _ = writeln!(stats, "songs_too_short_for_windows: {}", ws.skipped_songs());
    }
    let _ = writeln!(stats, "parse_failures: {parse_failures}");
    let _ = writeln!(stats, "empty_songs_skipped: {empty_songs}");
    let _ = writeln!(stats, "dropped_or_zero_length_notes: {dangling}");
    let _ = writeln!(stats, "duration_quantization_error_histogram (quarter-lengths):");
    let _ = writeln!(stats, "{histogram}");
    fs::write(args.out_dir.join("stats.txt"), &stats)?;
    print!("{stats}");
    Ok(())
}

pub struct TrainArgs {
    pub corpus: PathBuf,
    pub dicts: PathBuf,
    pub out: PathBuf,
    pub history: Option<PathBuf>,
    pub epochs: usize,
    pub seq_len: usize,
    pub batch_size: usize,
    pub scale: f64,
    pub seeds: SeedPlan,
    pub optimizer: RmspropConfig,
    pub patience: Option<usize>,
    pub checkpoint_every: Option<usize>,
}

fn load_corpus_and_dicts(
    corpus: &Path,
    dicts: &Path,
) -> Result<(Vec<TokenizedSong>, TokenDicts)> {
    let corpus_text =
        fs::read_to_string(corpus).with_context(|| format!("reading {}", corpus.display()))?;
    let songs = read_corpus(&corpus_text)?;
    let dicts_text =
        fs::read_to_string(dicts).with_context(|| format!("reading {}", dicts.display()))?;
    let dicts = TokenDicts::from_json(&dicts_text)?;
    Ok((songs, dicts))
}

pub fn train_model(args: &TrainArgs, durations: bool) -> Result<()> {
    let (songs, dicts) = load_corpus_and_dicts(&args.corpus, &args.dicts)?;
    let flagged = append_end_flags(songs)?;
    let window_cfg = WindowConfig {
        sequence_length: args.seq_len,
        batch_size: args.batch_size,
        shuffle_seed: args.seeds.shuffle,
    };

    let spec = if durations {
        build_duration_model(dicts.note_vocab(), args.scale)
    } else {
        build_note_model(dicts.note_vocab(), args.scale)
    };
    let mut net: Network<f64> = init_network(&spec, args.seeds.init)?;
    let mut meta = CheckpointMeta::new(spec, args.optimizer, &dicts, args.seeds.master);
    let train_cfg = TrainConfig {
        epochs: args.epochs,
        patience: args.patience,
        target_accuracy: None,
        clip_norm: Some(chorale_core::models::DEFAULT_CLIP_NORM),
        optimizer: args.optimizer,
        dropout_seed: args.seeds.dropout,
        checkpoint: args.checkpoint_every.map(|every| {
            chorale_core::models::CheckpointCadence {
                every_epochs: every,
                path: args.out.clone(),
                meta: meta.clone(),
            }
        }),
    };

    let (history, opt) = if durations {
        let windows = make_duration_windows(&flagged, &dicts, &window_cfg)?;
        eprintln!("duration windows: {}", BatchProvider::<f64>::rows(&windows));
        train(&mut net, &windows, &window_cfg, &train_cfg)?
    } else {
        let windows = make_note_windows(&flagged, &dicts, &window_cfg)?;
        eprintln!("note windows: {}", BatchProvider::<f64>::rows(&windows));
        train(&mut net, &windows, &window_cfg, &train_cfg)?
    };

    meta.epoch = history.records.len() as u64;
    save_to_path(&args.out, &net, &opt, &meta)?;
    print!("{}", history.to_log());
    if let Some(path) = &args.history {
        fs::write(path, history.to_log())?;
    }
    eprintln!(
        "trained {} epochs, final accuracy {:.4}, checkpoint {}",
        history.records.len(),
        history.final_accuracy(),
        args.out.display()
    );
    Ok(())
}

pub struct GenerateArgs {
    pub checkpoint_notes: PathBuf,
    pub checkpoint_durations: PathBuf,
    pub dicts: PathBuf,
    pub length: usize,
    pub seq_len: usize,
    pub seed: u64,
    pub tempo: f64,
    pub out: PathBuf,
}

pub fn generate(args: &GenerateArgs) -> Result<()> {
    let dicts_text = fs::read_to_string(&args.dicts)
        .with_context(|| format!("reading {}", args.dicts.display()))?;
    let dicts = TokenDicts::from_json(&dicts_text)?;

    let notes_bytes = fs::read(&args.checkpoint_notes)?;
    let durs_bytes = fs::read(&args.checkpoint_durations)?;
    let notes_ckpt = Checkpoint::from_bytes(&notes_bytes)?;
    let durs_ckpt = Checkpoint::from_bytes(&durs_bytes)?;
    notes_ckpt.verify_dicts(&dicts)?;
    durs_ckpt.verify_dicts(&dicts)?;
    let (note_net, _) = notes_ckpt.restore::<f64>()?;
    let (dur_net, _) = durs_ckpt.restore::<f64>()?;

    let cfg = GenerationConfig {
        length: args.length,
        sequence_length: args.seq_len,
        seed: args.seed,
        tempo_bpm: args.tempo,
    };
    let notes = generate_notes(&note_net, &dicts, &cfg)?;
    let durations = generate_durations(&dur_net, &notes, &dicts, args.seq_len)?;
    let provenance = Provenance {
        notes_checkpoint_sha256: hex(&Sha256::digest(&notes_bytes)),
        durations_checkpoint_sha256: hex(&Sha256::digest(&durs_bytes)),
        dicts_sha256: hex(&Sha256::digest(dicts_text.as_bytes())),
    };
    let piece = assemble_piece(&notes, &durations, &dicts, &cfg, provenance)?;

    fs::write(&args.out, &piece.midi_bytes)?;
    let report_path = sidecar_path(&args.out);
    fs::write(&report_path, piece.report.render())?;
    print!("{}", piece.report.render());
    eprintln!(
        "wrote {} and {}",
        args.out.display(),
        report_path.display()
    );
    Ok(())
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".report.txt");
    out.with_file_name(name)
}

fn hex(digest: &[u8]) -> String {
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub struct GradcheckArgs {
    pub scale: f64,
    pub seed: u64,
    pub vocab: usize,
    pub seq_len: usize,
    pub batch: usize,
    pub eps: f64,
    pub model: GradcheckModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradcheckModel {
    Notes,
    Durations,
    Both,
}

fn random_one_hot_batch(
    m: usize,
    n: usize,
    width: usize,
    hot_per_step: &[usize],
    targets_width: usize,
    seed: u64,
) -> (Tensor<f64>, Tensor<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Tensor::zeros(&[m, n, width]);
    let mut t = Tensor::zeros(&[m, targets_width]);
    for i in 0..m {
        for step in 0..n {
            let mut base = 0;
            for &section in hot_per_step {
                let idx = rng.gen_range(0..section);
                x.data_mut()[i * n * width + step * width + base + idx] = 1.0;
                base += section;
            }
        }
        let idx = rng.gen_range(0..targets_width);
        t.data_mut()[i * targets_width + idx] = 1.0;
    }
    (x, t)
}

fn check_one(spec: ModelSpec, label: &str, args: &GradcheckArgs) -> Result<f64> {
    let net: Network<f64> = init_network(&spec, args.seed)?;
    let hot: Vec<usize> = if spec.input_width == args.vocab {
        vec![args.vocab]
    } else {
        vec![args.vocab, 3]
    };
    let (x, t) = random_one_hot_batch(
        args.batch,
        args.seq_len,
        spec.input_width,
        &hot,
        spec.output_width,
        args.seed.wrapping_add(99),
    );
    let cfg = GradCheckConfig {
        eps: args.eps,
        samples_per_tensor: 200,
        seed: args.seed,
        dropout_active: false,
    };
    let report = gradient_check(&net, &x, &t, &cfg)?;
    println!(
        "{label} model: max relative error {:.3e} over {} coordinates (worst: {} [{}] analytic {:.6e} vs numeric {:.6e})",
        report.max_rel_error,
        report.coords_checked,
        report.worst_tensor,
        report.worst_index,
        report.worst_analytic,
        report.worst_numeric
    );
    Ok(report.max_rel_error)
}

pub fn gradcheck(args: &GradcheckArgs) -> Result<()> {
    let mut worst: f64 = 0.0;
    if matches!(args.model, GradcheckModel::Notes | GradcheckModel::Both) {
        worst = worst.max(check_one(
            build_note_model(args.vocab, args.scale),
            "note",
            args,
        )?);
    }
    if matches!(args.model, GradcheckModel::Durations | GradcheckModel::Both) {
        worst = worst.max(check_one(
            build_duration_model(args.vocab, args.scale),
            "duration",
            args,
        )?);
    }
    if worst >= 1e-4 {
        bail!("gradient check failed: max relative error {worst:.3e} >= 1e-4");
    }
    println!("gradient check passed: max relative error {worst:.3e} < 1e-4");
    Ok(())
}

pub struct EvalSurveyArgs {
    pub input: PathBuf,
    pub out_dir: Option<PathBuf>,
}

pub fn eval_survey(args: &EvalSurveyArgs) -> Result<()> {
    let text = fs::read_to_string(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let responses = parse_responses(&text)?;
    let scores = aggregate_scores(&responses)?;
    let distinguish = distinguish_rates(&responses)?;
    let familiar = familiarity_rates(&responses)?;

    println!("evaluation scores ({} respondents)", scores.respondents);
    print!("{}", scores.render_text());
    println!();
    print!("{}", distinguish.render_text());
    println!();
    print!("{}", familiar.render_text());

    if let Some(dir) = &args.out_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("scores.csv"), scores.render_csv())?;
        fs::write(dir.join("distinguish_rates.csv"), distinguish.render_csv())?;
        fs::write(dir.join("familiarity_rates.csv"), familiar.render_csv())?;
        eprintln!("wrote tables to {}", dir.display());
    }
    Ok(())
}
