//! Command-line front end: ingest, train-notes, train-durations, generate,
//! gradcheck, eval-survey.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/format error. Every run
//! prints a provenance header (version, seed, config digest) on stderr so
//! any output can be reproduced from its header.

mod commands;
mod config;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use commands::{
    EvalSurveyArgs, GenerateArgs, GradcheckArgs, GradcheckModel, IngestArgs, SeedPlan, TrainArgs,
};
use config::{resolve, ConfigFile};
use sha2::{Digest, Sha256};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "chorale",
    version,
    about = "Single-track symbolic music pipeline: MIDI ingest, recurrent-model training, greedy generation, survey tables"
)]
struct Cli {
    /// Optional key = value config file; command-line flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a directory of MIDI files into a corpus, dictionaries,
    /// ingest stats, and a window index.
    Ingest {
        #[arg(long)]
        midi_dir: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        seq_len: Option<usize>,
    },
    /// Train the note model on a corpus.
    TrainNotes(TrainFlags),
    /// Train the duration model on a corpus.
    TrainDurations(TrainFlags),
    /// Generate a piece from trained checkpoints.
    Generate {
        #[arg(long)]
        checkpoint_notes: PathBuf,
        #[arg(long)]
        checkpoint_durations: PathBuf,
        #[arg(long)]
        dicts: PathBuf,
        #[arg(long)]
        length: Option<usize>,
        #[arg(long)]
        seq_len: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        tempo: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Verify analytic gradients against central finite differences.
    Gradcheck {
        #[arg(long)]
        scale: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        vocab: Option<usize>,
        #[arg(long)]
        seq_len: Option<usize>,
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long)]
        eps: Option<f64>,
        /// notes | durations | both
        #[arg(long, default_value = "both")]
        model: String,
    },
    /// Aggregate survey responses into the three evaluation tables.
    EvalSurvey {
        /// Comma-separated responses file.
        input: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct TrainFlags {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    dicts: PathBuf,
    /// Checkpoint output path.
    #[arg(long)]
    out: PathBuf,
    /// Optional tab-separated history log path.
    #[arg(long)]
    history: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seq_len: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Uniform width factor (1.0 = stock 512/256 widths).
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Early-stop patience in epochs; 0 disables early stopping.
    #[arg(long)]
    patience: Option<usize>,
    /// Write a checkpoint every K epochs while training.
    #[arg(long)]
    checkpoint_every: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    return ExitCode::SUCCESS;
                }
                _ => {}
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn provenance_header(seed: Option<u64>, resolved: &[(&str, String)]) {
    let mut canon = String::new();
    for (key, value) in resolved {
        canon.push_str(&format!("{key}={value}\n"));
    }
    let digest = Sha256::digest(canon.as_bytes());
    let short: String = digest[..6].iter().map(|b| format!("{b:02x}")).collect();
    let seed_text = seed.map_or("-".to_string(), |s| s.to_string());
    eprintln!(
        "chorale {} | seed {} | config {}",
        env!("CARGO_PKG_VERSION"),
        seed_text,
        short
    );
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let file = ConfigFile::load(cli.config.as_deref())?;
    match cli.command {
        Command::Ingest {
            midi_dir,
            out_dir,
            seq_len,
        } => {
            let seq_len = resolve(seq_len, &file, "seq_len", 50)?;
            provenance_header(
                None,
                &[
                    ("command", "ingest".into()),
                    ("midi_dir", midi_dir.display().to_string()),
                    ("seq_len", seq_len.to_string()),
                ],
            );
            commands::ingest(&IngestArgs {
                midi_dir,
                out_dir,
                seq_len,
            })
        }
        Command::TrainNotes(flags) => run_train(flags, &file, false),
        Command::TrainDurations(flags) => run_train(flags, &file, true),
        Command::Generate {
            checkpoint_notes,
            checkpoint_durations,
            dicts,
            length,
            seq_len,
            seed,
            tempo,
            out,
        } => {
            let length = resolve(length, &file, "length", 300)?;
            let seq_len = resolve(seq_len, &file, "seq_len", 50)?;
            let seed = resolve(seed, &file, "seed", 0)?;
            let tempo = resolve(tempo, &file, "tempo", 120.0)?;
            provenance_header(
                Some(seed),
                &[
                    ("command", "generate".into()),
                    ("length", length.to_string()),
                    ("seq_len", seq_len.to_string()),
                    ("seed", seed.to_string()),
                    ("tempo", tempo.to_string()),
                ],
            );
            commands::generate(&GenerateArgs {
                checkpoint_notes,
                checkpoint_durations,
                dicts,
                length,
                seq_len,
                seed,
                tempo,
                out,
            })
        }
        Command::Gradcheck {
            scale,
            seed,
            vocab,
            seq_len,
            batch,
            eps,
            model,
        } => {
            let args = GradcheckArgs {
                scale: resolve(scale, &file, "scale", 0.0625)?,
                seed: resolve(seed, &file, "seed", 0)?,
                vocab: resolve(vocab, &file, "vocab", 12)?,
                seq_len: resolve(seq_len, &file, "seq_len", 5)?,
                batch: resolve(batch, &file, "batch", 2)?,
                eps: resolve(eps, &file, "eps", 1e-5)?,
                model: match model.as_str() {
                    "notes" => GradcheckModel::Notes,
                    "durations" => GradcheckModel::Durations,
                    "both" => GradcheckModel::Both,
                    other => anyhow::bail!("unknown --model {other:?} (notes|durations|both)"),
                },
            };
            provenance_header(
                Some(args.seed),
                &[
                    ("command", "gradcheck".into()),
                    ("scale", args.scale.to_string()),
                    ("seed", args.seed.to_string()),
                    ("vocab", args.vocab.to_string()),
                    ("seq_len", args.seq_len.to_string()),
                    ("batch", args.batch.to_string()),
                    ("eps", args.eps.to_string()),
                    ("model", model),
                ],
            );
            commands::gradcheck(&args)
        }
        Command::EvalSurvey { input, out_dir } => {
            provenance_header(
                None,
                &[
                    ("command", "eval-survey".into()),
                    ("input", input.display().to_string()),
                ],
            );
            commands::eval_survey(&EvalSurveyArgs { input, out_dir })
        }
    }
}

fn run_train(flags: TrainFlags, file: &ConfigFile, durations: bool) -> anyhow::Result<()> {
    let epochs = resolve(flags.epochs, file, "epochs", 100)?;
    let seq_len = resolve(flags.seq_len, file, "seq_len", 50)?;
    let batch_size = resolve(flags.batch_size, file, "batch_size", 64)?;
    let scale = resolve(flags.scale, file, "scale", 1.0)?;
    let seed = resolve(flags.seed, file, "seed", 0)?;
    let lr = resolve(flags.lr, file, "lr", 1e-3)?;
    let rho = resolve(flags.rho, file, "rho", 0.9)?;
    let epsilon = resolve(flags.epsilon, file, "epsilon", 1e-7)?;
    let patience_raw = resolve(flags.patience, file, "patience", 10)?;
    let patience = (patience_raw > 0).then_some(patience_raw);
    let command = if durations {
        "train-durations"
    } else {
        "train-notes"
    };
    provenance_header(
        Some(seed),
        &[
            ("command", command.into()),
            ("epochs", epochs.to_string()),
            ("seq_len", seq_len.to_string()),
            ("batch_size", batch_size.to_string()),
            ("scale", scale.to_string()),
            ("seed", seed.to_string()),
            ("lr", lr.to_string()),
            ("rho", rho.to_string()),
            ("epsilon", epsilon.to_string()),
            ("patience", patience_raw.to_string()),
        ],
    );
    commands::train_model(
        &TrainArgs {
            corpus: flags.corpus,
            dicts: flags.dicts,
            out: flags.out,
            history: flags.history,
            epochs,
            seq_len,
            batch_size,
            scale,
            seeds: SeedPlan::new(seed),
            optimizer: chorale_core::nn::rmsprop::RmspropConfig {
                learning_rate: lr,
                rho,
                epsilon,
            },
            patience,
            checkpoint_every: flags.checkpoint_every,
        },
        durations,
    )
}
