//! `birthmark`: build alphabets, train and score HMM/PHMM models, and run
//! cross-validated experiments over directories of trace files.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 degenerate data (with
//! `--strict`, or when a training sequence has probability zero).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "birthmark", version, about = "HMM and profile HMM software birthmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a symbol alphabet from one or more trace directories.
    Alphabet {
        #[arg(long = "traces", required = true, num_args = 1..)]
        traces: Vec<PathBuf>,
        #[arg(long, default_value_t = config::DEFAULT_MAX_SYMBOLS)]
        max_symbols: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train an HMM or a profile HMM on a trace directory.
    Train(TrainArgs),
    /// Score every trace in a directory against a model.
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        traces: PathBuf,
        /// Required for HMM models; PHMM files embed their alphabet.
        #[arg(long)]
        alphabet: Option<PathBuf>,
        /// Defaults to standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a k-fold experiment described by a config file.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[arg(long)]
        strict: bool,
    },
    /// Build and dump the multiple sequence alignment of a trace directory.
    Msa {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        alphabet: PathBuf,
        #[command(flatten)]
        scoring: ScoringArgs,
        #[arg(long)]
        group_size: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Defaults to standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Turn a score table into an ROC curve and print its AUC.
    Roc {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ScoringArgs {
    #[arg(long, default_value_t = birthmark_core::align::DEFAULT_GAP_OPEN)]
    gap_open: i64,
    #[arg(long, default_value_t = birthmark_core::align::DEFAULT_GAP_EXTEND)]
    gap_extend: i64,
    /// Substitution matrix file ("SUBST v1").
    #[arg(long)]
    subst: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// hmm, hmm-static, hmm-dynamic or phmm.
    #[arg(long)]
    model: String,
    #[arg(long)]
    traces: PathBuf,
    #[arg(long)]
    alphabet: PathBuf,
    #[arg(long, default_value_t = birthmark_core::hmm::DEFAULT_STATES)]
    states: usize,
    #[arg(long, default_value_t = birthmark_core::hmm::DEFAULT_ITERATIONS)]
    iterations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// PHMM only: align this many traces (seeded choice) instead of all.
    #[arg(long)]
    group_size: Option<usize>,
    #[command(flatten)]
    scoring: ScoringArgs,
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Alphabet {
            traces,
            max_symbols,
            out,
        } => commands::alphabet(&traces, max_symbols, &out),
        Command::Train(args) => commands::train(&args),
        Command::Score {
            model,
            traces,
            alphabet,
            out,
        } => commands::score(&model, &traces, alphabet.as_deref(), out.as_deref()),
        Command::Experiment {
            config,
            out_dir,
            strict,
        } => commands::experiment(&config, &out_dir, strict),
        Command::Msa {
            traces,
            alphabet,
            scoring,
            group_size,
            seed,
            out,
        } => commands::msa(&traces, &alphabet, &scoring, group_size, seed, out.as_deref()),
        Command::Roc { scores, out } => commands::roc(&scores, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
