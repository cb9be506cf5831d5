//! Command implementations for the `dari` binary.

pub mod commands;
pub mod restore;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Punctuation restoration pipeline for low-resource text.
#[derive(Parser)]
#[command(name = "dari", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Run configuration file (key=value lines).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Override the config seed (parameter init and augmentation).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory, overriding the config's `out_dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand)]
pub enum Command {
    /// Convert raw punctuated text into a token/label TSV corpus.
    Prepare {
        /// Raw UTF-8 text; blank lines separate documents.
        #[arg(long)]
        input: PathBuf,
        /// Output corpus path.
        #[arg(long = "out-tsv")]
        out_tsv: PathBuf,
    },
    /// Generate a synthetic labeled corpus for desk-scale experiments.
    Synth {
        /// Number of tokens to generate.
        #[arg(long)]
        tokens: usize,
        /// Output corpus path.
        #[arg(long = "out-tsv")]
        out_tsv: PathBuf,
        /// Class priors as PERIOD,COMMA,QUESTION,EXCLAMATION,O.
        #[arg(long, default_value = "0.08,0.05,0.01,0.01,0.85")]
        priors: String,
        /// Generator seed (separate from the training seed).
        #[arg(long = "gen-seed", default_value_t = 0)]
        gen_seed: u64,
    },
    /// Train a BPE subword model on a TSV corpus.
    TrainBpe {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 4000)]
        merges: usize,
        #[arg(long = "out-model")]
        out_model: PathBuf,
    },
    /// Apply ASR-noise augmentation to a corpus, emitting a piece stream.
    Augment {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        bpe: PathBuf,
        #[arg(long)]
        alpha: f64,
        #[arg(long = "sub-prob", default_value_t = 0.4)]
        sub_prob: f64,
        #[arg(long = "del-prob", default_value_t = 0.4)]
        del_prob: f64,
        /// Output piece-stream path (`piece<TAB>label` lines, IGNORE allowed).
        #[arg(long = "out-pieces")]
        out_pieces: PathBuf,
    },
    /// Train the tagger per the run configuration.
    Train,
    /// Evaluate a checkpoint on a test corpus.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        bpe: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Name used in the emitted report files.
        #[arg(long, default_value = "test")]
        name: String,
    },
    /// Restore punctuation in raw unpunctuated text.
    Restore {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        bpe: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(long = "out-text")]
        out_text: Option<PathBuf>,
        /// Window length for sliding-window inference.
        #[arg(long = "seq-len", default_value_t = 256)]
        seq_len: usize,
    },
    /// Train and evaluate across an augmentation-strength grid.
    Ablate {
        /// Comma-separated alpha grid; `none` disables augmentation.
        #[arg(long, default_value = "none,0.10,0.15,0.20")]
        alphas: String,
    },
}

/// Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
/// failure. Clap usage errors also exit with 2.
pub fn exit_code(err: &dari_core::Error) -> u8 {
    match err.kind() {
        dari_core::ErrorKind::Config => 2,
        dari_core::ErrorKind::Data => 3,
        dari_core::ErrorKind::Numeric => 4,
    }
}

pub fn run(cli: Cli) -> ExitCode {
    let result = match cli.command {
        Command::Prepare {
            ref input,
            ref out_tsv,
        } => commands::prepare(input, out_tsv),
        Command::Synth {
            tokens,
            ref out_tsv,
            ref priors,
            gen_seed,
        } => commands::synth(gen_seed, tokens, priors, out_tsv),
        Command::TrainBpe {
            ref input,
            merges,
            ref out_model,
        } => commands::train_bpe(input, merges, out_model),
        Command::Augment {
            ref input,
            ref bpe,
            alpha,
            sub_prob,
            del_prob,
            ref out_pieces,
        } => commands::augment(input, bpe, alpha, sub_prob, del_prob, cli.seed, out_pieces),
        Command::Train => commands::train(cli.config.as_deref(), cli.seed, cli.out.as_deref()),
        Command::Evaluate {
            ref checkpoint,
            ref bpe,
            ref test,
            ref name,
        } => commands::evaluate(checkpoint, bpe, test, name, cli.out.as_deref()),
        Command::Restore {
            ref checkpoint,
            ref bpe,
            ref input,
            ref out_text,
            seq_len,
        } => commands::restore(checkpoint, bpe, input, out_text.as_deref(), seq_len),
        Command::Ablate { ref alphas } => {
            commands::ablate(cli.config.as_deref(), alphas, cli.seed, cli.out.as_deref())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("dari: error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
