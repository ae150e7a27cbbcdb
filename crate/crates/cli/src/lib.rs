//! `prodesign`: one binary exposing the pipeline end to end — curate a corpus,
//! build vocabularies, train, generate sequences, evaluate them, and inspect
//! any artifact the other commands produced.
//!
//! Every command writes a run manifest into its output directory before the
//! real work starts, and all file writes go through write-to-temp plus atomic
//! rename, so a failed run never leaves partial outputs behind. Exit codes:
//! 0 success, 2 usage or configuration, 3 data or integrity, 4 runtime.

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod manifest;

use commands::{curate, evaluate, generate, inspect, train, vocab};

/// Conditional protein sequence design pipeline.
#[derive(Debug, Parser)]
#[command(name = "prodesign", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate, deduplicate, cluster, and split a triples corpus.
    Curate(curate::CurateArgs),
    /// Derive text and SMILES vocabularies from a triples corpus.
    BuildVocab(vocab::VocabArgs),
    /// Train a model and write resumable checkpoints.
    Train(train::TrainArgs),
    /// Decode protein sequences from a checkpoint for a batch of requests.
    Generate(generate::GenerateArgs),
    /// Score generated sequences against references; optionally emit
    /// evaluation job directories for external structure tools.
    Evaluate(evaluate::EvaluateArgs),
    /// Summarize an artifact: checkpoint, vocabulary, triples, FASTA, or JSON.
    Inspect(inspect::InspectArgs),
}

/// What went wrong, bucketed by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, missing inputs, or invalid configuration (exit 2).
    Usage(String),
    /// Inputs that exist but fail validation or integrity checks (exit 3).
    Data(String),
    /// Failures while doing the work: non-finite numerics, write errors (exit 4).
    Runtime(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Data(_) => "data",
            CliError::Runtime(_) => "runtime",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Runtime(m) => m,
        }
    }

    /// Classify a failure to read an input file: a missing path is a usage
    /// error, anything else is a data problem.
    pub fn read(path: &std::path::Path, source: &std::io::Error) -> Self {
        let msg = format!("cannot read {}: {source}", path.display());
        if source.kind() == std::io::ErrorKind::NotFound {
            CliError::Usage(msg)
        } else {
            CliError::Data(msg)
        }
    }

    /// A failure to write an output artifact.
    pub fn write(path: &std::path::Path, source: &std::io::Error) -> Self {
        CliError::Runtime(format!("cannot write {}: {source}", path.display()))
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.message())
    }
}

impl std::error::Error for CliError {}

impl From<prodesign_core::data::DataError> for CliError {
    fn from(e: prodesign_core::data::DataError) -> Self {
        use prodesign_core::data::DataError::*;
        match e {
            Io { ref path, ref source } => CliError::read(path, source),
            InvalidThreshold { .. } | InvalidKmerLen => CliError::Usage(e.to_string()),
            BadHeader { .. } | EmptyClusterList | UnclusteredSequence { .. } => {
                CliError::Data(e.to_string())
            }
            Metrics(m) => m.into(),
        }
    }
}

impl From<prodesign_core::metrics::MetricsError> for CliError {
    fn from(e: prodesign_core::metrics::MetricsError) -> Self {
        use prodesign_core::metrics::MetricsError::*;
        match e {
            Io { .. } => CliError::Runtime(e.to_string()),
            EmptySequence { .. } | TooFewSequences { .. } | InvalidCaseId { .. } => {
                CliError::Data(e.to_string())
            }
        }
    }
}

impl From<prodesign_core::tokenize::vocab::VocabIoError> for CliError {
    fn from(e: prodesign_core::tokenize::vocab::VocabIoError) -> Self {
        use prodesign_core::tokenize::vocab::VocabIoError::*;
        match &e {
            Io { path, source } => CliError::read(std::path::Path::new(path), source),
            BadHeader { .. }
            | KindMismatch { .. }
            | HashMismatch { .. }
            | EmptyToken { .. }
            | DuplicateToken { .. }
            | SpecialMismatch { .. } => CliError::Data(e.to_string()),
        }
    }
}

impl From<prodesign_core::model::ConfigError> for CliError {
    fn from(e: prodesign_core::model::ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<prodesign_core::model::ModelError> for CliError {
    fn from(e: prodesign_core::model::ModelError) -> Self {
        use prodesign_core::model::ModelError::*;
        match e {
            Config(c) => c.into(),
            NonFinite { .. } => CliError::Runtime(e.to_string()),
            BosRequired | Tensor(_) => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<prodesign_core::checkpoint::CheckpointError> for CliError {
    fn from(e: prodesign_core::checkpoint::CheckpointError) -> Self {
        use prodesign_core::checkpoint::CheckpointError::*;
        match &e {
            Io { path, source } => CliError::read(std::path::Path::new(path), source),
            BadMagic { .. }
            | BadVersion { .. }
            | Corrupt { .. }
            | VocabMismatch { .. }
            | NonFinite { .. } => CliError::Data(e.to_string()),
        }
    }
}

impl From<prodesign_core::train::TrainError> for CliError {
    fn from(e: prodesign_core::train::TrainError) -> Self {
        use prodesign_core::train::TrainError::*;
        match e {
            Config { .. } | StepOutOfRange { .. } => CliError::Usage(e.to_string()),
            EmptyDataset | NoUsableExamples => CliError::Data(e.to_string()),
            NonFiniteGradient { .. } | NonFiniteLoss { .. } => CliError::Runtime(e.to_string()),
            Model(m) => m.into(),
            Tensor(t) => CliError::Runtime(t.to_string()),
            Checkpoint(c) => c.into(),
            Log(io) => CliError::Runtime(format!("cannot write the training log: {io}")),
        }
    }
}

/// Write a line to stdout, treating a closed pipe as success so that
/// `prodesign inspect ... | head` exits quietly instead of panicking.
pub(crate) fn emit_line(text: std::fmt::Arguments<'_>) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    if let Err(e) = writeln!(out, "{text}") {
        if e.kind() != std::io::ErrorKind::BrokenPipe {
            log::warn!("stdout write failed: {e}");
        }
    }
}

macro_rules! outln {
    ($($arg:tt)*) => { $crate::emit_line(format_args!($($arg)*)) };
}
pub(crate) use outln;

/// Parse arguments, run the chosen command, and translate the outcome into an
/// exit code. Failures also print a machine-readable record to stderr.
pub fn run() -> i32 {
    let _ = env_logger::Builder::from_env(
        env_logger::Env::default().default_filter_or("warn"),
    )
    .try_init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Curate(args) => curate::run(args),
        Command::BuildVocab(args) => vocab::run(args),
        Command::Train(args) => train::run(args),
        Command::Generate(args) => generate::run(args),
        Command::Evaluate(args) => evaluate::run(args),
        Command::Inspect(args) => inspect::run(args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let record = serde_json::json!({
                "error": e.message(),
                "kind": e.kind(),
                "exit_code": e.code(),
            });
            eprintln!("{record}");
            e.code()
        }
    }
}
