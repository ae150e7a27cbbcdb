//! `prodesign generate`: load a checkpoint, decode one batch of requests,
//! and write the designs as FASTA plus per-sequence metadata as JSONL.
//!
//! A request that fails (for instance, the model ends the sequence before
//! any residue) is recorded in the metadata and does not abort the batch.

use std::collections::HashSet;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::Deserialize;

use prodesign_core::checkpoint;
use prodesign_core::generate::{
    fasta_records, metadata_records, GenerationRequest, Generator, Mode, DEFAULT_MAX_LENGTH,
};
use prodesign_core::io::{read_jsonl, write_fasta, write_jsonl};
use prodesign_core::tokenize::{SmilesVocab, TextVocab};
use prodesign_core::tokenize::Tokenizers;

use crate::outln;
use crate::manifest::RunManifest;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Greedy,
    Nucleus,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Model checkpoint to decode from.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Requests file: one JSON record per line with id, description, smiles,
    /// and optionally instruction.
    #[arg(long)]
    pub requests: PathBuf,
    /// Directory for designs.fasta and generation.jsonl.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Directory holding text.vocab and smiles.vocab; defaults to the
    /// checkpoint's directory.
    #[arg(long)]
    pub vocab_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModeArg::Greedy)]
    pub mode: ModeArg,
    /// Nucleus mass threshold; used only with --mode nucleus.
    #[arg(long, default_value_t = 0.4)]
    pub nucleus_p: f64,
    /// Sequences to decode per request (nucleus mode).
    #[arg(long, default_value_t = 1)]
    pub num_samples: usize,
    /// Residue cap per sequence.
    #[arg(long, default_value_t = DEFAULT_MAX_LENGTH)]
    pub max_length: usize,
    /// Sampling seed; sample k of a request draws from stream seed + k.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// One line of the requests file. Decode settings come from the flags, so a
/// run is a single sampling configuration over many prompts.
#[derive(Debug, Deserialize)]
struct Prompt {
    id: String,
    #[serde(default)]
    instruction: String,
    description: String,
    smiles: String,
}

pub fn run(args: &GenerateArgs) -> Result<(), CliError> {
    let vocab_dir = match &args.vocab_dir {
        Some(dir) => dir.clone(),
        None => args
            .checkpoint
            .parent()
            .map(|p| p.to_path_buf())
            .unwrap_or_else(|| PathBuf::from(".")),
    };
    let text = TextVocab::load(&vocab_dir.join("text.vocab"))?;
    let smiles = SmilesVocab::load(&vocab_dir.join("smiles.vocab"))?;
    let tokenizers = Tokenizers { text, smiles };
    let hashes = tokenizers.hashes();
    let snapshot = checkpoint::load(&args.checkpoint, &hashes)?;

    let prompts: Vec<Prompt> =
        read_jsonl(&args.requests).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => CliError::read(&args.requests, &e),
            _ => CliError::Usage(format!("{}: {e}", args.requests.display())),
        })?;
    if prompts.is_empty() {
        return Err(CliError::Usage(format!(
            "{}: requests file has no records",
            args.requests.display()
        )));
    }
    let mut seen = HashSet::new();
    for p in &prompts {
        if !seen.insert(p.id.as_str()) {
            return Err(CliError::Usage(format!(
                "duplicate request id {:?}: FASTA headers would collide",
                p.id
            )));
        }
    }

    let mode = match args.mode {
        ModeArg::Greedy => Mode::Greedy,
        ModeArg::Nucleus => Mode::Nucleus { p: args.nucleus_p },
    };
    let requests: Vec<GenerationRequest> = prompts
        .iter()
        .map(|p| GenerationRequest {
            id: p.id.clone(),
            instruction: p.instruction.clone(),
            description: p.description.clone(),
            smiles: p.smiles.clone(),
            mode,
            num_samples: args.num_samples,
            max_length: args.max_length,
            seed: args.seed,
        })
        .collect();
    for r in &requests {
        r.validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }

    let out = &args.out_dir;
    RunManifest::new(
        "generate",
        serde_json::json!({
            "mode": mode,
            "num_samples": args.num_samples,
            "max_length": args.max_length,
            "checkpoint_step": snapshot.step,
        }),
    )
    .seed(args.seed)
    .input("checkpoint", &args.checkpoint)
    .input("requests", &args.requests)
    .input("vocab_dir", &vocab_dir)
    .output("designs", &out.join("designs.fasta"))
    .output("metadata", &out.join("generation.jsonl"))
    .vocab(&hashes)
    .stamped()
    .write(out)?;

    let generator = Generator::new(&snapshot.state, &tokenizers);
    let results = generator.generate_batch(&requests);

    let fasta_path = out.join("designs.fasta");
    write_fasta(&fasta_path, &fasta_records(&results))
        .map_err(|e| CliError::write(&fasta_path, &e))?;
    let meta_path = out.join("generation.jsonl");
    let metadata = metadata_records(&results);
    write_jsonl(&meta_path, &metadata).map_err(|e| CliError::write(&meta_path, &e))?;

    let failures: Vec<&str> = results
        .iter()
        .filter(|r| r.outcome.is_err())
        .map(|r| r.request.id.as_str())
        .collect();
    let sequences = metadata.iter().filter(|m| m.error.is_none()).count();
    for id in &failures {
        log::warn!("request {id} failed; see generation.jsonl");
    }
    outln!(
        "decoded {} requests into {} sequences ({} failed); designs in {}",
        requests.len(),
        sequences,
        failures.len(),
        fasta_path.display(),
    );
    Ok(())
}
