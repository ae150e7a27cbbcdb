//! `prodesign build-vocab`: derive the text and SMILES vocabularies from a
//! triples corpus and write all three vocabulary files (the protein one is
//! fixed) in the shared versioned format.
//!
//! Records whose SMILES fail the grammar are skipped and reported rather
//! than aborting the build; identical corpora always produce identical
//! vocabulary files.

use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use prodesign_core::data::ingest;
use prodesign_core::io::atomic_write;
use prodesign_core::tokenize::smiles::lex;
use prodesign_core::tokenize::vocab::{build_vocabs, VocabCaps, VocabSource};
use prodesign_core::tokenize::{ProteinVocab, TokenizeError};

use crate::outln;
use crate::manifest::RunManifest;
use crate::CliError;

#[derive(Debug, Args)]
pub struct VocabArgs {
    /// Input triples file.
    #[arg(long)]
    pub input: PathBuf,
    /// Directory for text.vocab, smiles.vocab, and protein.vocab.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Maximum text vocabulary size, specials included.
    #[arg(long, default_value_t = 8192)]
    pub text_cap: usize,
    /// Maximum SMILES vocabulary size, specials included.
    #[arg(long, default_value_t = 1024)]
    pub smiles_cap: usize,
}

#[derive(Serialize)]
struct Skipped {
    id: String,
    reason: String,
}

#[derive(Serialize)]
struct TableSummary {
    size: usize,
    hash: String,
}

#[derive(Serialize)]
struct VocabReport {
    records_used: usize,
    skipped: Vec<Skipped>,
    text: TableSummary,
    smiles: TableSummary,
    protein: TableSummary,
}

pub fn run(args: &VocabArgs) -> Result<(), CliError> {
    let out = &args.out_dir;
    RunManifest::new(
        "build-vocab",
        serde_json::json!({ "text_cap": args.text_cap, "smiles_cap": args.smiles_cap }),
    )
    .input("triples", &args.input)
    .output("text", &out.join("text.vocab"))
    .output("smiles", &out.join("smiles.vocab"))
    .output("protein", &out.join("protein.vocab"))
    .output("report", &out.join("vocab-report.json"))
    .write(out)?;

    let ingested = ingest(&args.input)?;
    let mut usable = Vec::new();
    let mut skipped = Vec::new();
    for t in &ingested.triples {
        match lex(&t.smiles) {
            Ok(_) => usable.push(t),
            Err(e) => {
                log::warn!("record {}: {e}", t.id);
                skipped.push(Skipped {
                    id: t.id.clone(),
                    reason: e.to_string(),
                });
            }
        }
    }
    let caps = VocabCaps {
        text: args.text_cap,
        smiles: args.smiles_cap,
    };
    let sources = usable.iter().map(|t| VocabSource {
        instruction: &t.instruction,
        description: &t.description,
        smiles: &t.smiles,
        weight: t.multiplicity,
    });
    let (text, smiles) = build_vocabs(sources, &caps).map_err(|e| match e {
        TokenizeError::EmptyCorpus => CliError::Data(format!(
            "{}: no records with valid SMILES to build a vocabulary from",
            args.input.display()
        )),
        TokenizeError::CapacityTooSmall { .. } => CliError::Usage(e.to_string()),
        // Grammar errors were screened out above; reaching one here is a bug.
        other => CliError::Runtime(other.to_string()),
    })?;
    text.save(&out.join("text.vocab"))?;
    smiles.save(&out.join("smiles.vocab"))?;
    ProteinVocab::save(&out.join("protein.vocab"))?;

    let report = VocabReport {
        records_used: usable.len(),
        skipped,
        text: TableSummary {
            size: text.size(),
            hash: text.hash().to_string(),
        },
        smiles: TableSummary {
            size: smiles.size(),
            hash: smiles.hash().to_string(),
        },
        protein: TableSummary {
            size: ProteinVocab::SIZE,
            hash: ProteinVocab::hash(),
        },
    };
    let report_path = out.join("vocab-report.json");
    let mut body = serde_json::to_string_pretty(&report).expect("report serialization");
    body.push('\n');
    atomic_write(&report_path, body.as_bytes()).map_err(|e| CliError::write(&report_path, &e))?;

    outln!(
        "built vocabularies from {} records ({} skipped): text {} tokens, smiles {} tokens",
        report.records_used,
        report.skipped.len(),
        report.text.size,
        report.smiles.size,
    );
    Ok(())
}
