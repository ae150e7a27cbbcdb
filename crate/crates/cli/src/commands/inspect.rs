//! `prodesign inspect`: identify an artifact by its magic bytes or header
//! line and print a short structured summary. Integrity problems (corrupted
//! checkpoints, vocabulary files whose content does not match their declared
//! hash) exit 3.

use std::path::PathBuf;

use clap::Args;

use prodesign_core::checkpoint;
use prodesign_core::data::ingest;
use prodesign_core::io::read_fasta;
use prodesign_core::tokenize::vocab::hash_tokens;

use crate::outln;
use crate::CliError;

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// Checkpoint, vocabulary, triples, FASTA, or JSON/JSONL file.
    pub path: PathBuf,
}

pub fn run(args: &InspectArgs) -> Result<(), CliError> {
    let path = &args.path;
    let bytes = std::fs::read(path).map_err(|e| CliError::read(path, &e))?;
    if bytes.starts_with(b"IPRO") {
        return inspect_checkpoint(args);
    }
    let text = match std::str::from_utf8(&bytes) {
        Ok(t) => t,
        Err(_) => {
            return Err(CliError::Data(format!(
                "{}: neither a checkpoint nor a text artifact",
                path.display()
            )))
        }
    };
    let first = text.lines().next().unwrap_or("");
    if first.starts_with("#vocab v1") {
        inspect_vocab(args, text)
    } else if first == "#triples v1" {
        inspect_triples(args)
    } else if first.starts_with('>') {
        inspect_fasta(args)
    } else if first.trim_start().starts_with('{') {
        inspect_json(args, text)
    } else {
        Err(CliError::Data(format!(
            "{}: unrecognized artifact format",
            path.display()
        )))
    }
}

fn inspect_checkpoint(args: &InspectArgs) -> Result<(), CliError> {
    let header = checkpoint::peek(&args.path)?;
    let c = &header.config;
    outln!("kind: checkpoint");
    outln!("step: {}", header.step);
    outln!("records: {}", header.records);
    outln!(
        "text encoder: {} ({} layers x {} heads x {} wide)",
        if c.use_text_encoder { "on" } else { "off" },
        c.text.layers,
        c.text.heads,
        c.text.width
    );
    outln!(
        "ligand encoder: {} ({} layers x {} heads x {} wide)",
        if c.use_ligand_encoder { "on" } else { "off" },
        c.ligand.layers,
        c.ligand.heads,
        c.ligand.width
    );
    outln!(
        "memory module: {} ({} rows)",
        if c.use_memory_module { "on" } else { "off" },
        c.memory_size
    );
    outln!(
        "decoder: {} layers x {} heads x {} wide",
        c.decoder.layers, c.decoder.heads, c.decoder.width
    );
    outln!(
        "vocabularies: text {} / ligand {} / protein {}",
        c.text_vocab, c.ligand_vocab, c.protein_vocab
    );
    outln!("text vocab hash: {}", header.vocab.text);
    outln!("smiles vocab hash: {}", header.vocab.smiles);
    outln!("protein vocab hash: {}", header.vocab.protein);
    Ok(())
}

fn inspect_vocab(args: &InspectArgs, text: &str) -> Result<(), CliError> {
    let display = args.path.display();
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (kind, declared) = match fields.as_slice() {
        ["#vocab", "v1", kind, hash] => (*kind, *hash),
        _ => {
            return Err(CliError::Data(format!(
                "{display}: malformed vocabulary header"
            )))
        }
    };
    let tokens: Vec<String> = lines.map(str::to_string).collect();
    let actual = hash_tokens(kind, &tokens);
    if actual != declared {
        return Err(CliError::Data(format!(
            "{display}: content hash {actual} does not match declared {declared}"
        )));
    }
    outln!("kind: vocabulary ({kind})");
    outln!("tokens: {}", tokens.len());
    outln!("hash: {declared}");
    Ok(())
}

fn inspect_triples(args: &InspectArgs) -> Result<(), CliError> {
    let outcome = ingest(&args.path)?;
    outln!("kind: triples");
    outln!("records: {}", outcome.triples.len());
    outln!("record mass: {}", outcome.record_mass());
    outln!("duplicates collapsed: {}", outcome.duplicates_collapsed());
    outln!("rejected lines: {}", outcome.rejects.len());
    let ligands: std::collections::HashSet<&str> =
        outcome.triples.iter().map(|t| t.smiles.as_str()).collect();
    outln!("distinct ligands: {}", ligands.len());
    Ok(())
}

fn inspect_fasta(args: &InspectArgs) -> Result<(), CliError> {
    let records =
        read_fasta(&args.path).map_err(|e| CliError::Data(format!("{}: {e}", args.path.display())))?;
    let lengths: Vec<usize> = records.iter().map(|r| r.sequence.len()).collect();
    outln!("kind: fasta");
    outln!("records: {}", records.len());
    outln!("residues: {}", lengths.iter().sum::<usize>());
    if let (Some(min), Some(max)) = (lengths.iter().min(), lengths.iter().max()) {
        outln!("lengths: {min}..{max}");
    }
    Ok(())
}

fn inspect_json(args: &InspectArgs, text: &str) -> Result<(), CliError> {
    let display = args.path.display();
    if let Ok(value) = serde_json::from_str::<serde_json::Value>(text) {
        outln!("kind: json");
        if let Some(command) = value.get("command").and_then(|v| v.as_str()) {
            outln!("command: {command}");
        }
        outln!("{}", serde_json::to_string_pretty(&value).expect("reserialization"));
        return Ok(());
    }
    // Not a single document; try one record per line.
    let mut count = 0usize;
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        serde_json::from_str::<serde_json::Value>(line).map_err(|e| {
            CliError::Data(format!("{display}: line {}: {e}", i + 1))
        })?;
        count += 1;
    }
    outln!("kind: jsonl");
    outln!("records: {count}");
    Ok(())
}
