//! `prodesign train`: tokenize a curated split with saved vocabularies and
//! run the training loop, streaming step records to a JSONL log and writing
//! resumable checkpoints.

use std::fs::OpenOptions;
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use prodesign_core::checkpoint;
use prodesign_core::data::ingest;
use prodesign_core::io::atomic_write;
use prodesign_core::model::ModelState;
use prodesign_core::tokenize::{SmilesVocab, TextVocab};
use prodesign_core::tokenize::Tokenizers;
use prodesign_core::train::{train, AdamState, CheckpointSink};

use crate::outln;
use crate::config;
use crate::manifest::RunManifest;
use crate::CliError;

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training triples file (a curate output split).
    #[arg(long)]
    pub data: PathBuf,
    /// Directory holding text.vocab and smiles.vocab.
    #[arg(long)]
    pub vocab_dir: PathBuf,
    /// Directory for the log, report, and checkpoints.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// TOML run configuration (model and train sections).
    #[arg(long)]
    pub config: PathBuf,
    /// Master seed override: model init, batch order, and dropout.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Checkpoint to continue from; its model replaces the config's.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Serialize)]
struct TrainSummary {
    start_step: usize,
    steps_run: usize,
    total_steps: usize,
    examples: usize,
    skipped_records: usize,
    oversize_examples: usize,
    final_loss: Option<f64>,
}

pub fn run(args: &TrainArgs) -> Result<(), CliError> {
    let file = config::load(&args.config)?;
    let master_seed = args.seed.or(file.seed).unwrap_or(0);

    let text = TextVocab::load(&args.vocab_dir.join("text.vocab"))?;
    let smiles = SmilesVocab::load(&args.vocab_dir.join("smiles.vocab"))?;
    let tokenizers = Tokenizers { text, smiles };
    let hashes = tokenizers.hashes();
    let sizes = (tokenizers.text.size(), tokenizers.smiles.size());

    let model_config = config::resolve_model(&file.model, Some(sizes))?;
    let (train_config, interval) = config::resolve_train(&file.train, file.seed, args.seed)?;

    let ingested = ingest(&args.data)?;
    let mut dataset = Vec::new();
    let mut skipped = 0usize;
    for t in &ingested.triples {
        match tokenizers.encode(&t.instruction, &t.description, &t.smiles, &t.protein) {
            Ok((example, _)) => {
                // Multiplicity is sampling weight: one copy per source record.
                for _ in 0..t.multiplicity.max(1) {
                    dataset.push(example.clone());
                }
            }
            Err(e) => {
                log::warn!("record {} skipped: {e}", t.id);
                skipped += 1;
            }
        }
    }
    if dataset.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no trainable records ({} skipped)",
            args.data.display(),
            skipped
        )));
    }

    let (mut state, mut optimizer, start_step, resumed) = match &args.resume {
        Some(path) => {
            let snap = checkpoint::load(path, &hashes)?;
            if snap.state.config != model_config {
                return Err(CliError::Usage(format!(
                    "{}: checkpoint model shape differs from the configured one; \
                     train resumes only under the original model config",
                    path.display()
                )));
            }
            (snap.state, snap.optimizer, snap.step, Some(snap.step))
        }
        None => (
            ModelState::init(model_config.clone(), master_seed)?,
            AdamState::default(),
            0,
            None,
        ),
    };

    let out = &args.out_dir;
    let ckpt_dir = out.join("checkpoints");
    let mut manifest = RunManifest::new(
        "train",
        serde_json::json!({
            "model": model_config,
            "train": train_config,
            "checkpoint_interval": interval,
            "master_seed": master_seed,
        }),
    )
    .seed(master_seed)
    .input("data", &args.data)
    .input("vocab_dir", &args.vocab_dir)
    .input("config", &args.config)
    .output("log", &out.join("train-log.jsonl"))
    .output("report", &out.join("train-report.json"))
    .output("checkpoints", &ckpt_dir)
    .vocab(&hashes)
    .stamped();
    if let Some(step) = resumed {
        manifest = manifest.resumed_from(step).input(
            "resume",
            args.resume.as_deref().expect("resume path present"),
        );
    }
    manifest.write(out)?;

    let log_path = out.join("train-log.jsonl");
    let mut log = OpenOptions::new()
        .create(true)
        .append(resumed.is_some())
        .truncate(resumed.is_none())
        .write(true)
        .open(&log_path)
        .map_err(|e| CliError::write(&log_path, &e))?;
    let sink = CheckpointSink {
        dir: &ckpt_dir,
        interval,
        vocab: &hashes,
    };
    let report = train(
        &mut state,
        &mut optimizer,
        &dataset,
        &train_config,
        start_step,
        Some(&sink),
        Some(&mut log),
    )?;

    let summary = TrainSummary {
        start_step,
        steps_run: report.records.len(),
        total_steps: train_config.total_steps,
        examples: dataset.len(),
        skipped_records: skipped,
        oversize_examples: report.oversize.len(),
        final_loss: report.final_loss,
    };
    let report_path = out.join("train-report.json");
    let mut body = serde_json::to_string_pretty(&summary).expect("report serialization");
    body.push('\n');
    atomic_write(&report_path, body.as_bytes()).map_err(|e| CliError::write(&report_path, &e))?;

    match summary.final_loss {
        Some(loss) => outln!(
            "trained steps {}..{} on {} examples; final mean per-token NLL {loss:.6}; checkpoints in {}",
            start_step + 1,
            start_step + summary.steps_run,
            summary.examples,
            ckpt_dir.display(),
        ),
        None => outln!("nothing to do: start step {start_step} is already the horizon"),
    }
    Ok(())
}
