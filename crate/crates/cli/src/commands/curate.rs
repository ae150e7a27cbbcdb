//! `prodesign curate`: ingest a triples corpus, cluster the proteins by
//! sequence identity, assign whole clusters to train/validation/test, and
//! partition the test records by ligand novelty.
//!
//! Every output is a pure function of the input file, the threshold, and the
//! seed, so rerunning the command reproduces the directory byte for byte.

use std::collections::HashSet;
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use prodesign_core::data::cluster::{cluster_sequences, DEFAULT_KMER_LEN, DEFAULT_THRESHOLD};
use prodesign_core::data::split::{apply_split, stratified_split, StratumReport, STRATA};
use prodesign_core::data::{ingest, write_rejects, write_triples, Triple};
use prodesign_core::io::atomic_write;

use crate::outln;
use crate::manifest::RunManifest;
use crate::CliError;

#[derive(Debug, Args)]
pub struct CurateArgs {
    /// Input triples file (versioned line-delimited records).
    #[arg(long)]
    pub input: PathBuf,
    /// Directory for the split files, cluster table, and reports.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Minimum identity for a sequence to join a cluster.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Seed for the stratified split assignment.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Serialize)]
struct Counts {
    records: usize,
    mass: usize,
}

fn counts(triples: &[Triple]) -> Counts {
    Counts {
        records: triples.len(),
        mass: triples.iter().map(|t| t.multiplicity).sum(),
    }
}

#[derive(Serialize)]
struct StratumRow {
    sizes: String,
    clusters: usize,
    val_clusters: usize,
    test_clusters: usize,
}

#[derive(Serialize)]
struct CurateReport {
    threshold: f64,
    seed: u64,
    input_lines: usize,
    input_mass: usize,
    rejected_lines: usize,
    rejected_mass: usize,
    duplicates_collapsed: usize,
    accepted: Counts,
    unique_proteins: usize,
    clusters: usize,
    strata: Vec<StratumRow>,
    warnings: Vec<String>,
    train: Counts,
    val: Counts,
    val_dropped: Counts,
    test_seen: Counts,
    test_unseen: Counts,
    unseen_test_ligands: usize,
    /// Accepted plus rejected mass accounts for every input record, and the
    /// five split files together carry exactly the accepted mass.
    conserved: bool,
}

fn stratum_rows(per_stratum: &[StratumReport; 4]) -> Vec<StratumRow> {
    STRATA
        .iter()
        .zip(per_stratum)
        .map(|(&(lo, hi), r)| StratumRow {
            sizes: if hi == usize::MAX {
                format!("{lo}+")
            } else {
                format!("{lo}-{hi}")
            },
            clusters: r.available,
            val_clusters: r.val,
            test_clusters: r.test,
        })
        .collect()
}

pub fn run(args: &CurateArgs) -> Result<(), CliError> {
    let out = &args.out_dir;
    RunManifest::new(
        "curate",
        serde_json::json!({ "threshold": args.threshold, "seed": args.seed }),
    )
    .seed(args.seed)
    .input("triples", &args.input)
    .output("train", &out.join("train.jsonl"))
    .output("val", &out.join("val.jsonl"))
    .output("val_dropped", &out.join("val-dropped.jsonl"))
    .output("test_seen", &out.join("test-seen.jsonl"))
    .output("test_unseen", &out.join("test-unseen.jsonl"))
    .output("clusters", &out.join("clusters.tsv"))
    .output("rejects", &out.join("rejects.tsv"))
    .output("report", &out.join("report.json"))
    .write(out)?;

    let ingested = ingest(&args.input)?;
    if ingested.triples.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no usable records ({} lines rejected)",
            args.input.display(),
            ingested.rejects.len()
        )));
    }
    let clustering = cluster_sequences(&ingested.triples, args.threshold, DEFAULT_KMER_LEN)?;
    let plan = stratified_split(&clustering, args.seed)?;
    let split = apply_split(&plan, &clustering, &ingested.triples)?;

    let write = |name: &str, triples: &[Triple]| -> Result<(), CliError> {
        let path = out.join(name);
        write_triples(&path, triples).map_err(|e| CliError::write(&path, &e))
    };
    write("train.jsonl", &split.train)?;
    write("val.jsonl", &split.val)?;
    write("val-dropped.jsonl", &split.val_dropped)?;
    write("test-seen.jsonl", &split.test_seen)?;
    write("test-unseen.jsonl", &split.test_unseen)?;
    let clusters_path = out.join("clusters.tsv");
    atomic_write(&clusters_path, clustering.table_string().as_bytes())
        .map_err(|e| CliError::write(&clusters_path, &e))?;
    let rejects_path = out.join("rejects.tsv");
    write_rejects(&rejects_path, &ingested.rejects).map_err(|e| CliError::write(&rejects_path, &e))?;

    let split_mass: usize = [
        &split.train,
        &split.val,
        &split.val_dropped,
        &split.test_seen,
        &split.test_unseen,
    ]
    .iter()
    .flat_map(|v| v.iter())
    .map(|t| t.multiplicity)
    .sum();
    let unseen_ligands: HashSet<&str> =
        split.test_unseen.iter().map(|t| t.smiles.as_str()).collect();
    let report = CurateReport {
        threshold: args.threshold,
        seed: args.seed,
        input_lines: ingested.input_lines,
        input_mass: ingested.input_mass,
        rejected_lines: ingested.rejects.len(),
        rejected_mass: ingested.rejected_mass,
        duplicates_collapsed: ingested.duplicates_collapsed(),
        accepted: counts(&ingested.triples),
        unique_proteins: clustering.sequences.len(),
        clusters: clustering.clusters.len(),
        strata: stratum_rows(&plan.per_stratum),
        warnings: plan.warnings.clone(),
        train: counts(&split.train),
        val: counts(&split.val),
        val_dropped: counts(&split.val_dropped),
        test_seen: counts(&split.test_seen),
        test_unseen: counts(&split.test_unseen),
        unseen_test_ligands: unseen_ligands.len(),
        conserved: ingested.conserved() && split_mass == ingested.record_mass(),
    };
    let report_path = out.join("report.json");
    let mut text = serde_json::to_string_pretty(&report).expect("report serialization");
    text.push('\n');
    atomic_write(&report_path, text.as_bytes()).map_err(|e| CliError::write(&report_path, &e))?;

    outln!(
        "curated {} records into {} clusters: train {} / val {} / test {}+{} (dropped {}), {} rejected lines",
        report.accepted.records,
        report.clusters,
        report.train.records,
        report.val.records,
        report.test_seen.records,
        report.test_unseen.records,
        report.val_dropped.records,
        report.rejected_lines,
    );
    Ok(())
}
