//! `prodesign evaluate`: align generated sequences against references and
//! report identity, novelty, and set diversity; optionally package each
//! design as an evaluation job directory for external structure and docking
//! tools.

use std::collections::HashMap;
use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use prodesign_core::io::{atomic_write, read_fasta, read_jsonl, FastaRecord};
use prodesign_core::metrics::{diversity, emit_eval_manifests, identity, EvalCase};

use crate::outln;
use crate::manifest::RunManifest;
use crate::CliError;

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// FASTA of designed sequences (a generate output).
    #[arg(long)]
    pub generated: PathBuf,
    /// FASTA of reference sequences to score against.
    #[arg(long)]
    pub references: PathBuf,
    /// Directory for metrics.tsv and summary.json.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Also write one evaluation job directory per design under
    /// <out-dir>/manifests.
    #[arg(long, requires = "ligands")]
    pub emit_manifests: bool,
    /// Ligand records (JSONL with id and smiles) pairing each request id
    /// with its ligand; required by --emit-manifests.
    #[arg(long)]
    pub ligands: Option<PathBuf>,
}

/// A row of metrics.tsv: one designed sequence scored against the closest
/// reference.
struct Row<'a> {
    id: &'a str,
    length: usize,
    nearest: &'a str,
    identity: f64,
    novelty: f64,
}

#[derive(Serialize)]
struct Summary {
    generated: usize,
    references: usize,
    mean_identity: f64,
    mean_novelty: f64,
    /// Mean pairwise distance among the generated set; absent with fewer
    /// than two sequences.
    #[serde(skip_serializing_if = "Option::is_none")]
    diversity: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct LigandRecord {
    id: String,
    smiles: String,
}

fn read_fasta_input(path: &PathBuf) -> Result<Vec<FastaRecord>, CliError> {
    let records = match read_fasta(path) {
        Ok(r) => r,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(CliError::read(path, &e))
        }
        Err(e) => return Err(CliError::Data(format!("{}: {e}", path.display()))),
    };
    if records.is_empty() {
        return Err(CliError::Usage(format!(
            "{}: no sequences to work with",
            path.display()
        )));
    }
    Ok(records)
}

/// Directory-safe case id from a FASTA header: every character outside the
/// safe set becomes '_'.
fn case_id(header: &str) -> String {
    header
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn run(args: &EvaluateArgs) -> Result<(), CliError> {
    let out = &args.out_dir;
    let mut manifest = RunManifest::new(
        "evaluate",
        serde_json::json!({ "emit_manifests": args.emit_manifests }),
    )
    .input("generated", &args.generated)
    .input("references", &args.references)
    .output("metrics", &out.join("metrics.tsv"))
    .output("summary", &out.join("summary.json"));
    if let Some(ligands) = &args.ligands {
        manifest = manifest.input("ligands", ligands);
    }
    if args.emit_manifests {
        manifest = manifest.output("manifests", &out.join("manifests"));
    }
    manifest.write(out)?;

    let generated = read_fasta_input(&args.generated)?;
    let references = read_fasta_input(&args.references)?;

    let mut rows = Vec::with_capacity(generated.len());
    for g in &generated {
        let mut best = f64::NEG_INFINITY;
        let mut nearest = "";
        for r in &references {
            let score = identity(&g.sequence, &r.sequence)?;
            if score > best {
                best = score;
                nearest = &r.id;
            }
        }
        rows.push(Row {
            id: &g.id,
            length: g.sequence.len(),
            nearest,
            identity: best,
            novelty: 1.0 - best,
        });
    }

    let mut table = String::from("id\tlength\tnearest_reference\tidentity\tnovelty\n");
    for r in &rows {
        table.push_str(&format!(
            "{}\t{}\t{}\t{:.6}\t{:.6}\n",
            r.id, r.length, r.nearest, r.identity, r.novelty
        ));
    }
    let table_path = out.join("metrics.tsv");
    atomic_write(&table_path, table.as_bytes()).map_err(|e| CliError::write(&table_path, &e))?;

    let sequences: Vec<&str> = generated.iter().map(|g| g.sequence.as_str()).collect();
    let summary = Summary {
        generated: generated.len(),
        references: references.len(),
        mean_identity: rows.iter().map(|r| r.identity).sum::<f64>() / rows.len() as f64,
        mean_novelty: rows.iter().map(|r| r.novelty).sum::<f64>() / rows.len() as f64,
        diversity: if sequences.len() >= 2 {
            Some(diversity(&sequences)?)
        } else {
            None
        },
    };
    let summary_path = out.join("summary.json");
    let mut body = serde_json::to_string_pretty(&summary).expect("summary serialization");
    body.push('\n');
    atomic_write(&summary_path, body.as_bytes()).map_err(|e| CliError::write(&summary_path, &e))?;

    let mut emitted = 0usize;
    if args.emit_manifests {
        let ligand_path = args.ligands.as_ref().expect("clap enforces --ligands");
        let records: Vec<LigandRecord> = read_jsonl(ligand_path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => CliError::read(ligand_path, &e),
            _ => CliError::Data(format!("{}: {e}", ligand_path.display())),
        })?;
        let mut by_id: HashMap<&str, &str> = HashMap::new();
        for r in &records {
            if let Some(prev) = by_id.insert(&r.id, &r.smiles) {
                if prev != r.smiles {
                    return Err(CliError::Data(format!(
                        "{}: id {:?} maps to two different ligands",
                        ligand_path.display(),
                        r.id
                    )));
                }
            }
        }
        let mut cases = Vec::with_capacity(generated.len());
        let mut seen_ids = HashMap::new();
        for g in &generated {
            let request_id = g.id.split_whitespace().next().unwrap_or("");
            let smiles = by_id.get(request_id).ok_or_else(|| {
                CliError::Data(format!(
                    "{}: no ligand recorded for request id {request_id:?}",
                    ligand_path.display()
                ))
            })?;
            let case = case_id(&g.id);
            if let Some(other) = seen_ids.insert(case.clone(), &g.id) {
                return Err(CliError::Data(format!(
                    "headers {other:?} and {:?} collide on case id {case:?}",
                    g.id
                )));
            }
            cases.push(EvalCase {
                case_id: case,
                protein: g.sequence.clone(),
                ligand_smiles: smiles.to_string(),
            });
        }
        emitted = emit_eval_manifests(&cases, &out.join("manifests"))?.len();
    }

    match summary.diversity {
        Some(d) => outln!(
            "scored {} sequences against {} references: mean novelty {:.4}, diversity {:.4}{}",
            summary.generated,
            summary.references,
            summary.mean_novelty,
            d,
            if args.emit_manifests {
                format!(", {emitted} evaluation jobs emitted")
            } else {
                String::new()
            },
        ),
        None => outln!(
            "scored {} sequence against {} references: mean novelty {:.4}{}",
            summary.generated,
            summary.references,
            summary.mean_novelty,
            if args.emit_manifests {
                format!(", {emitted} evaluation jobs emitted")
            } else {
                String::new()
            },
        ),
    }
    Ok(())
}
