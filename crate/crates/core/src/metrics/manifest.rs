//! Evaluation job manifests for external structure/docking pipelines.
//!
//! Structure prediction and docking are out of scope here; instead each
//! designed sequence is packaged as a self-contained job directory that an
//! external tool can pick up: the sequence as FASTA, the ligand as a `.smi`
//! file, and a manifest listing the metrics to fill in.

use std::path::{Path, PathBuf};

use crate::io::{atomic_write, fasta_string, FastaRecord};

use super::MetricsError;

/// Metric slots every job manifest declares, in emission order.
pub const EVAL_METRICS: [&str; 7] = [
    "iptm",
    "pae",
    "plddt",
    "binding_affinity",
    "mmgbsa",
    "hydrogen_bonds",
    "rmsd",
];

/// One designed sequence to package for external evaluation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalCase {
    /// Directory-safe identifier; ASCII letters, digits, `.`, `_`, `-`.
    pub case_id: String,
    pub protein: String,
    pub ligand_smiles: String,
}

fn case_id_is_safe(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'))
}

fn manifest_text(case_id: &str) -> String {
    let mut out = String::from("#eval-job v1\n");
    out.push_str(&format!("case_id = {case_id}\n"));
    out.push_str("protein = protein.fasta\n");
    out.push_str("ligand = ligand.smi\n");
    for metric in EVAL_METRICS {
        out.push_str(&format!("metric.{metric} = pending\n"));
    }
    out
}

/// Write one job directory per case under `out_dir` and return the manifest
/// paths, one per case, in input order.
///
/// Emission is idempotent: the bytes depend only on the cases, so re-running
/// over an existing tree rewrites identical files.
pub fn emit_eval_manifests(cases: &[EvalCase], out_dir: &Path) -> Result<Vec<PathBuf>, MetricsError> {
    let io_err = |path: &Path| {
        let shown = path.display().to_string();
        move |source: std::io::Error| MetricsError::Io {
            path: shown.clone(),
            source,
        }
    };
    let mut manifests = Vec::with_capacity(cases.len());
    for case in cases {
        if !case_id_is_safe(&case.case_id) {
            return Err(MetricsError::InvalidCaseId {
                id: case.case_id.clone(),
            });
        }
        let dir = out_dir.join(&case.case_id);
        let fasta = fasta_string(&[FastaRecord {
            id: case.case_id.clone(),
            sequence: case.protein.clone(),
        }]);
        let fasta_path = dir.join("protein.fasta");
        atomic_write(&fasta_path, fasta.as_bytes()).map_err(io_err(&fasta_path))?;
        let smi_path = dir.join("ligand.smi");
        let smi = format!("{} {}\n", case.ligand_smiles, case.case_id);
        atomic_write(&smi_path, smi.as_bytes()).map_err(io_err(&smi_path))?;
        let manifest_path = dir.join("job.manifest");
        atomic_write(&manifest_path, manifest_text(&case.case_id).as_bytes())
            .map_err(io_err(&manifest_path))?;
        manifests.push(manifest_path);
    }
    Ok(manifests)
}
