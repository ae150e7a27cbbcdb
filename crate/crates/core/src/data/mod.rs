//! Dataset curation: ingest of (description, ligand, protein) triples,
//! identity-based protein clustering, stratified cluster-level splits, and
//! the seen/unseen-ligand partition of the test set.

pub mod cluster;
pub mod split;

use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::MetricsError;
use crate::tokenize::protein::RESIDUES;

/// First line of every triples file; `ingest` rejects anything else.
pub const TRIPLES_HEADER: &str = "#triples v1";

/// One (function description, ligand, protein) record.
///
/// `instruction` and `accession` may be empty; `description` and `protein`
/// must not be, and `protein` must use only the 20 standard residues.
/// `multiplicity` counts how many identical source lines collapsed into this
/// record; it is written back out only when greater than one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triple {
    pub id: String,
    #[serde(default)]
    pub instruction: String,
    pub description: String,
    pub smiles: String,
    pub protein: String,
    #[serde(default)]
    pub accession: String,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub multiplicity: usize,
}

fn one() -> usize {
    1
}

#[allow(clippy::trivially_copy_pass_by_ref)] // serde's skip_serializing_if takes &T
fn is_one(m: &usize) -> bool {
    *m == 1
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: expected header {TRIPLES_HEADER:?}, found {found:?}")]
    BadHeader { path: PathBuf, found: String },
    #[error("clustering threshold must be in (0, 1], got {value}")]
    InvalidThreshold { value: f64 },
    #[error("k-mer length must be at least 1")]
    InvalidKmerLen,
    #[error("cannot split an empty cluster list")]
    EmptyClusterList,
    #[error("record {id} has a protein absent from the clustering")]
    UnclusteredSequence { id: String },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// A rejected input line: its 1-based line number and why it was dropped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Reject {
    pub line: usize,
    pub reason: String,
}

/// Result of reading a triples file: the validated, deduplicated records
/// plus the rejection report and the counts needed for conservation checks.
#[derive(Debug)]
pub struct IngestOutcome {
    pub triples: Vec<Triple>,
    pub rejects: Vec<Reject>,
    /// Non-empty data lines in the input (header excluded).
    pub input_lines: usize,
    /// Total record mass of the input: each line counts its declared
    /// multiplicity (1 unless stated, and 1 for lines too broken to parse).
    pub input_mass: usize,
    /// Record mass carried by rejected lines.
    pub rejected_mass: usize,
}

impl IngestOutcome {
    /// Total mass of the accepted records.
    pub fn record_mass(&self) -> usize {
        self.triples.iter().map(|t| t.multiplicity).sum()
    }

    /// How many records were folded into an earlier identical one.
    pub fn duplicates_collapsed(&self) -> usize {
        self.record_mass() - self.triples.len()
    }

    /// Accepted mass plus rejected mass accounts for every input record.
    pub fn conserved(&self) -> bool {
        self.record_mass() + self.rejected_mass == self.input_mass
    }
}

fn validate(t: &Triple) -> Option<&'static str> {
    if t.description.is_empty() {
        return Some("empty description");
    }
    if t.protein.is_empty() {
        return Some("empty protein");
    }
    if t.protein.chars().any(|c| !RESIDUES.contains(c)) {
        return Some("non-standard residue");
    }
    if t.smiles.is_empty() {
        return Some("empty ligand");
    }
    None
}

/// Read and validate a triples file.
///
/// The first line must be the versioned header. Each following non-empty
/// line is one JSON record; lines that fail to parse or violate a field
/// invariant are rejected (with line number and reason) rather than aborting
/// the read. Records agreeing on (description, smiles, protein) are collapsed
/// into one triple whose multiplicity is the sum; the first occurrence keeps
/// its id, instruction, and accession. Only an unreadable file is fatal.
pub fn ingest(path: &Path) -> Result<IngestOutcome, DataError> {
    let text = fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if header != TRIPLES_HEADER {
        return Err(DataError::BadHeader {
            path: path.to_path_buf(),
            found: header.to_string(),
        });
    }

    let mut seen: IndexMap<(String, String, String), usize> = IndexMap::new();
    let mut triples: Vec<Triple> = Vec::new();
    let mut rejects = Vec::new();
    let mut input_lines = 0usize;
    let mut input_mass = 0usize;
    let mut rejected_mass = 0usize;
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2; // header is line 1
        if line.is_empty() {
            continue;
        }
        input_lines += 1;
        let triple: Triple = match serde_json::from_str(line) {
            Ok(t) => t,
            Err(e) => {
                log::debug!("line {line_no}: {e}");
                input_mass += 1;
                rejected_mass += 1;
                rejects.push(Reject {
                    line: line_no,
                    reason: "malformed record".to_string(),
                });
                continue;
            }
        };
        input_mass += triple.multiplicity;
        if let Some(reason) = validate(&triple) {
            rejected_mass += triple.multiplicity;
            rejects.push(Reject {
                line: line_no,
                reason: reason.to_string(),
            });
            continue;
        }
        let key = (
            triple.description.clone(),
            triple.smiles.clone(),
            triple.protein.clone(),
        );
        match seen.get(&key) {
            Some(&at) => triples[at].multiplicity += triple.multiplicity,
            None => {
                seen.insert(key, triples.len());
                triples.push(triple);
            }
        }
    }
    Ok(IngestOutcome {
        triples,
        rejects,
        input_lines,
        input_mass,
        rejected_mass,
    })
}

/// Serialize triples in the versioned line-delimited format `ingest` reads.
pub fn triples_string(triples: &[Triple]) -> String {
    let mut out = String::from(TRIPLES_HEADER);
    out.push('\n');
    for t in triples {
        // In-memory records always serialize; a failure here is a bug.
        out.push_str(&serde_json::to_string(t).expect("triple serialization"));
        out.push('\n');
    }
    out
}

/// Write triples atomically in the versioned format.
pub fn write_triples(path: &Path, triples: &[Triple]) -> io::Result<()> {
    crate::io::atomic_write(path, triples_string(triples).as_bytes())
}

/// Write the rejection report: one `line<TAB>reason` row per reject.
pub fn write_rejects(path: &Path, rejects: &[Reject]) -> io::Result<()> {
    let mut out = Vec::new();
    for r in rejects {
        writeln!(out, "{}\t{}", r.line, r.reason)?;
    }
    crate::io::atomic_write(path, &out)
}
