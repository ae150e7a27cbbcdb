//! Helpers shared by the integration test targets: running the binary,
//! fabricating deterministic corpora, and snapshotting output trees.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

pub const AMINO: &[u8] = b"ACDEFGHIKLMNPQRSTVWY";

pub const LIGANDS: [&str; 8] = [
    "CCO",
    "c1ccccc1",
    "CC(=O)O",
    "C1CCCCC1",
    "CCN(CC)CC",
    "O=C(O)c1ccccc1",
    "CC(C)CO",
    "N#Cc1ccncc1",
];

const WORDS: [&str; 16] = [
    "binds", "heme", "pocket", "alpha", "helix", "transport", "kinase", "loop",
    "hydrophobic", "cofactor", "design", "stable", "fold", "domain", "metal", "barrel",
];

/// Run the CLI with the given arguments and wait for it.
pub fn prodesign(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prodesign"))
        .args(args)
        .output()
        .expect("spawn prodesign")
}

pub fn assert_success(out: &Output, what: &str) {
    assert!(
        out.status.success(),
        "{what} failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// The machine-readable error record a failing command prints: the last
/// non-empty stderr line (log lines may precede it).
pub fn error_record(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr
        .lines()
        .rev()
        .find(|l| !l.trim().is_empty())
        .unwrap_or_else(|| panic!("no stderr from a failing command"));
    serde_json::from_str(line)
        .unwrap_or_else(|e| panic!("stderr line is not a JSON record: {e}\n{line}"))
}

pub fn random_protein(rng: &mut ChaCha8Rng, len: usize) -> String {
    (0..len)
        .map(|_| AMINO[rng.random_range(0..AMINO.len())] as char)
        .collect()
}

fn random_description(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(4..9);
    (0..n)
        .map(|_| WORDS[rng.random_range(0..WORDS.len())])
        .collect::<Vec<_>>()
        .join(" ")
}

/// Substitute a fraction of positions, guaranteeing the result differs.
pub fn mutate_protein(rng: &mut ChaCha8Rng, base: &str, rate: f64) -> String {
    let mut bytes = base.as_bytes().to_vec();
    let flips = ((bytes.len() as f64 * rate).ceil() as usize).max(1);
    for _ in 0..flips {
        let at = rng.random_range(0..bytes.len());
        let old = bytes[at];
        loop {
            let new = AMINO[rng.random_range(0..AMINO.len())];
            if new != old {
                bytes[at] = new;
                break;
            }
        }
    }
    String::from_utf8(bytes).expect("amino letters are ascii")
}

/// A deterministic triples file: `n` valid records with distinct proteins
/// (a mix of fresh sequences and close variants of earlier ones, so
/// clustering has real work to do), drawing ligands from a fixed pool.
pub fn corpus_string(seed: u64, n: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut proteins: Vec<String> = Vec::with_capacity(n);
    let mut seen = std::collections::HashSet::new();
    let mut lines = vec!["#triples v1".to_string()];
    for i in 0..n {
        let protein = loop {
            let candidate = if !proteins.is_empty() && rng.random_bool(0.4) {
                let base = proteins[rng.random_range(0..proteins.len())].clone();
                let rate = rng.random_range(0.05..0.25);
                mutate_protein(&mut rng, &base, rate)
            } else {
                let len = rng.random_range(25..61);
                random_protein(&mut rng, len)
            };
            if seen.insert(candidate.clone()) {
                break candidate;
            }
        };
        proteins.push(protein.clone());
        // Skew the ligand pool so some ligands are rare enough to end up
        // only in test clusters.
        let ligand = if rng.random_bool(0.8) {
            LIGANDS[rng.random_range(0..4)]
        } else {
            LIGANDS[rng.random_range(4..LIGANDS.len())]
        };
        let record = serde_json::json!({
            "id": format!("t{i:04}"),
            "description": random_description(&mut rng),
            "smiles": ligand,
            "protein": protein,
        });
        lines.push(record.to_string());
    }
    lines.join("\n") + "\n"
}

/// Every file under `dir`, keyed by relative path.
pub fn tree_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).expect("readable dir") {
            let path = entry.expect("dir entry").path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path
                    .strip_prefix(dir)
                    .expect("path under root")
                    .to_string_lossy()
                    .into_owned();
                out.insert(rel, std::fs::read(&path).expect("readable file"));
            }
        }
    }
    out
}
