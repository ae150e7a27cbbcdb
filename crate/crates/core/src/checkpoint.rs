//! Self-describing binary snapshots of model and optimizer state.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    4 bytes, "IPRO"
//! version  u32
//! step     u64                     training steps taken when saved
//! config   u64 length + JSON bytes (the model configuration)
//! hashes   3 x (u64 length + UTF-8), in the order text, smiles, protein
//! count    u64                     number of tensor records
//! record   u64 name length + name bytes
//!          u64 rank + rank x u64 dims
//!          product(dims) x f64, raw bits
//! ```
//!
//! Records named `optim.m.<param>` / `optim.v.<param>` are Adam moment
//! estimates; every other record is a model parameter. Values round-trip
//! bitwise. Loading rejects a checkpoint whose vocabulary hashes differ from
//! the caller's, so a model is never paired with token tables it was not
//! trained with, and refuses non-finite values outright.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use indexmap::IndexMap;
use thiserror::Error;

use crate::io::atomic_write;
use crate::model::{ModelConfig, ModelState, Param};
use crate::tokenize::VocabHashes;
use crate::train::AdamState;

pub const MAGIC: [u8; 4] = *b"IPRO";
pub const FORMAT_VERSION: u32 = 1;

/// Sanity cap on tensor rank; nothing in the model exceeds 2.
const MAX_RANK: usize = 8;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}: not a checkpoint (bad magic)")]
    BadMagic { path: String },
    #[error("{path}: format version {found} is not {FORMAT_VERSION}")]
    BadVersion { path: String, found: u32 },
    #[error("{path}: corrupt checkpoint: {detail}")]
    Corrupt { path: String, detail: String },
    #[error(
        "{path}: {vocab} vocabulary hash mismatch (checkpoint {stored}, current {current}); \
         the model was trained with different token tables"
    )]
    VocabMismatch {
        path: String,
        vocab: &'static str,
        stored: String,
        current: String,
    },
    #[error("{path}: non-finite values in record {name}")]
    NonFinite { path: String, name: String },
}

/// Everything a resumed run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub state: ModelState,
    pub optimizer: AdamState,
    pub step: usize,
}

/// Header fields only, for cheap inspection of large checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Header {
    pub config: ModelConfig,
    pub vocab: VocabHashes,
    pub step: usize,
    pub records: usize,
}

/// Write one atomic snapshot: model parameters first in their stored order,
/// then optimizer moments.
pub fn save(
    path: &Path,
    state: &ModelState,
    optimizer: &AdamState,
    step: usize,
    vocab: &VocabHashes,
) -> Result<(), CheckpointError> {
    let mut buf = Vec::new();
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(step as u64).to_le_bytes());
    let config = serde_json::to_vec(&state.config).expect("model config serializes");
    put_bytes(&mut buf, &config);
    put_bytes(&mut buf, vocab.text.as_bytes());
    put_bytes(&mut buf, vocab.smiles.as_bytes());
    put_bytes(&mut buf, vocab.protein.as_bytes());

    let count = state.params.len() + optimizer.m.len() + optimizer.v.len();
    buf.extend_from_slice(&(count as u64).to_le_bytes());
    for (name, param) in &state.params {
        put_record(&mut buf, name, &param.shape, &param.data);
    }
    for (prefix, moments) in [("optim.m.", &optimizer.m), ("optim.v.", &optimizer.v)] {
        for (name, values) in moments {
            let flat = [values.len()];
            let shape = match state.params.get(name) {
                Some(p) => p.shape.as_slice(),
                None => &flat,
            };
            let mut full = String::with_capacity(prefix.len() + name.len());
            let _ = write!(full, "{prefix}{name}");
            put_record(&mut buf, &full, shape, values);
        }
    }
    atomic_write(path, &buf).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Read a snapshot back, verifying magic, version, vocabulary hashes, value
/// finiteness, and that every byte is accounted for.
pub fn load(path: &Path, expected: &VocabHashes) -> Result<Snapshot, CheckpointError> {
    let bytes = read_file(path)?;
    let mut r = Reader::new(path, &bytes);
    let (config, _, step, count) = read_header(&mut r, Some(expected))?;

    let mut params: IndexMap<String, Param> = IndexMap::new();
    let mut optimizer = AdamState::new();
    for _ in 0..count {
        let (name, shape, data) = read_record(&mut r)?;
        if data.iter().any(|x| !x.is_finite()) {
            return Err(CheckpointError::NonFinite {
                path: r.display(),
                name,
            });
        }
        if let Some(param) = name.strip_prefix("optim.m.") {
            optimizer.m.insert(param.to_string(), data);
        } else if let Some(param) = name.strip_prefix("optim.v.") {
            optimizer.v.insert(param.to_string(), data);
        } else {
            params.insert(name, Param { shape, data });
        }
    }
    if !r.at_end() {
        return Err(r.corrupt("trailing bytes after the last record"));
    }
    if params.is_empty() {
        return Err(r.corrupt("no model parameters"));
    }
    for (which, moments) in [("m", &optimizer.m), ("v", &optimizer.v)] {
        for name in moments.keys() {
            if !params.contains_key(name) {
                return Err(r.corrupt(&format!(
                    "optimizer moment {which} for unknown parameter {name}"
                )));
            }
        }
    }
    Ok(Snapshot {
        state: ModelState { config, params },
        optimizer,
        step,
    })
}

/// Read only the header: configuration, stored hashes, step, record count.
pub fn peek(path: &Path) -> Result<Header, CheckpointError> {
    let bytes = read_file(path)?;
    let mut r = Reader::new(path, &bytes);
    let (config, vocab, step, records) = read_header(&mut r, None)?;
    Ok(Header {
        config,
        vocab,
        step,
        records,
    })
}

fn read_header(
    r: &mut Reader<'_>,
    expected: Option<&VocabHashes>,
) -> Result<(ModelConfig, VocabHashes, usize, usize), CheckpointError> {
    if r.take(4)? != MAGIC {
        return Err(CheckpointError::BadMagic { path: r.display() });
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(CheckpointError::BadVersion {
            path: r.display(),
            found: version,
        });
    }
    let step = r.u64()? as usize;
    let config_bytes = r.block("config")?;
    let config: ModelConfig = serde_json::from_slice(config_bytes)
        .map_err(|e| r.corrupt(&format!("model config: {e}")))?;
    config
        .validate()
        .map_err(|e| r.corrupt(&format!("model config: {e}")))?;
    let vocab = VocabHashes {
        text: r.string("text hash")?,
        smiles: r.string("smiles hash")?,
        protein: r.string("protein hash")?,
    };
    if let Some(expected) = expected {
        for (which, stored, current) in [
            ("text", &vocab.text, &expected.text),
            ("smiles", &vocab.smiles, &expected.smiles),
            ("protein", &vocab.protein, &expected.protein),
        ] {
            if stored != current {
                return Err(CheckpointError::VocabMismatch {
                    path: r.display(),
                    vocab: which,
                    stored: stored.clone(),
                    current: current.clone(),
                });
            }
        }
    }
    let count = r.u64()? as usize;
    Ok((config, vocab, step, count))
}

fn read_record(r: &mut Reader<'_>) -> Result<(String, Vec<usize>, Vec<f64>), CheckpointError> {
    let name = r.string("record name")?;
    let rank = r.u64()? as usize;
    if rank > MAX_RANK {
        return Err(r.corrupt(&format!("record {name}: rank {rank} exceeds {MAX_RANK}")));
    }
    let mut shape = Vec::with_capacity(rank);
    let mut numel = 1usize;
    for _ in 0..rank {
        let dim = r.u64()? as usize;
        numel = numel
            .checked_mul(dim)
            .ok_or_else(|| r.corrupt(&format!("record {name}: shape overflows")))?;
        shape.push(dim);
    }
    if numel.checked_mul(8).is_none_or(|bytes| bytes > r.remaining()) {
        return Err(r.corrupt(&format!(
            "record {name}: {numel} values exceed the remaining bytes"
        )));
    }
    let raw = r.take(numel * 8)?;
    let data = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((name, shape, data))
}

fn read_file(path: &Path) -> Result<Vec<u8>, CheckpointError> {
    fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn put_bytes(buf: &mut Vec<u8>, bytes: &[u8]) {
    buf.extend_from_slice(&(bytes.len() as u64).to_le_bytes());
    buf.extend_from_slice(bytes);
}

fn put_record(buf: &mut Vec<u8>, name: &str, shape: &[usize], data: &[f64]) {
    debug_assert_eq!(shape.iter().product::<usize>(), data.len(), "{name}");
    put_bytes(buf, name.as_bytes());
    buf.extend_from_slice(&(shape.len() as u64).to_le_bytes());
    for &dim in shape {
        buf.extend_from_slice(&(dim as u64).to_le_bytes());
    }
    for &x in data {
        buf.extend_from_slice(&x.to_le_bytes());
    }
}

/// Bounds-checked cursor over the raw bytes; every failure carries the path.
struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(path: &'a Path, bytes: &'a [u8]) -> Self {
        Reader { path, bytes, pos: 0 }
    }

    fn display(&self) -> String {
        self.path.display().to_string()
    }

    fn corrupt(&self, detail: &str) -> CheckpointError {
        CheckpointError::Corrupt {
            path: self.display(),
            detail: detail.to_string(),
        }
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn at_end(&self) -> bool {
        self.pos == self.bytes.len()
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if n > self.remaining() {
            return Err(self.corrupt(&format!(
                "needed {n} bytes at offset {}, only {} left",
                self.pos,
                self.remaining()
            )));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    /// A u64-length-prefixed block.
    fn block(&mut self, what: &str) -> Result<&'a [u8], CheckpointError> {
        let len = self.u64()? as usize;
        if len > self.remaining() {
            return Err(self.corrupt(&format!(
                "{what}: declared length {len} exceeds the remaining {} bytes",
                self.remaining()
            )));
        }
        self.take(len)
    }

    fn string(&mut self, what: &str) -> Result<String, CheckpointError> {
        let bytes = self.block(what)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| self.corrupt(&format!("{what}: not UTF-8")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Session, SubnetConfig};
    use crate::tokenize::{TokenizedTriple, BOS, EOS};
    use crate::train::{adam_step, TrainConfig};
    use indexmap::IndexMap;
    use tempfile::tempdir;

    fn tiny_config() -> ModelConfig {
        let subnet = SubnetConfig {
            layers: 1,
            heads: 2,
            width: 8,
            ffn_multiplier: 2,
        };
        ModelConfig {
            text: subnet,
            ligand: subnet,
            decoder: subnet,
            memory_size: 2,
            max_text_positions: 8,
            max_ligand_positions: 8,
            max_protein_positions: 16,
            text_vocab: 16,
            ligand_vocab: 16,
            protein_vocab: 24,
            use_text_encoder: true,
            use_ligand_encoder: true,
            use_memory_module: true,
            dropout: 0.0,
        }
    }

    fn hashes() -> VocabHashes {
        VocabHashes {
            text: "aaa111".into(),
            smiles: "bbb222".into(),
            protein: "ccc333".into(),
        }
    }

    /// A state plus an optimizer that has genuinely stepped once.
    fn trained_pair() -> (ModelState, AdamState) {
        let mut state = ModelState::init(tiny_config(), 9).unwrap();
        let mut optimizer = AdamState::new();
        let grads: IndexMap<String, Vec<f64>> = state
            .params
            .iter()
            .map(|(name, p)| (name.clone(), vec![0.01; p.numel()]))
            .collect();
        let mut train_config = TrainConfig::new(10);
        train_config.warmup_steps = 1;
        adam_step(&mut state, &mut optimizer, &grads, 1, &train_config).unwrap();
        (state, optimizer)
    }

    fn example() -> TokenizedTriple {
        TokenizedTriple {
            text: vec![4, 5],
            smiles: vec![6],
            protein: vec![BOS, 7, 9, 4, EOS],
        }
    }

    fn nll_bits(state: &ModelState) -> u64 {
        let mut session = Session::new(state);
        let out = session.nll(&example()).unwrap();
        session.graph.item(out.loss).to_bits()
    }

    #[test]
    fn round_trip_is_bitwise() {
        let (state, optimizer) = trained_pair();
        let dir = tempdir().unwrap();
        let path = dir.path().join("snap.ckpt");
        save(&path, &state, &optimizer, 17, &hashes()).unwrap();
        let snap = load(&path, &hashes()).unwrap();

        assert_eq!(snap.step, 17);
        assert_eq!(snap.state.config, state.config);
        assert_eq!(
            snap.state.params.keys().collect::<Vec<_>>(),
            state.params.keys().collect::<Vec<_>>(),
            "parameter order survives"
        );
        for (name, param) in &state.params {
            let loaded = &snap.state.params[name];
            assert_eq!(loaded.shape, param.shape);
            let same_bits = loaded
                .data
                .iter()
                .zip(&param.data)
                .all(|(a, b)| a.to_bits() == b.to_bits());
            assert!(same_bits, "{name} changed across the round trip");
        }
        assert_eq!(snap.optimizer, optimizer);
        assert_eq!(nll_bits(&snap.state), nll_bits(&state));
    }

    #[test]
    fn fresh_optimizer_round_trips_empty() {
        let state = ModelState::init(tiny_config(), 9).unwrap();
        let dir = tempdir().unwrap();
        let path = dir.path().join("snap.ckpt");
        save(&path, &state, &AdamState::new(), 0, &hashes()).unwrap();
        let snap = load(&path, &hashes()).unwrap();
        assert!(snap.optimizer.m.is_empty() && snap.optimizer.v.is_empty());
        assert_eq!(snap.step, 0);
    }

    #[test]
    fn vocab_mismatch_is_rejected() {
        let (state, optimizer) = trained_pair();
        let dir = tempdir().unwrap();
        let path = dir.path().join("snap.ckpt");
        save(&path, &state, &optimizer, 3, &hashes()).unwrap();
        let mut other = hashes();
        other.protein = "zzz999".into();
        match load(&path, &other).unwrap_err() {
            CheckpointError::VocabMismatch { vocab, stored, current, .. } => {
                assert_eq!(vocab, "protein");
                assert_eq!(stored, "ccc333");
                assert_eq!(current, "zzz999");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn peek_reads_only_the_header() {
        let (state, optimizer) = trained_pair();
        let dir = tempdir().unwrap();
        let path = dir.path().join("snap.ckpt");
        save(&path, &state, &optimizer, 42, &hashes()).unwrap();
        let header = peek(&path).unwrap();
        assert_eq!(header.step, 42);
        assert_eq!(header.config, state.config);
        assert_eq!(header.vocab, hashes());
        assert_eq!(
            header.records,
            state.params.len() + optimizer.m.len() + optimizer.v.len()
        );
    }

    #[test]
    fn bad_magic_version_and_truncation_are_distinct_errors() {
        let (state, optimizer) = trained_pair();
        let dir = tempdir().unwrap();
        let path = dir.path().join("snap.ckpt");
        save(&path, &state, &optimizer, 3, &hashes()).unwrap();
        let good = fs::read(&path).unwrap();

        let garbage = dir.path().join("garbage.ckpt");
        fs::write(&garbage, b"OHNO").unwrap();
        assert!(matches!(
            load(&garbage, &hashes()).unwrap_err(),
            CheckpointError::BadMagic { .. }
        ));

        let mut versioned = good.clone();
        versioned[4..8].copy_from_slice(&9u32.to_le_bytes());
        let vpath = dir.path().join("versioned.ckpt");
        fs::write(&vpath, &versioned).unwrap();
        assert!(matches!(
            load(&vpath, &hashes()).unwrap_err(),
            CheckpointError::BadVersion { found: 9, .. }
        ));

        let tpath = dir.path().join("truncated.ckpt");
        fs::write(&tpath, &good[..good.len() - 5]).unwrap();
        assert!(matches!(
            load(&tpath, &hashes()).unwrap_err(),
            CheckpointError::Corrupt { .. }
        ));

        let xpath = dir.path().join("extended.ckpt");
        let mut extended = good.clone();
        extended.extend_from_slice(&[0, 0, 0]);
        fs::write(&xpath, &extended).unwrap();
        match load(&xpath, &hashes()).unwrap_err() {
            CheckpointError::Corrupt { detail, .. } => assert!(detail.contains("trailing")),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn missing_file_reports_io() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("nope.ckpt");
        assert!(matches!(
            load(&path, &hashes()).unwrap_err(),
            CheckpointError::Io { .. }
        ));
    }

    #[test]
    fn non_finite_values_are_refused() {
        let (mut state, optimizer) = trained_pair();
        state.params.get_mut("memory.m").unwrap().data[0] = f64::NAN;
        let dir = tempdir().unwrap();
        let path = dir.path().join("snap.ckpt");
        save(&path, &state, &optimizer, 3, &hashes()).unwrap();
        match load(&path, &hashes()).unwrap_err() {
            CheckpointError::NonFinite { name, .. } => assert_eq!(name, "memory.m"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn overwrite_is_atomic_replacement() {
        let (state, optimizer) = trained_pair();
        let dir = tempdir().unwrap();
        let path = dir.path().join("snap.ckpt");
        save(&path, &state, &optimizer, 1, &hashes()).unwrap();
        save(&path, &state, &optimizer, 2, &hashes()).unwrap();
        assert_eq!(load(&path, &hashes()).unwrap().step, 2);
        let leftovers: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .filter(|e| e.as_ref().unwrap().file_name() != "snap.ckpt")
            .collect();
        assert!(leftovers.is_empty(), "temp files left behind");
    }
}
