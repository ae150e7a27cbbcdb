//! Corpus-derived vocabulary construction, hashing, and the on-disk format.
//!
//! Vocabulary files are plain text: a header line
//! `#vocab v1 <kind> <sha256-hash>` followed by one token per line, where the
//! line number (zero-based, after the header) is the token id. The hash
//! covers the kind and the full token list, so a loaded file proves it is the
//! vocabulary a checkpoint was trained with.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::smiles::{lex, SmilesVocab};
use super::text::{words, TextVocab, TEXT_SPECIALS};
use super::{TokenizeError, BASE_SPECIALS};
use crate::io::atomic_write;

/// SHA-256 over the vocabulary kind and token list, hex-encoded.
pub fn hash_tokens(kind: &str, tokens: &[String]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(kind.as_bytes());
    hasher.update(b"\n");
    for token in tokens {
        hasher.update(token.as_bytes());
        hasher.update(b"\n");
    }
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

/// Content hashes of the three vocabularies a model was trained with.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabHashes {
    pub text: String,
    pub smiles: String,
    pub protein: String,
}

/// Size limits (including specials) for the corpus-derived vocabularies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VocabCaps {
    pub text: usize,
    pub smiles: usize,
}

impl Default for VocabCaps {
    fn default() -> Self {
        VocabCaps {
            text: 8192,
            smiles: 1024,
        }
    }
}

/// One corpus record's contribution to vocabulary counts. `weight` carries
/// the multiplicity of deduplicated records so the counts reflect the corpus
/// as a multiset.
#[derive(Clone, Copy, Debug)]
pub struct VocabSource<'a> {
    pub instruction: &'a str,
    pub description: &'a str,
    pub smiles: &'a str,
    pub weight: usize,
}

/// Immutable token list with id lookup and a content hash.
#[derive(Clone, Debug)]
pub(super) struct TokenTable {
    kind: &'static str,
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    hash: String,
}

impl TokenTable {
    fn new(kind: &'static str, tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        let hash = hash_tokens(kind, &tokens);
        TokenTable {
            kind,
            tokens,
            index,
            hash,
        }
    }

    pub(super) fn len(&self) -> usize {
        self.tokens.len()
    }

    pub(super) fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub(super) fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub(super) fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub(super) fn hash(&self) -> &str {
        &self.hash
    }
}

/// Count/token ranking shared by both corpus-derived vocabularies: most
/// frequent first, ties broken by ascending token text.
fn ranked(counts: HashMap<String, u64>) -> Vec<String> {
    let mut pairs: Vec<(String, u64)> = counts.into_iter().collect();
    pairs.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    pairs.into_iter().map(|(t, _)| t).collect()
}

fn assemble(
    kind: &'static str,
    specials: &[&str],
    ranked_tokens: Vec<String>,
    cap: usize,
) -> Result<TokenTable, TokenizeError> {
    if cap < specials.len() {
        return Err(TokenizeError::CapacityTooSmall {
            cap,
            special: specials.len(),
        });
    }
    let mut tokens: Vec<String> = specials.iter().map(|s| s.to_string()).collect();
    tokens.extend(ranked_tokens.into_iter().take(cap - specials.len()));
    Ok(TokenTable::new(kind, tokens))
}

/// Build the text and SMILES vocabularies from a corpus.
///
/// Identical corpora (as multisets, regardless of record order) produce
/// identical vocabularies: counts are order-independent and the ranking tie
/// break is total.
pub fn build_vocabs<'a>(
    sources: impl IntoIterator<Item = VocabSource<'a>>,
    caps: &VocabCaps,
) -> Result<(TextVocab, SmilesVocab), TokenizeError> {
    let mut word_counts: HashMap<String, u64> = HashMap::new();
    let mut smiles_counts: HashMap<String, u64> = HashMap::new();
    let mut seen_any = false;
    for source in sources {
        seen_any = true;
        let weight = source.weight.max(1) as u64;
        for word in words(source.instruction).into_iter().chain(words(source.description)) {
            *word_counts.entry(word).or_insert(0) += weight;
        }
        for token in lex(source.smiles)? {
            *smiles_counts.entry(token).or_insert(0) += weight;
        }
    }
    if !seen_any {
        return Err(TokenizeError::EmptyCorpus);
    }
    let text_table = assemble("text", &TEXT_SPECIALS, ranked(word_counts), caps.text)?;
    let smiles_table = assemble("smiles", &BASE_SPECIALS, ranked(smiles_counts), caps.smiles)?;
    Ok((
        TextVocab { table: text_table },
        SmilesVocab {
            table: smiles_table,
        },
    ))
}

/// Error raised by vocabulary file IO.
#[derive(Debug, thiserror::Error)]
pub enum VocabIoError {
    #[error("failed to access vocabulary file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: missing or malformed '#vocab v1 <kind> <hash>' header")]
    BadHeader { path: String },
    #[error("{path}: vocabulary kind is {found:?}, expected {expected:?}")]
    KindMismatch {
        path: String,
        found: String,
        expected: String,
    },
    #[error("{path}: content hash does not match the header (file edited or corrupted)")]
    HashMismatch { path: String },
    #[error("{path}: line {line} is empty; token ids must be contiguous")]
    EmptyToken { path: String, line: usize },
    #[error("{path}: line {line}: duplicate token {token:?}")]
    DuplicateToken {
        path: String,
        line: usize,
        token: String,
    },
    #[error("{path}: line {line} holds {found:?}; reserved token {expected:?} expected")]
    SpecialMismatch {
        path: String,
        line: usize,
        found: String,
        expected: String,
    },
}

fn save_table(path: &Path, table: &TokenTable) -> Result<(), VocabIoError> {
    let mut text = format!("#vocab v1 {} {}\n", table.kind, table.hash);
    for token in &table.tokens {
        text.push_str(token);
        text.push('\n');
    }
    atomic_write(path, text.as_bytes()).map_err(|source| VocabIoError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn load_table(
    path: &Path,
    kind: &'static str,
    specials: &[&str],
) -> Result<TokenTable, VocabIoError> {
    let display = path.display().to_string();
    let content = fs::read_to_string(path).map_err(|source| VocabIoError::Io {
        path: display.clone(),
        source,
    })?;
    let mut lines = content.lines();
    let header = lines.next().unwrap_or("");
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (found_kind, declared_hash) = match fields.as_slice() {
        ["#vocab", "v1", k, h] => (*k, *h),
        _ => return Err(VocabIoError::BadHeader { path: display }),
    };
    if found_kind != kind {
        return Err(VocabIoError::KindMismatch {
            path: display,
            found: found_kind.to_string(),
            expected: kind.to_string(),
        });
    }
    let mut tokens = Vec::new();
    let mut seen: HashMap<&str, ()> = HashMap::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2; // 1-based, after the header
        if line.is_empty() {
            return Err(VocabIoError::EmptyToken {
                path: display,
                line: lineno,
            });
        }
        if seen.insert(line, ()).is_some() {
            return Err(VocabIoError::DuplicateToken {
                path: display,
                line: lineno,
                token: line.to_string(),
            });
        }
        if let Some(&expected) = specials.get(i) {
            if line != expected {
                return Err(VocabIoError::SpecialMismatch {
                    path: display,
                    line: lineno,
                    found: line.to_string(),
                    expected: expected.to_string(),
                });
            }
        }
        tokens.push(line.to_string());
    }
    if tokens.len() < specials.len() {
        return Err(VocabIoError::BadHeader { path: display });
    }
    if hash_tokens(kind, &tokens) != declared_hash {
        return Err(VocabIoError::HashMismatch { path: display });
    }
    Ok(TokenTable::new(kind, tokens))
}

impl TextVocab {
    pub fn save(&self, path: &Path) -> Result<(), VocabIoError> {
        save_table(path, &self.table)
    }

    pub fn load(path: &Path) -> Result<Self, VocabIoError> {
        Ok(TextVocab {
            table: load_table(path, "text", &TEXT_SPECIALS)?,
        })
    }
}

impl SmilesVocab {
    pub fn save(&self, path: &Path) -> Result<(), VocabIoError> {
        save_table(path, &self.table)
    }

    pub fn load(path: &Path) -> Result<Self, VocabIoError> {
        Ok(SmilesVocab {
            table: load_table(path, "smiles", &BASE_SPECIALS)?,
        })
    }
}

impl super::ProteinVocab {
    /// Write the fixed protein vocabulary in the shared file format, for
    /// inspection alongside the derived vocabularies.
    pub fn save(path: &Path) -> Result<(), VocabIoError> {
        save_table(path, &TokenTable::new("protein", Self::tokens()))
    }
}
