//! Tokenizers for the three input modalities.
//!
//! All vocabularies reserve the same four leading ids: `<PAD>`=0, `<BOS>`=1,
//! `<EOS>`=2, `<UNK>`=3. The protein vocabulary is fixed (20 canonical
//! residues); the instruction-text and ligand-SMILES vocabularies are derived
//! from a training corpus and carry a content hash so checkpoints can verify
//! they decode with the vocabulary they were trained with.

pub mod protein;
pub mod smiles;
pub mod text;
pub mod vocab;

pub use protein::ProteinVocab;
pub use smiles::SmilesVocab;
pub use text::TextVocab;
pub use vocab::{VocabCaps, VocabHashes};

/// Padding token id, shared by every vocabulary.
pub const PAD: u32 = 0;
/// Begin-of-sequence token id, shared by every vocabulary.
pub const BOS: u32 = 1;
/// End-of-sequence token id, shared by every vocabulary.
pub const EOS: u32 = 2;
/// Unknown-token id, shared by every vocabulary.
pub const UNK: u32 = 3;

pub(crate) const BASE_SPECIALS: [&str; 4] = ["<PAD>", "<BOS>", "<EOS>", "<UNK>"];

/// Error raised while tokenizing text, SMILES, or protein strings, or while
/// assembling a vocabulary.
#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TokenizeError {
    #[error("empty protein sequence")]
    EmptyProtein,
    #[error("empty function description")]
    EmptyDescription,
    #[error("empty SMILES string")]
    EmptySmiles,
    #[error("unmatched '[' at byte {position}")]
    UnmatchedBracket { position: usize },
    #[error("character {ch:?} at byte {position} is outside the SMILES grammar")]
    UnexpectedChar { ch: char, position: usize },
    #[error("'%' ring-bond label at byte {position} must be followed by exactly two digits")]
    MalformedPercent { position: usize },
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("vocabulary capacity {cap} is below the {special} reserved special tokens")]
    CapacityTooSmall { cap: usize, special: usize },
}

/// Token ids plus how many source units fell back to `<UNK>`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Encoded {
    pub ids: Vec<u32>,
    pub unknown: usize,
}

/// One training example after tokenization: `[BOS, ..., EOS]` id streams for
/// the instruction text, the ligand SMILES, and the protein sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenizedTriple {
    pub text: Vec<u32>,
    pub smiles: Vec<u32>,
    pub protein: Vec<u32>,
}

impl TokenizedTriple {
    /// Combined length of all three streams; the unit used for token-count
    /// batching.
    pub fn token_total(&self) -> usize {
        self.text.len() + self.smiles.len() + self.protein.len()
    }
}

/// How many units of each modality mapped to `<UNK>` while encoding a triple.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct UnknownCounts {
    pub text: usize,
    pub smiles: usize,
    pub protein: usize,
}

/// The corpus-derived vocabularies needed to encode a full training example.
#[derive(Clone, Debug)]
pub struct Tokenizers {
    pub text: TextVocab,
    pub smiles: SmilesVocab,
}

impl Tokenizers {
    /// Encode one record into the three id streams.
    pub fn encode(
        &self,
        instruction: &str,
        description: &str,
        smiles: &str,
        protein: &str,
    ) -> Result<(TokenizedTriple, UnknownCounts), TokenizeError> {
        let text = self.text.encode(instruction, description)?;
        let ligand = self.smiles.encode(smiles)?;
        let prot = ProteinVocab::encode(protein)?;
        let counts = UnknownCounts {
            text: text.unknown,
            smiles: ligand.unknown,
            protein: prot.unknown,
        };
        Ok((
            TokenizedTriple {
                text: text.ids,
                smiles: ligand.ids,
                protein: prot.ids,
            },
            counts,
        ))
    }

    /// Content hashes of all three vocabularies, in the order checkpoints
    /// store them.
    pub fn hashes(&self) -> VocabHashes {
        VocabHashes {
            text: self.text.hash().to_string(),
            smiles: self.smiles.hash().to_string(),
            protein: ProteinVocab::hash(),
        }
    }
}
