//! Fixed protein tokenizer: 4 specials + the 20 canonical amino acids.

use super::{Encoded, TokenizeError, BASE_SPECIALS, BOS, EOS, UNK};

/// Canonical residues in id order; `'A'` is id 4, `'Y'` is id 23.
pub const RESIDUES: &str = "ACDEFGHIKLMNPQRSTVWY";

/// The fixed 24-entry protein vocabulary.
pub struct ProteinVocab;

impl ProteinVocab {
    /// Total vocabulary size including specials.
    pub const SIZE: usize = 24;

    /// Token strings in id order: the four specials, then one single-letter
    /// token per residue.
    pub fn tokens() -> Vec<String> {
        BASE_SPECIALS
            .iter()
            .map(|s| s.to_string())
            .chain(RESIDUES.chars().map(String::from))
            .collect()
    }

    /// Id of a residue character, or `None` for anything outside the 20.
    pub fn id(residue: char) -> Option<u32> {
        RESIDUES
            .find(residue)
            .map(|pos| (pos + BASE_SPECIALS.len()) as u32)
    }

    /// Residue character for an id, or `None` for specials and out-of-range
    /// ids.
    pub fn residue(id: u32) -> Option<char> {
        let pos = (id as usize).checked_sub(BASE_SPECIALS.len())?;
        RESIDUES.chars().nth(pos)
    }

    /// Encode a sequence as `[BOS, residues..., EOS]`; characters outside the
    /// canonical 20 become `<UNK>` and are counted in
    /// [`Encoded::unknown`].
    pub fn encode(sequence: &str) -> Result<Encoded, TokenizeError> {
        if sequence.is_empty() {
            return Err(TokenizeError::EmptyProtein);
        }
        let mut ids = Vec::with_capacity(sequence.chars().count() + 2);
        let mut unknown = 0;
        ids.push(BOS);
        for ch in sequence.chars() {
            match Self::id(ch) {
                Some(id) => ids.push(id),
                None => {
                    ids.push(UNK);
                    unknown += 1;
                }
            }
        }
        ids.push(EOS);
        Ok(Encoded { ids, unknown })
    }

    /// Decode ids back to residue characters. Specials, `<UNK>`, and
    /// out-of-range ids are skipped.
    pub fn decode(ids: &[u32]) -> String {
        ids.iter().filter_map(|&id| Self::residue(id)).collect()
    }

    /// Content hash over the fixed token list, in the same format as the
    /// corpus-derived vocabularies.
    pub fn hash() -> String {
        super::vocab::hash_tokens("protein", &Self::tokens())
    }
}
