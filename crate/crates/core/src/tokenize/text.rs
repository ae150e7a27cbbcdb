//! Instruction-text tokenizer and corpus-derived word vocabulary.

use super::vocab::TokenTable;
use super::{Encoded, TokenizeError, BOS, EOS, UNK};

/// Marker token wrapped around the function description.
pub const FUNCTION_OPEN: &str = "<FUNCTION>";
/// Closing marker for the function description.
pub const FUNCTION_CLOSE: &str = "</FUNCTION>";

/// Id of [`FUNCTION_OPEN`] in every text vocabulary.
pub const FUNCTION_OPEN_ID: u32 = 4;
/// Id of [`FUNCTION_CLOSE`] in every text vocabulary.
pub const FUNCTION_CLOSE_ID: u32 = 5;

pub(super) const TEXT_SPECIALS: [&str; 6] = [
    "<PAD>",
    "<BOS>",
    "<EOS>",
    "<UNK>",
    FUNCTION_OPEN,
    FUNCTION_CLOSE,
];

/// Lowercased maximal alphanumeric runs; everything else is a separator.
pub fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| w.to_lowercase())
        .collect()
}

/// Instruction vocabulary: 6 specials plus the most frequent corpus words.
#[derive(Clone, Debug)]
pub struct TextVocab {
    pub(super) table: TokenTable,
}

impl TextVocab {
    pub fn size(&self) -> usize {
        self.table.len()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.table.token(id)
    }

    pub fn tokens(&self) -> &[String] {
        self.table.tokens()
    }

    pub fn hash(&self) -> &str {
        self.table.hash()
    }

    /// Encode an (instruction, description) pair as
    /// `[BOS, instruction..., <FUNCTION>, description..., </FUNCTION>, EOS]`.
    ///
    /// The instruction may be empty; the description must contain at least
    /// one word. Words outside the vocabulary become `<UNK>` and are counted.
    pub fn encode(&self, instruction: &str, description: &str) -> Result<Encoded, TokenizeError> {
        let desc_words = words(description);
        if desc_words.is_empty() {
            return Err(TokenizeError::EmptyDescription);
        }
        let instr_words = words(instruction);
        let mut ids = Vec::with_capacity(instr_words.len() + desc_words.len() + 4);
        let mut unknown = 0;
        let mut push_word = |ids: &mut Vec<u32>, word: &str| match self.table.id(word) {
            Some(id) => ids.push(id),
            None => {
                ids.push(UNK);
                unknown += 1;
            }
        };
        ids.push(BOS);
        for w in &instr_words {
            push_word(&mut ids, w);
        }
        ids.push(FUNCTION_OPEN_ID);
        for w in &desc_words {
            push_word(&mut ids, w);
        }
        ids.push(FUNCTION_CLOSE_ID);
        ids.push(EOS);
        Ok(Encoded { ids, unknown })
    }
}
