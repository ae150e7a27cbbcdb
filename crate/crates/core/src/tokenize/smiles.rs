//! SMILES lexer and corpus-derived ligand vocabulary.

use super::vocab::TokenTable;
use super::{Encoded, TokenizeError, BOS, EOS, UNK};

/// Characters that form a token on their own: organic-subset atoms, aromatic
/// atoms, bonds, branches, ring-bond digits, charge/chirality marks, and the
/// wildcard atom.
const SINGLE_CHAR_TOKENS: &[u8] = b"BCNOPSFIbcnops0123456789-=#$:/\\.()@+*";

/// Split a SMILES string into tokens.
///
/// Multi-character tokens are bracket atoms `[...]` (verbatim through the
/// closing bracket), the two-letter elements `Cl` and `Br`, and two-digit
/// ring-bond labels `%NN`. Everything else must be a single-character token
/// from the grammar; the first offending byte is reported.
pub fn lex(smiles: &str) -> Result<Vec<String>, TokenizeError> {
    if smiles.is_empty() {
        return Err(TokenizeError::EmptySmiles);
    }
    let bytes = smiles.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'[' => match bytes[i..].iter().position(|&c| c == b']') {
                Some(rel) => {
                    tokens.push(smiles[i..=i + rel].to_string());
                    i += rel + 1;
                }
                None => return Err(TokenizeError::UnmatchedBracket { position: i }),
            },
            b'C' if bytes.get(i + 1) == Some(&b'l') => {
                tokens.push("Cl".to_string());
                i += 2;
            }
            b'B' if bytes.get(i + 1) == Some(&b'r') => {
                tokens.push("Br".to_string());
                i += 2;
            }
            b'%' => {
                let two_digits = bytes.get(i + 1).is_some_and(|c| c.is_ascii_digit())
                    && bytes.get(i + 2).is_some_and(|c| c.is_ascii_digit());
                if !two_digits {
                    return Err(TokenizeError::MalformedPercent { position: i });
                }
                tokens.push(smiles[i..i + 3].to_string());
                i += 3;
            }
            b if SINGLE_CHAR_TOKENS.contains(&b) => {
                tokens.push((b as char).to_string());
                i += 1;
            }
            _ => {
                let ch = smiles[i..].chars().next().expect("in-bounds char");
                return Err(TokenizeError::UnexpectedChar { ch, position: i });
            }
        }
    }
    Ok(tokens)
}

/// Ligand vocabulary: 4 specials plus the most frequent corpus tokens.
#[derive(Clone, Debug)]
pub struct SmilesVocab {
    pub(super) table: TokenTable,
}

impl SmilesVocab {
    pub fn size(&self) -> usize {
        self.table.len()
    }

    /// Token string for an id, if in range.
    pub fn token(&self, id: u32) -> Option<&str> {
        self.table.token(id)
    }

    /// Token strings in id order.
    pub fn tokens(&self) -> &[String] {
        self.table.tokens()
    }

    /// Content hash of the token list.
    pub fn hash(&self) -> &str {
        self.table.hash()
    }

    /// Lex and encode as `[BOS, tokens..., EOS]`; lexed tokens missing from
    /// the vocabulary become `<UNK>` and are counted.
    pub fn encode(&self, smiles: &str) -> Result<Encoded, TokenizeError> {
        let lexed = lex(smiles)?;
        let mut ids = Vec::with_capacity(lexed.len() + 2);
        let mut unknown = 0;
        ids.push(BOS);
        for token in &lexed {
            match self.table.id(token) {
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
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        lex(s).unwrap()
    }

    #[test]
    fn lexes_simple_chains() {
        assert_eq!(toks("CCO"), ["C", "C", "O"]);
        assert_eq!(toks("C=O"), ["C", "=", "O"]);
        assert_eq!(toks("CC(=O)O"), ["C", "C", "(", "=", "O", ")", "O"]);
    }

    #[test]
    fn lexes_aromatic_rings() {
        assert_eq!(toks("c1ccccc1"), ["c", "1", "c", "c", "c", "c", "c", "1"]);
    }

    #[test]
    fn lexes_bracket_atoms_verbatim() {
        assert_eq!(toks("C[NH4+].Cl"), ["C", "[NH4+]", ".", "Cl"]);
        assert_eq!(toks("[C@@H](Br)I"), ["[C@@H]", "(", "Br", ")", "I"]);
    }

    #[test]
    fn lexes_two_letter_elements_greedily() {
        assert_eq!(toks("ClBr"), ["Cl", "Br"]);
        // 'C' followed by something that is not 'l' stays a single token.
        assert_eq!(toks("CB"), ["C", "B"]);
    }

    #[test]
    fn lexes_percent_ring_labels() {
        assert_eq!(toks("C%10CC%10"), ["C", "%10", "C", "C", "%10"]);
        assert_eq!(toks("%123"), ["%12", "3"]);
    }

    #[test]
    fn reports_unmatched_bracket_position() {
        assert_eq!(
            lex("CC[NH4+"),
            Err(TokenizeError::UnmatchedBracket { position: 2 })
        );
    }

    #[test]
    fn reports_character_outside_grammar() {
        assert_eq!(
            lex("CEx"),
            Err(TokenizeError::UnexpectedChar { ch: 'E', position: 1 })
        );
        assert_eq!(
            lex("Cé"),
            Err(TokenizeError::UnexpectedChar { ch: 'é', position: 1 })
        );
    }

    #[test]
    fn reports_malformed_percent_label() {
        assert_eq!(lex("C%1C"), Err(TokenizeError::MalformedPercent { position: 1 }));
        assert_eq!(lex("%9"), Err(TokenizeError::MalformedPercent { position: 0 }));
    }

    #[test]
    fn rejects_empty_input() {
        assert_eq!(lex(""), Err(TokenizeError::EmptySmiles));
    }

    proptest! {
        // Joining independently valid tokens and re-lexing recovers exactly
        // those tokens: the grammar has no cross-token merges for material
        // that is itself lexable.
        #[test]
        fn lexing_is_the_inverse_of_joining_tokens(
            picks in proptest::collection::vec(0usize..16, 1..40)
        ) {
            let alphabet = [
                "C", "Cl", "Br", "c", "n", "1", "2", "9", "(", ")", "=", "#",
                "[NH3+]", "[O-]", "%12", "*",
            ];
            let tokens: Vec<&str> = picks.iter().map(|&i| alphabet[i]).collect();
            let joined: String = tokens.concat();
            let lexed = lex(&joined).unwrap();
            prop_assert_eq!(lexed, tokens);
        }
    }
}
