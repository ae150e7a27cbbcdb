//! The four-component generator: text encoder, memory module, ligand
//! encoder, and a prefix-conditioned autoregressive protein decoder.
//!
//! A description/instruction is encoded, compressed into a fixed number of
//! memory rows, and concatenated with encoded ligand rows; the combined
//! prefix conditions every decoder self-attention layer through that layer's
//! key/value projections.

pub mod forward;
pub mod state;

pub use forward::{MemoryOut, NllOut, Session};
pub use state::{ModelState, Param, ParamCounts};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::TensorError;

/// Shape of one transformer stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubnetConfig {
    pub layers: usize,
    pub heads: usize,
    pub width: usize,
    /// Hidden width of each feed-forward sublayer, as a multiple of `width`.
    pub ffn_multiplier: usize,
}

/// Full model shape, stream limits, and ablation switches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub text: SubnetConfig,
    pub ligand: SubnetConfig,
    pub decoder: SubnetConfig,
    /// Number of memory rows the text representation is compressed into.
    pub memory_size: usize,
    pub max_text_positions: usize,
    pub max_ligand_positions: usize,
    pub max_protein_positions: usize,
    pub text_vocab: usize,
    pub ligand_vocab: usize,
    pub protein_vocab: usize,
    pub use_text_encoder: bool,
    pub use_ligand_encoder: bool,
    pub use_memory_module: bool,
    pub dropout: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{subnet} width {width} is not divisible by its {heads} heads")]
    WidthNotDivisible {
        subnet: &'static str,
        width: usize,
        heads: usize,
    },
    #[error("{field} must be at least 1")]
    ZeroField { field: &'static str },
    #[error("the memory module requires the text encoder")]
    MemoryWithoutText,
    #[error("dropout rate {rate} is outside [0, 1)")]
    InvalidDropout { rate: f64 },
}

impl SubnetConfig {
    fn validate(&self, subnet: &'static str, fields: [&'static str; 3]) -> Result<(), ConfigError> {
        let [width_field, heads_field, mult_field] = fields;
        if self.width == 0 {
            return Err(ConfigError::ZeroField { field: width_field });
        }
        if self.heads == 0 {
            return Err(ConfigError::ZeroField { field: heads_field });
        }
        if self.ffn_multiplier == 0 {
            return Err(ConfigError::ZeroField { field: mult_field });
        }
        if self.width % self.heads != 0 {
            return Err(ConfigError::WidthNotDivisible {
                subnet,
                width: self.width,
                heads: self.heads,
            });
        }
        Ok(())
    }
}

impl ModelConfig {
    /// Small shape used throughout the tests.
    pub fn toy() -> Self {
        ModelConfig {
            text: SubnetConfig {
                layers: 2,
                heads: 2,
                width: 32,
                ffn_multiplier: 2,
            },
            ligand: SubnetConfig {
                layers: 2,
                heads: 2,
                width: 32,
                ffn_multiplier: 2,
            },
            decoder: SubnetConfig {
                layers: 2,
                heads: 2,
                width: 64,
                ffn_multiplier: 2,
            },
            memory_size: 8,
            max_text_positions: 128,
            max_ligand_positions: 64,
            max_protein_positions: 512,
            text_vocab: 256,
            ligand_vocab: 64,
            protein_vocab: crate::tokenize::protein::ProteinVocab::SIZE,
            use_text_encoder: true,
            use_ligand_encoder: true,
            use_memory_module: true,
            dropout: 0.0,
        }
    }

    /// The 1B-scale shape: 12/12/768 text, 64 memory rows, 6/12/768 ligand,
    /// 27/16/1536 decoder.
    pub fn paper_1b() -> Self {
        ModelConfig {
            text: SubnetConfig {
                layers: 12,
                heads: 12,
                width: 768,
                ffn_multiplier: 4,
            },
            ligand: SubnetConfig {
                layers: 6,
                heads: 12,
                width: 768,
                ffn_multiplier: 4,
            },
            decoder: SubnetConfig {
                layers: 27,
                heads: 16,
                width: 1536,
                ffn_multiplier: 4,
            },
            memory_size: 64,
            max_text_positions: 512,
            max_ligand_positions: 256,
            max_protein_positions: 1024,
            text_vocab: 8192,
            ligand_vocab: 1024,
            protein_vocab: crate::tokenize::protein::ProteinVocab::SIZE,
            use_text_encoder: true,
            use_ligand_encoder: true,
            use_memory_module: true,
            dropout: 0.0,
        }
    }

    /// The 3B-scale shape: same encoders as 1B, 32/32/2560 decoder.
    pub fn paper_3b() -> Self {
        ModelConfig {
            decoder: SubnetConfig {
                layers: 32,
                heads: 32,
                width: 2560,
                ffn_multiplier: 4,
            },
            ..Self::paper_1b()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "toy" => Some(Self::toy()),
            "paper-1B" => Some(Self::paper_1b()),
            "paper-3B" => Some(Self::paper_3b()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.use_text_encoder {
            self.text
                .validate("text", ["text width", "text heads", "text ffn_multiplier"])?;
            if self.max_text_positions == 0 {
                return Err(ConfigError::ZeroField {
                    field: "max_text_positions",
                });
            }
            if self.text_vocab == 0 {
                return Err(ConfigError::ZeroField { field: "text_vocab" });
            }
        }
        if self.use_ligand_encoder {
            self.ligand.validate(
                "ligand",
                ["ligand width", "ligand heads", "ligand ffn_multiplier"],
            )?;
            if self.max_ligand_positions == 0 {
                return Err(ConfigError::ZeroField {
                    field: "max_ligand_positions",
                });
            }
            if self.ligand_vocab == 0 {
                return Err(ConfigError::ZeroField {
                    field: "ligand_vocab",
                });
            }
        }
        self.decoder.validate(
            "decoder",
            [
                "decoder width",
                "decoder heads",
                "decoder ffn_multiplier",
            ],
        )?;
        if self.max_protein_positions == 0 {
            return Err(ConfigError::ZeroField {
                field: "max_protein_positions",
            });
        }
        if self.protein_vocab == 0 {
            return Err(ConfigError::ZeroField {
                field: "protein_vocab",
            });
        }
        if self.use_memory_module {
            if !self.use_text_encoder {
                return Err(ConfigError::MemoryWithoutText);
            }
            if self.memory_size == 0 {
                return Err(ConfigError::ZeroField {
                    field: "memory_size",
                });
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ConfigError::InvalidDropout { rate: self.dropout });
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("protein prefix must start with BOS and be nonempty")]
    BosRequired,
    #[error("parameter {name} contains a non-finite value")]
    NonFinite { name: String },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}
