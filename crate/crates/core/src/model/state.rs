//! Named parameter storage, seeded initialization, and size reporting.

use indexmap::IndexMap;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{ConfigError, ModelConfig, ModelError, SubnetConfig};

/// One parameter tensor: row-major data plus its shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Param {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

/// Parameter sizes per sub-network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ParamCounts {
    pub text: usize,
    pub memory: usize,
    pub ligand: usize,
    pub adapter: usize,
    pub decoder: usize,
}

impl ParamCounts {
    pub fn total(&self) -> usize {
        self.text + self.memory + self.ligand + self.adapter + self.decoder
    }
}

/// The full set of trainable parameters plus the config they were built for.
///
/// Parameters are keyed by dotted names (`text.layer0.attn.wq`, `memory.m`,
/// `adapter.ligand.w`, ...); iteration order is creation order and is part of
/// the deterministic behavior of training and checkpointing.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub config: ModelConfig,
    pub params: IndexMap<String, Param>,
}

struct Init {
    params: IndexMap<String, Param>,
    rng: ChaCha8Rng,
    normal: Normal<f64>,
}

impl Init {
    fn random(&mut self, name: String, shape: &[usize]) {
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| self.normal.sample(&mut self.rng)).collect();
        self.params.insert(
            name,
            Param {
                shape: shape.to_vec(),
                data,
            },
        );
    }

    fn fill(&mut self, name: String, shape: &[usize], value: f64) {
        let n: usize = shape.iter().product();
        self.params.insert(
            name,
            Param {
                shape: shape.to_vec(),
                data: vec![value; n],
            },
        );
    }

    /// Attention + feed-forward weights for one post-layer-norm block.
    fn transformer_layer(&mut self, prefix: &str, s: &SubnetConfig) {
        let d = s.width;
        let h = s.width * s.ffn_multiplier;
        for w in ["wq", "wk", "wv", "wo"] {
            self.random(format!("{prefix}.attn.{w}"), &[d, d]);
        }
        for b in ["bq", "bk", "bv", "bo"] {
            self.fill(format!("{prefix}.attn.{b}"), &[d], 0.0);
        }
        self.fill(format!("{prefix}.ln1.gain"), &[d], 1.0);
        self.fill(format!("{prefix}.ln1.bias"), &[d], 0.0);
        self.random(format!("{prefix}.ffn.w1"), &[d, h]);
        self.fill(format!("{prefix}.ffn.b1"), &[h], 0.0);
        self.random(format!("{prefix}.ffn.w2"), &[h, d]);
        self.fill(format!("{prefix}.ffn.b2"), &[d], 0.0);
        self.fill(format!("{prefix}.ln2.gain"), &[d], 1.0);
        self.fill(format!("{prefix}.ln2.bias"), &[d], 0.0);
    }

    fn stack(&mut self, name: &str, s: &SubnetConfig, vocab: usize, positions: usize) {
        self.random(format!("{name}.embedding"), &[vocab, s.width]);
        self.random(format!("{name}.positions"), &[positions, s.width]);
        for l in 0..s.layers {
            self.transformer_layer(&format!("{name}.layer{l}"), s);
        }
    }
}

impl ModelState {
    /// Build a freshly initialized model: weights and embeddings drawn from
    /// N(0, 0.02), biases zero, layer-norm gains one. The same seed and
    /// config always produce bitwise-identical parameters.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self, ConfigError> {
        config.validate()?;
        let mut init = Init {
            params: IndexMap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            normal: Normal::new(0.0, 0.02).expect("valid distribution"),
        };
        if config.use_text_encoder {
            init.stack(
                "text",
                &config.text,
                config.text_vocab,
                config.max_text_positions,
            );
            if config.use_memory_module {
                let d = config.text.width;
                init.random("memory.m".to_string(), &[config.memory_size, d]);
                for w in ["wq", "wk", "wv"] {
                    init.random(format!("memory.{w}"), &[d, d]);
                }
            }
            init.random(
                "adapter.memory.w".to_string(),
                &[config.text.width, config.decoder.width],
            );
            init.fill(
                "adapter.memory.b".to_string(),
                &[config.decoder.width],
                0.0,
            );
        }
        if config.use_ligand_encoder {
            init.stack(
                "ligand",
                &config.ligand,
                config.ligand_vocab,
                config.max_ligand_positions,
            );
            init.random(
                "adapter.ligand.w".to_string(),
                &[config.ligand.width, config.decoder.width],
            );
            init.fill(
                "adapter.ligand.b".to_string(),
                &[config.decoder.width],
                0.0,
            );
        }
        init.stack(
            "decoder",
            &config.decoder,
            config.protein_vocab,
            config.max_protein_positions,
        );
        init.random(
            "decoder.out.w".to_string(),
            &[config.decoder.width, config.protein_vocab],
        );
        init.fill("decoder.out.b".to_string(), &[config.protein_vocab], 0.0);
        Ok(ModelState {
            config,
            params: init.params,
        })
    }

    pub fn param(&self, name: &str) -> &Param {
        self.params
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    /// Exact parameter sizes grouped by dotted-name prefix.
    pub fn count_parameters(&self) -> ParamCounts {
        let mut counts = ParamCounts::default();
        for (name, p) in &self.params {
            let n = p.numel();
            match name.split('.').next().unwrap_or("") {
                "text" => counts.text += n,
                "memory" => counts.memory += n,
                "ligand" => counts.ligand += n,
                "adapter" => counts.adapter += n,
                "decoder" => counts.decoder += n,
                other => panic!("parameter {name} has unknown group {other}"),
            }
        }
        counts
    }

    /// Error with the offending name if any parameter holds NaN or infinity.
    pub fn verify_finite(&self) -> Result<(), ModelError> {
        for (name, p) in &self.params {
            if p.data.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::NonFinite { name: name.clone() });
            }
        }
        Ok(())
    }
}
