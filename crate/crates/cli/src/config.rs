//! The TOML run configuration: pick a model and training preset, then
//! override individual fields. Unknown keys are rejected with their name, and
//! semantic violations surface the offending field, so a typo never silently
//! trains the wrong model.
//!
//! ```toml
//! seed = 7
//!
//! [model]
//! preset = "toy"
//! memory_size = 16
//!
//! [model.decoder]
//! layers = 1
//!
//! [train]
//! preset = "toy"
//! total_steps = 2000
//! checkpoint_interval = 500
//! grad_clip = 0.0        # 0 disables clipping
//! ```

use std::path::Path;

use serde::Deserialize;

use prodesign_core::model::{ModelConfig, SubnetConfig};
use prodesign_core::train::TrainConfig;

use crate::CliError;

pub const MODEL_PRESETS: [&str; 3] = ["toy", "paper-1B", "paper-3B"];

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    /// Master seed: model initialization and, unless `[train].seed` is set,
    /// batch order and dropout too.
    pub seed: Option<u64>,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub preset: Option<String>,
    pub text: Option<SubnetSection>,
    pub ligand: Option<SubnetSection>,
    pub decoder: Option<SubnetSection>,
    pub memory_size: Option<usize>,
    pub max_text_positions: Option<usize>,
    pub max_ligand_positions: Option<usize>,
    pub max_protein_positions: Option<usize>,
    pub text_vocab: Option<usize>,
    pub ligand_vocab: Option<usize>,
    pub use_text_encoder: Option<bool>,
    pub use_ligand_encoder: Option<bool>,
    pub use_memory_module: Option<bool>,
    pub dropout: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubnetSection {
    pub layers: Option<usize>,
    pub heads: Option<usize>,
    pub width: Option<usize>,
    pub ffn_multiplier: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub preset: Option<String>,
    pub total_steps: Option<usize>,
    pub peak_lr: Option<f64>,
    pub warmup_steps: Option<usize>,
    pub tokens_per_batch: Option<usize>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub eps: Option<f64>,
    /// Global-norm clip; 0 disables clipping entirely.
    pub grad_clip: Option<f64>,
    pub seed: Option<u64>,
    /// Steps between periodic checkpoints; 0 keeps only the final one.
    pub checkpoint_interval: Option<usize>,
}

/// Read and parse a TOML run configuration.
pub fn load(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::read(path, &e))?;
    toml::from_str(&text)
        .map_err(|e| CliError::Usage(format!("{}: {}", path.display(), e.message())))
}

fn apply_subnet(base: &mut SubnetConfig, over: &Option<SubnetSection>) {
    if let Some(s) = over {
        if let Some(v) = s.layers {
            base.layers = v;
        }
        if let Some(v) = s.heads {
            base.heads = v;
        }
        if let Some(v) = s.width {
            base.width = v;
        }
        if let Some(v) = s.ffn_multiplier {
            base.ffn_multiplier = v;
        }
    }
}

/// Resolve the model section against its preset and pin the text and ligand
/// vocabulary sizes to the loaded vocabulary files. A config that names
/// conflicting sizes is rejected rather than silently corrected.
pub fn resolve_model(
    section: &ModelSection,
    vocab_sizes: Option<(usize, usize)>,
) -> Result<ModelConfig, CliError> {
    let name = section.preset.as_deref().unwrap_or("toy");
    let mut config = ModelConfig::preset(name).ok_or_else(|| {
        CliError::Usage(format!(
            "model.preset {name:?} is not one of {MODEL_PRESETS:?}"
        ))
    })?;
    apply_subnet(&mut config.text, &section.text);
    apply_subnet(&mut config.ligand, &section.ligand);
    apply_subnet(&mut config.decoder, &section.decoder);
    if let Some(v) = section.memory_size {
        config.memory_size = v;
    }
    if let Some(v) = section.max_text_positions {
        config.max_text_positions = v;
    }
    if let Some(v) = section.max_ligand_positions {
        config.max_ligand_positions = v;
    }
    if let Some(v) = section.max_protein_positions {
        config.max_protein_positions = v;
    }
    if let Some(v) = section.use_text_encoder {
        config.use_text_encoder = v;
    }
    if let Some(v) = section.use_ligand_encoder {
        config.use_ligand_encoder = v;
    }
    if let Some(v) = section.use_memory_module {
        config.use_memory_module = v;
    }
    if let Some(v) = section.dropout {
        config.dropout = v;
    }
    match vocab_sizes {
        Some((text, ligand)) => {
            if let Some(v) = section.text_vocab {
                if v != text {
                    return Err(CliError::Usage(format!(
                        "model.text_vocab is {v} but the text vocabulary file holds {text} tokens"
                    )));
                }
            }
            if let Some(v) = section.ligand_vocab {
                if v != ligand {
                    return Err(CliError::Usage(format!(
                        "model.ligand_vocab is {v} but the SMILES vocabulary file holds {ligand} tokens"
                    )));
                }
            }
            config.text_vocab = text;
            config.ligand_vocab = ligand;
        }
        None => {
            if let Some(v) = section.text_vocab {
                config.text_vocab = v;
            }
            if let Some(v) = section.ligand_vocab {
                config.ligand_vocab = v;
            }
        }
    }
    config.validate()?;
    Ok(config)
}

/// Resolve the training section. `seed_override` (the `--seed` flag) wins
/// over `[train].seed`, which wins over the file-level master seed.
pub fn resolve_train(
    section: &TrainSection,
    master_seed: Option<u64>,
    seed_override: Option<u64>,
) -> Result<(TrainConfig, usize), CliError> {
    let name = section.preset.as_deref().unwrap_or("toy");
    let total = section.total_steps.ok_or_else(|| {
        CliError::Usage("train.total_steps is required".to_string())
    })?;
    let mut config = TrainConfig::preset(name, total).ok_or_else(|| {
        CliError::Usage(format!(
            "train.preset {name:?} is not one of {MODEL_PRESETS:?}"
        ))
    })?;
    if let Some(v) = section.peak_lr {
        config.peak_lr = v;
    }
    if let Some(v) = section.warmup_steps {
        config.warmup_steps = v;
    }
    if let Some(v) = section.tokens_per_batch {
        config.tokens_per_batch = v;
    }
    if let Some(v) = section.beta1 {
        config.beta1 = v;
    }
    if let Some(v) = section.beta2 {
        config.beta2 = v;
    }
    if let Some(v) = section.eps {
        config.eps = v;
    }
    if let Some(v) = section.grad_clip {
        config.grad_clip = if v == 0.0 { None } else { Some(v) };
    }
    config.seed = seed_override
        .or(section.seed)
        .or(master_seed)
        .unwrap_or(config.seed);
    config
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    Ok((config, section.checkpoint_interval.unwrap_or(0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> FileConfig {
        toml::from_str(text).unwrap()
    }

    #[test]
    fn defaults_resolve_to_the_toy_preset() {
        let file = parse("[train]\ntotal_steps = 100\n");
        let model = resolve_model(&file.model, Some((50, 30))).unwrap();
        assert_eq!(model, {
            let mut m = ModelConfig::toy();
            m.text_vocab = 50;
            m.ligand_vocab = 30;
            m
        });
        let (train, interval) = resolve_train(&file.train, None, None).unwrap();
        assert_eq!(train.total_steps, 100);
        assert_eq!(train.tokens_per_batch, 512); // toy preset
        assert_eq!(interval, 0);
    }

    #[test]
    fn overrides_land_in_the_right_fields() {
        let file = parse(
            "seed = 9\n\
             [model]\npreset = \"toy\"\nmemory_size = 16\nuse_memory_module = false\n\
             [model.decoder]\nlayers = 1\nwidth = 32\n\
             [train]\ntotal_steps = 50\nwarmup_steps = 5\npeak_lr = 3e-3\ncheckpoint_interval = 10\n",
        );
        let model = resolve_model(&file.model, Some((64, 32))).unwrap();
        assert_eq!(model.memory_size, 16);
        assert!(!model.use_memory_module);
        assert_eq!(model.decoder.layers, 1);
        assert_eq!(model.decoder.width, 32);
        assert_eq!(model.decoder.heads, 2); // preset value survives
        let (train, interval) = resolve_train(&file.train, file.seed, None).unwrap();
        assert_eq!(train.peak_lr, 3e-3);
        assert_eq!(train.seed, 9);
        assert_eq!(interval, 10);
    }

    #[test]
    fn seed_precedence_is_flag_then_section_then_file() {
        let file = parse("seed = 1\n[train]\ntotal_steps = 10\nwarmup_steps = 5\nseed = 2\n");
        let (t, _) = resolve_train(&file.train, file.seed, Some(3)).unwrap();
        assert_eq!(t.seed, 3);
        let (t, _) = resolve_train(&file.train, file.seed, None).unwrap();
        assert_eq!(t.seed, 2);
        let file = parse("seed = 1\n[train]\ntotal_steps = 10\nwarmup_steps = 5\n");
        let (t, _) = resolve_train(&file.train, file.seed, None).unwrap();
        assert_eq!(t.seed, 1);
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = toml::from_str::<FileConfig>("[train]\ntotal_stepz = 5\n").unwrap_err();
        assert!(err.message().contains("total_stepz"), "{err}");
    }

    #[test]
    fn unknown_preset_lists_the_valid_names() {
        let file = parse("[model]\npreset = \"huge\"\n");
        let err = resolve_model(&file.model, None).unwrap_err();
        assert_eq!(err.code(), 2);
        assert!(err.message().contains("toy"), "{err}");
    }

    #[test]
    fn zero_grad_clip_disables_clipping() {
        let file = parse("[train]\ntotal_steps = 10\nwarmup_steps = 5\ngrad_clip = 0.0\n");
        let (t, _) = resolve_train(&file.train, None, None).unwrap();
        assert_eq!(t.grad_clip, None);
        let file = parse("[train]\ntotal_steps = 10\nwarmup_steps = 5\ngrad_clip = 2.5\n");
        let (t, _) = resolve_train(&file.train, None, None).unwrap();
        assert_eq!(t.grad_clip, Some(2.5));
    }

    #[test]
    fn total_steps_is_required() {
        let file = parse("[train]\npreset = \"toy\"\n");
        let err = resolve_train(&file.train, None, None).unwrap_err();
        assert!(err.message().contains("total_steps"), "{err}");
    }

    #[test]
    fn vocab_size_conflicts_are_rejected() {
        let file = parse("[model]\ntext_vocab = 100\n");
        let err = resolve_model(&file.model, Some((99, 10))).unwrap_err();
        assert_eq!(err.code(), 2);
        assert!(err.message().contains("text_vocab"), "{err}");
    }

    #[test]
    fn semantic_violations_name_the_field() {
        let file = parse("[model]\n[model.decoder]\nwidth = 30\nheads = 4\n");
        let err = resolve_model(&file.model, None).unwrap_err();
        assert_eq!(err.code(), 2);
        assert!(err.message().contains("decoder"), "{err}");
        let file = parse("[train]\ntotal_steps = 10\nwarmup_steps = 5\npeak_lr = -1.0\n");
        let err = resolve_train(&file.train, None, None).unwrap_err();
        assert!(err.message().contains("peak_lr"), "{err}");
    }
}
