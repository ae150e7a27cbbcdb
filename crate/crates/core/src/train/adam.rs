//! Bias-corrected Adam with optional global-norm gradient clipping.

use indexmap::IndexMap;

use super::{lr_at, StepRecord, TrainConfig, TrainError};
use crate::model::ModelState;

/// First and second moment estimates, keyed by parameter name. Entries
/// appear the first time a parameter receives a gradient.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdamState {
    pub m: IndexMap<String, Vec<f64>>,
    pub v: IndexMap<String, Vec<f64>>,
}

impl AdamState {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Diagnostics from one optimizer step: the learning rate applied and the
/// global gradient norm before clipping.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepStats {
    pub lr: f64,
    pub grad_norm: f64,
}

impl StepStats {
    pub fn record(self, step: usize, loss: f64, tokens: usize) -> StepRecord {
        StepRecord {
            step,
            loss,
            lr: self.lr,
            grad_norm: self.grad_norm,
            tokens,
        }
    }
}

/// Apply one Adam update at the given 1-based step. Any non-finite gradient
/// aborts before any parameter moves. If the global gradient norm exceeds
/// `grad_clip`, every gradient is scaled down to meet it. Moments are
/// bias-corrected with the step number, so a resumed run on a restored
/// optimizer continues the exact arithmetic of an uninterrupted one.
pub fn adam_step(
    state: &mut ModelState,
    optimizer: &mut AdamState,
    grads: &IndexMap<String, Vec<f64>>,
    step: usize,
    config: &TrainConfig,
) -> Result<StepStats, TrainError> {
    for (name, g) in grads {
        if g.iter().any(|x| !x.is_finite()) {
            return Err(TrainError::NonFiniteGradient { name: name.clone() });
        }
    }
    let lr = lr_at(step, config)?;
    let grad_norm = grads
        .values()
        .flat_map(|g| g.iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt();
    let scale = match config.grad_clip {
        Some(clip) if grad_norm > clip => clip / grad_norm,
        _ => 1.0,
    };
    let bias1 = 1.0 - config.beta1.powi(step as i32);
    let bias2 = 1.0 - config.beta2.powi(step as i32);
    for (name, g) in grads {
        let param = state
            .params
            .get_mut(name)
            .unwrap_or_else(|| panic!("gradient for unknown parameter {name}"));
        assert_eq!(param.data.len(), g.len(), "gradient size mismatch for {name}");
        let m = optimizer
            .m
            .entry(name.clone())
            .or_insert_with(|| vec![0.0; g.len()]);
        let v = optimizer
            .v
            .entry(name.clone())
            .or_insert_with(|| vec![0.0; g.len()]);
        for k in 0..g.len() {
            let gk = g[k] * scale;
            m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * gk;
            v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * gk * gk;
            let m_hat = m[k] / bias1;
            let v_hat = v[k] / bias2;
            param.data[k] -= lr * m_hat / (v_hat.sqrt() + config.eps);
        }
    }
    Ok(StepStats { lr, grad_norm })
}
