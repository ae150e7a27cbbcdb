//! Linear warmup / linear decay learning-rate schedule.

use super::{TrainConfig, TrainError};

/// Learning rate for a 1-based step: climbs linearly from 0 to `peak_lr`
/// over `warmup_steps`, then falls linearly to 0 at `total_steps`. Both
/// segments agree at the knee, so the schedule is continuous. Steps outside
/// `1..=total_steps` are contract violations.
pub fn lr_at(step: usize, config: &TrainConfig) -> Result<f64, TrainError> {
    if step == 0 || step > config.total_steps {
        return Err(TrainError::StepOutOfRange {
            step,
            total: config.total_steps,
        });
    }
    let (warmup, total) = (config.warmup_steps, config.total_steps);
    let lr = if step <= warmup {
        config.peak_lr * step as f64 / warmup as f64
    } else {
        config.peak_lr * (total - step) as f64 / (total - warmup) as f64
    };
    Ok(lr)
}
