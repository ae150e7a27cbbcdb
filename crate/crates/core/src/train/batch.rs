//! Token-count batching: shuffle, then greedily pack examples into batches
//! whose combined token totals stay within a budget.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::TrainError;
use crate::tokenize::TokenizedTriple;

/// Example indices packed into one optimizer step.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Batch {
    pub examples: Vec<usize>,
    /// Sum of the members' three-stream token totals.
    pub tokens: usize,
}

/// One epoch's worth of batches plus the examples that can never fit.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BatchPlan {
    pub batches: Vec<Batch>,
    /// Indices whose token total alone exceeds the budget, ascending.
    pub oversize: Vec<usize>,
}

impl BatchPlan {
    /// Tokens that made it into batches.
    pub fn packed_tokens(&self) -> usize {
        self.batches.iter().map(|b| b.tokens).sum()
    }
}

/// Shuffle `0..dataset.len()` with the seed, then close a batch whenever the
/// next example would push it past `tokens_per_batch`. Examples larger than
/// the whole budget are reported in `oversize` and skipped, so every index
/// appears exactly once in either a batch or the oversize list.
pub fn make_batches(
    dataset: &[TokenizedTriple],
    tokens_per_batch: usize,
    seed: u64,
) -> Result<BatchPlan, TrainError> {
    if dataset.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    if tokens_per_batch == 0 {
        return Err(TrainError::Config {
            field: "tokens_per_batch",
            detail: "must be at least 1".into(),
        });
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut plan = BatchPlan::default();
    let mut current = Batch::default();
    for i in order {
        let tokens = dataset[i].token_total();
        if tokens > tokens_per_batch {
            log::warn!(
                "example {i} needs {tokens} tokens but the batch budget is {tokens_per_batch}; skipped"
            );
            plan.oversize.push(i);
            continue;
        }
        if current.tokens + tokens > tokens_per_batch {
            plan.batches.push(std::mem::take(&mut current));
        }
        current.examples.push(i);
        current.tokens += tokens;
    }
    if !current.examples.is_empty() {
        plan.batches.push(current);
    }
    plan.oversize.sort_unstable();
    Ok(plan)
}
