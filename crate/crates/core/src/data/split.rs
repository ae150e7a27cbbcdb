//! Cluster-level train/validation/test splits and the ligand-based
//! partition of the test set.
//!
//! Clusters are atomic: every record of a cluster lands in the same split,
//! so no protein sequence can leak across splits. Validation additionally
//! drops records whose ligand occurs anywhere in training, and test records
//! are partitioned by whether their ligand string appears in training.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::cluster::Clustering;
use super::{DataError, Triple};

/// Cluster-size strata (by member sequence count), smallest first.
pub const STRATA: [(usize, usize); 4] = [
    (1, 500),
    (501, 1000),
    (1001, 2500),
    (2501, usize::MAX),
];

/// Clusters sampled per stratum, for validation and again for test.
pub const STRATUM_QUOTAS: [usize; 4] = [20, 10, 5, 1];

fn stratum_of(size: usize) -> usize {
    STRATA
        .iter()
        .position(|&(lo, hi)| size >= lo && size <= hi)
        .expect("strata cover all positive sizes")
}

fn stratum_label(s: usize) -> String {
    let (lo, hi) = STRATA[s];
    if hi == usize::MAX {
        format!(">{}", lo - 1)
    } else {
        format!("{lo}-{hi}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assignment {
    Train,
    Val,
    Test,
}

/// How one stratum's demand was met.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StratumReport {
    pub available: usize,
    pub val: usize,
    pub test: usize,
}

/// Per-cluster split assignment plus sampling diagnostics.
#[derive(Debug, Clone)]
pub struct SplitPlan {
    /// Parallel to `Clustering::clusters`.
    pub assignment: Vec<Assignment>,
    pub per_stratum: [StratumReport; 4],
    pub warnings: Vec<String>,
}

/// Assign whole clusters to train/validation/test.
///
/// Clusters are grouped into size strata; within each stratum a seeded
/// shuffle picks the validation quota, then the test quota, and everything
/// else trains. A stratum too small to satisfy both quotas falls back to an
/// even split of what it has (recorded as a warning). Each stratum draws
/// from its own generator, so one stratum's membership never perturbs
/// another's sample.
pub fn stratified_split(clustering: &Clustering, seed: u64) -> Result<SplitPlan, DataError> {
    if clustering.clusters.is_empty() {
        return Err(DataError::EmptyClusterList);
    }
    let mut by_stratum: [Vec<usize>; 4] = Default::default();
    for (ci, c) in clustering.clusters.iter().enumerate() {
        by_stratum[stratum_of(c.size())].push(ci);
    }
    let mut assignment = vec![Assignment::Train; clustering.clusters.len()];
    let mut warnings = Vec::new();
    let mut per_stratum = [StratumReport {
        available: 0,
        val: 0,
        test: 0,
    }; 4];
    for (s, quota) in STRATUM_QUOTAS.iter().enumerate() {
        let mut pool = by_stratum[s].clone();
        let mut rng =
            ChaCha8Rng::seed_from_u64(seed.wrapping_add((s as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)));
        pool.shuffle(&mut rng);
        let available = pool.len();
        let (val_take, test_take) = if available >= 2 * quota {
            (*quota, *quota)
        } else {
            let granted = available / 2;
            if available > 0 {
                warnings.push(format!(
                    "stratum {}: wanted {quota} validation + {quota} test clusters, \
                     granted {granted} + {granted} of {available} available",
                    stratum_label(s)
                ));
            }
            (granted, granted)
        };
        for &ci in &pool[..val_take] {
            assignment[ci] = Assignment::Val;
        }
        for &ci in &pool[val_take..val_take + test_take] {
            assignment[ci] = Assignment::Test;
        }
        per_stratum[s] = StratumReport {
            available,
            val: val_take,
            test: test_take,
        };
    }
    Ok(SplitPlan {
        assignment,
        per_stratum,
        warnings,
    })
}

/// Record-level result of applying a split plan.
#[derive(Debug, Clone)]
pub struct SplitOutcome {
    pub train: Vec<Triple>,
    pub val: Vec<Triple>,
    /// Validation records removed because their ligand occurs in training.
    pub val_dropped: Vec<Triple>,
    pub test_seen: Vec<Triple>,
    pub test_unseen: Vec<Triple>,
}

/// Total record mass (multiplicities included) of a triple list.
pub fn record_mass(triples: &[Triple]) -> usize {
    triples.iter().map(|t| t.multiplicity).sum()
}

/// Map every record to its cluster's split, drop validation records whose
/// ligand is seen in training, and partition test records by ligand novelty.
pub fn apply_split(
    plan: &SplitPlan,
    clustering: &Clustering,
    triples: &[Triple],
) -> Result<SplitOutcome, DataError> {
    let cluster_of = clustering.assignment_by_sequence();
    let mut train = Vec::new();
    let mut val_all = Vec::new();
    let mut test = Vec::new();
    for t in triples {
        let &ci = cluster_of
            .get(t.protein.as_str())
            .ok_or_else(|| DataError::UnclusteredSequence { id: t.id.clone() })?;
        match plan.assignment[ci] {
            Assignment::Train => train.push(t.clone()),
            Assignment::Val => val_all.push(t.clone()),
            Assignment::Test => test.push(t.clone()),
        }
    }
    let train_ligands: HashSet<&str> = train.iter().map(|t| t.smiles.as_str()).collect();
    let (val_dropped, val): (Vec<Triple>, Vec<Triple>) = val_all
        .into_iter()
        .partition(|t| train_ligands.contains(t.smiles.as_str()));
    let (test_seen, test_unseen): (Vec<Triple>, Vec<Triple>) = test
        .into_iter()
        .partition(|t| train_ligands.contains(t.smiles.as_str()));
    Ok(SplitOutcome {
        train,
        val,
        val_dropped,
        test_seen,
        test_unseen,
    })
}

/// Split the plan's test records by whether their ligand string occurs in
/// any training record: (seen, unseen).
pub fn partition_test_by_ligand(
    plan: &SplitPlan,
    clustering: &Clustering,
    triples: &[Triple],
) -> Result<(Vec<Triple>, Vec<Triple>), DataError> {
    let outcome = apply_split(plan, clustering, triples)?;
    Ok((outcome.test_seen, outcome.test_unseen))
}
