//! Greedy identity clustering of protein sequences.
//!
//! Unique sequences are visited from longest to shortest; each joins the
//! first cluster whose representative aligns to it at or above the identity
//! threshold, otherwise it founds a new cluster. A k-mer counting bound lets
//! the scan skip representatives that provably cannot reach the threshold,
//! without ever changing the result.

use std::collections::HashMap;

use super::{DataError, Triple};
use crate::metrics::{global_align, Scoring};

/// Default identity threshold for clustering.
pub const DEFAULT_THRESHOLD: f64 = 0.30;
/// Default k-mer length for the candidate prefilter.
pub const DEFAULT_KMER_LEN: usize = 1;

/// A distinct protein sequence together with the smallest record id that
/// carries it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UniqueSequence {
    pub id: String,
    pub sequence: String,
}

/// One cluster; indices point into `Clustering::sequences`. The
/// representative is always its own first member.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    pub representative: usize,
    pub members: Vec<usize>,
}

impl Cluster {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// Result of clustering: the unique sequences in placement order and the
/// clusters over them.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub sequences: Vec<UniqueSequence>,
    pub clusters: Vec<Cluster>,
    pub threshold: f64,
}

impl Clustering {
    pub fn representative_id(&self, cluster: usize) -> &str {
        &self.sequences[self.clusters[cluster].representative].id
    }

    /// Map each protein sequence to the index of its cluster.
    pub fn assignment_by_sequence(&self) -> HashMap<&str, usize> {
        let mut map = HashMap::new();
        for (ci, c) in self.clusters.iter().enumerate() {
            for &m in &c.members {
                map.insert(self.sequences[m].sequence.as_str(), ci);
            }
        }
        map
    }

    /// Tab-separated table with one `cluster_id  representative_id
    /// member_id` row per member, in cluster founding order.
    pub fn table_string(&self) -> String {
        let mut out = String::new();
        for (ci, c) in self.clusters.iter().enumerate() {
            let rep = &self.sequences[c.representative].id;
            for &m in &c.members {
                out.push_str(&format!("{ci}\t{rep}\t{}\n", self.sequences[m].id));
            }
        }
        out
    }
}

/// Collect the distinct protein sequences, each tagged with the smallest
/// record id that carries it, ordered longest first (ties: id, then
/// sequence). The order depends only on the record multiset, not on input
/// order.
pub fn unique_sequences(triples: &[Triple]) -> Vec<UniqueSequence> {
    let mut min_id: HashMap<&str, &str> = HashMap::new();
    for t in triples {
        min_id
            .entry(t.protein.as_str())
            .and_modify(|id| {
                if t.id.as_str() < *id {
                    *id = &t.id;
                }
            })
            .or_insert(&t.id);
    }
    let mut seqs: Vec<UniqueSequence> = min_id
        .into_iter()
        .map(|(sequence, id)| UniqueSequence {
            id: id.to_string(),
            sequence: sequence.to_string(),
        })
        .collect();
    seqs.sort_by(|a, b| {
        b.sequence
            .len()
            .cmp(&a.sequence.len())
            .then_with(|| a.id.cmp(&b.id))
            .then_with(|| a.sequence.cmp(&b.sequence))
    });
    seqs
}

fn kmer_counts(seq: &[u8], k: usize) -> HashMap<&[u8], u32> {
    let mut counts = HashMap::new();
    if seq.len() >= k {
        for w in seq.windows(k) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

fn counts_intersection(a: &HashMap<&[u8], u32>, b: &HashMap<&[u8], u32>) -> u64 {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    small
        .iter()
        .map(|(w, &ca)| u64::from(ca.min(*large.get(w).unwrap_or(&0))))
        .sum()
}

/// Upper bound on the alignment identity of two sequences, computable from
/// k-mer counts alone.
///
/// In any global alignment, the matched columns form runs; a run of length m
/// yields at least m−k+1 k-mer occurrences common to both sequences, so with
/// S common occurrences (multiset intersection), r runs, and alignment
/// length L: matches ≤ S + r(k−1) and r ≤ L − matches + 1, giving
/// matches ≤ (S + (L+1)(k−1)) / k. Identity = matches/L is then bounded by
/// (S + (L+1)(k−1)) / (kL), which decreases in L, so the shortest possible
/// alignment L = max(|a|,|b|) gives a valid bound. Matches ≤ min(|a|,|b|)
/// bounds identity independently; the smaller of the two is returned.
pub fn identity_upper_bound(
    a_counts: &HashMap<&[u8], u32>,
    a_len: usize,
    b_counts: &HashMap<&[u8], u32>,
    b_len: usize,
    k: usize,
) -> f64 {
    let long = a_len.max(b_len) as f64;
    let short = a_len.min(b_len) as f64;
    let s = counts_intersection(a_counts, b_counts) as f64;
    let kf = k as f64;
    let kmer_bound = (s + (long + 1.0) * (kf - 1.0)) / (kf * long);
    let length_bound = short / long;
    kmer_bound.min(length_bound)
}

/// Greedy incremental clustering at the given identity threshold.
///
/// Deterministic for a given record multiset. Candidate representatives are
/// screened with `identity_upper_bound`; a representative is skipped only
/// when the bound proves its identity is below the threshold, so the result
/// is identical to an unfiltered scan.
pub fn cluster_sequences(
    triples: &[Triple],
    threshold: f64,
    kmer_len: usize,
) -> Result<Clustering, DataError> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(DataError::InvalidThreshold { value: threshold });
    }
    if kmer_len == 0 {
        return Err(DataError::InvalidKmerLen);
    }
    let sequences = unique_sequences(triples);
    let mut clusters: Vec<Cluster> = Vec::new();
    {
        let mut rep_counts: Vec<HashMap<&[u8], u32>> = Vec::new();
        for idx in 0..sequences.len() {
            let seq = sequences[idx].sequence.as_bytes();
            let counts = kmer_counts(seq, kmer_len);
            let mut joined = None;
            for (ci, c) in clusters.iter().enumerate() {
                let rep = &sequences[c.representative];
                let bound = identity_upper_bound(
                    &counts,
                    seq.len(),
                    &rep_counts[ci],
                    rep.sequence.len(),
                    kmer_len,
                );
                if bound < threshold {
                    continue;
                }
                let r = global_align(&sequences[idx].sequence, &rep.sequence, Scoring::default())?;
                if r.identity >= threshold {
                    joined = Some(ci);
                    break;
                }
            }
            match joined {
                Some(ci) => clusters[ci].members.push(idx),
                None => {
                    clusters.push(Cluster {
                        representative: idx,
                        members: vec![idx],
                    });
                    rep_counts.push(counts);
                }
            }
        }
    }
    Ok(Clustering {
        sequences,
        clusters,
        threshold,
    })
}
