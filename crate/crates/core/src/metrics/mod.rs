//! Sequence-level evaluation: global alignment, novelty, and diversity.

pub mod manifest;

pub use manifest::{emit_eval_manifests, EvalCase, EVAL_METRICS};

/// Error raised by alignment-based metrics and manifest emission.
#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("{which} sequence is empty")]
    EmptySequence { which: &'static str },
    #[error("diversity needs at least two sequences, got {got}")]
    TooFewSequences { got: usize },
    #[error("invalid case id {id:?}: only ASCII letters, digits, '.', '_', and '-' are allowed")]
    InvalidCaseId { id: String },
    #[error("failed to write evaluation files under {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Linear-gap alignment scores.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Scoring {
    pub match_score: i64,
    pub mismatch: i64,
    pub gap: i64,
}

impl Default for Scoring {
    fn default() -> Self {
        Scoring {
            match_score: 1,
            mismatch: -1,
            gap: -1,
        }
    }
}

impl Scoring {
    fn substitution(&self, a: char, b: char) -> i64 {
        if a == b {
            self.match_score
        } else {
            self.mismatch
        }
    }
}

/// A global alignment of two sequences.
#[derive(Clone, Debug, PartialEq)]
pub struct AlignmentResult {
    /// First sequence with `-` at gap columns.
    pub aligned_a: String,
    /// Second sequence with `-` at gap columns.
    pub aligned_b: String,
    pub score: i64,
    /// Columns whose two characters are equal.
    pub matches: usize,
    /// Total columns, gaps included.
    pub alignment_length: usize,
    /// `matches / alignment_length`.
    pub identity: f64,
}

/// Per-cell objective: alignment score first, then matched columns, then
/// diagonal steps. The trailing components settle ties between equal-score
/// alignments so that `matches` and `alignment_length` — and therefore
/// identity — are well-defined *values* of the pair, independent of argument
/// order.
type Objective = (i64, u32, u32);

fn step(base: Objective, add: Objective) -> Objective {
    (base.0 + add.0, base.1 + add.1, base.2 + add.2)
}

/// Needleman-Wunsch global alignment with linear gap penalties.
///
/// Among equal-score alignments the one with the most matched columns (then
/// the most diagonal steps, i.e. the shortest alignment) is reported; any
/// remaining tie is resolved in traceback by preferring diagonal, then a gap
/// in `b`, then a gap in `a`. This keeps the reported identity a symmetric
/// function of the two sequences and makes the output fully deterministic.
pub fn global_align(a: &str, b: &str, scoring: Scoring) -> Result<AlignmentResult, MetricsError> {
    if a.is_empty() {
        return Err(MetricsError::EmptySequence { which: "first" });
    }
    if b.is_empty() {
        return Err(MetricsError::EmptySequence { which: "second" });
    }
    let ac: Vec<char> = a.chars().collect();
    let bc: Vec<char> = b.chars().collect();
    let n = ac.len();
    let m = bc.len();
    let width = m + 1;
    let gap: Objective = (scoring.gap, 0, 0);
    let mut table = vec![(0i64, 0u32, 0u32); (n + 1) * width];
    for j in 1..=m {
        table[j] = (j as i64 * scoring.gap, 0, 0);
    }
    let diag_move = |x: char, y: char| -> Objective {
        (scoring.substitution(x, y), u32::from(x == y), 1)
    };
    for i in 1..=n {
        table[i * width] = (i as i64 * scoring.gap, 0, 0);
        for j in 1..=m {
            let diag = step(
                table[(i - 1) * width + j - 1],
                diag_move(ac[i - 1], bc[j - 1]),
            );
            let up = step(table[(i - 1) * width + j], gap);
            let left = step(table[i * width + j - 1], gap);
            table[i * width + j] = diag.max(up).max(left);
        }
    }

    let best = table[n * width + m];
    let mut rev_a = Vec::with_capacity(n + m);
    let mut rev_b = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = table[i * width + j];
        if i > 0
            && j > 0
            && here
                == step(
                    table[(i - 1) * width + j - 1],
                    diag_move(ac[i - 1], bc[j - 1]),
                )
        {
            rev_a.push(ac[i - 1]);
            rev_b.push(bc[j - 1]);
            i -= 1;
            j -= 1;
        } else if i > 0 && here == step(table[(i - 1) * width + j], gap) {
            rev_a.push(ac[i - 1]);
            rev_b.push('-');
            i -= 1;
        } else {
            rev_a.push('-');
            rev_b.push(bc[j - 1]);
            j -= 1;
        }
    }
    rev_a.reverse();
    rev_b.reverse();
    let matches = rev_a
        .iter()
        .zip(&rev_b)
        .filter(|(x, y)| x == y)
        .count();
    debug_assert_eq!(matches as u32, best.1);
    let alignment_length = rev_a.len();
    debug_assert_eq!(alignment_length, n + m - best.2 as usize);
    Ok(AlignmentResult {
        aligned_a: rev_a.into_iter().collect(),
        aligned_b: rev_b.into_iter().collect(),
        score: best.0,
        matches,
        alignment_length,
        identity: matches as f64 / alignment_length as f64,
    })
}

/// Fraction of identical columns in the default-scored global alignment.
pub fn identity(a: &str, b: &str) -> Result<f64, MetricsError> {
    Ok(global_align(a, b, Scoring::default())?.identity)
}

/// `1 - identity(designed, reference)`: how far a designed sequence is from
/// its ground truth.
pub fn novelty(designed: &str, reference: &str) -> Result<f64, MetricsError> {
    Ok(1.0 - identity(designed, reference)?)
}

/// Mean pairwise `1 - identity` over all unordered pairs of `samples`.
pub fn diversity<S: AsRef<str>>(samples: &[S]) -> Result<f64, MetricsError> {
    if samples.len() < 2 {
        return Err(MetricsError::TooFewSequences { got: samples.len() });
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            total += 1.0 - identity(samples[i].as_ref(), samples[j].as_ref())?;
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}
