//! Autoregressive decoding: greedy and nucleus sampling.
//!
//! A request carries raw strings; the generator tokenizes them, runs the
//! conditioning side once, and replays the frozen prefix as a constant for
//! every decode step. Token choices are made over the model's next-token
//! distribution with `<PAD>`/`<BOS>`/`<UNK>` removed and the rest
//! renormalized; `<EOS>` stays eligible and ends the sequence. The recorded
//! per-token log-probs come from the full unmasked distribution, so the sum
//! equals the teacher-forced log-likelihood of the emitted sequence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::FastaRecord;
use crate::model::{ModelError, ModelState, Session};
use crate::tokenize::{ProteinVocab, TokenizeError, Tokenizers, BOS, EOS, PAD, UNK};
use crate::TensorError;

/// Residue cap when a request does not set one.
pub const DEFAULT_MAX_LENGTH: usize = 512;

/// How to pick each token.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Mode {
    /// Highest-probability token, ties broken by lowest id.
    Greedy,
    /// Sample from the smallest descending-probability prefix whose mass
    /// reaches `p`, renormalized; boundary-probability ties are included.
    Nucleus { p: f64 },
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Greedy => write!(f, "greedy"),
            Mode::Nucleus { p } => write!(f, "nucleus(p={p})"),
        }
    }
}

/// One decoding job: what to condition on and how to decode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub id: String,
    pub instruction: String,
    pub description: String,
    pub smiles: String,
    #[serde(flatten)]
    pub mode: Mode,
    pub num_samples: usize,
    pub max_length: usize,
    pub seed: u64,
}

impl GenerationRequest {
    pub fn greedy(id: &str, instruction: &str, description: &str, smiles: &str) -> Self {
        GenerationRequest {
            id: id.to_string(),
            instruction: instruction.to_string(),
            description: description.to_string(),
            smiles: smiles.to_string(),
            mode: Mode::Greedy,
            num_samples: 1,
            max_length: DEFAULT_MAX_LENGTH,
            seed: 0,
        }
    }

    pub fn nucleus(
        id: &str,
        instruction: &str,
        description: &str,
        smiles: &str,
        p: f64,
        num_samples: usize,
        seed: u64,
    ) -> Self {
        GenerationRequest {
            mode: Mode::Nucleus { p },
            num_samples,
            seed,
            ..Self::greedy(id, instruction, description, smiles)
        }
    }

    pub fn validate(&self) -> Result<(), GenerateError> {
        let bad = |field: &'static str, detail: String| GenerateError::Request { field, detail };
        if self.num_samples == 0 {
            return Err(bad("num_samples", "must be at least 1".into()));
        }
        if self.max_length == 0 {
            return Err(bad("max_length", "must be at least 1".into()));
        }
        if let Mode::Nucleus { p } = self.mode {
            if !(p.is_finite() && p > 0.0 && p <= 1.0) {
                return Err(bad("nucleus_p", format!("{p} is outside (0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("request: {field}: {detail}")]
    Request { field: &'static str, detail: String },
    #[error("the model emitted end-of-sequence before any residue")]
    EmptyOutput,
    #[error(transparent)]
    Tokenize(#[from] TokenizeError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// One decoded sequence with its decode-time evidence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    /// Residue string; never contains specials.
    pub sequence: String,
    /// Full-distribution log-prob of every emitted token, in order; when the
    /// sequence ended naturally the final entry is the `<EOS>` step.
    pub token_log_probs: Vec<f64>,
    pub ended_with_eos: bool,
    /// Which seeded stream produced this (always 0 for greedy).
    pub sample_index: usize,
}

impl Candidate {
    pub fn total_log_prob(&self) -> f64 {
        self.token_log_probs.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.sequence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequence.is_empty()
    }
}

/// Outcome of one request inside a batch; failures stay local to the item.
#[derive(Debug)]
pub struct RequestResult {
    pub request: GenerationRequest,
    pub outcome: Result<Vec<Candidate>, GenerateError>,
}

/// What the sampler saw at one nucleus step, for external auditing.
pub struct StepObservation<'a> {
    /// 0-based decode step within one sample.
    pub step: usize,
    /// The masked, renormalized distribution the choice was made over.
    pub probs: &'a [f64],
    /// Token ids inside the nucleus.
    pub nucleus: &'a [usize],
    pub chosen: usize,
}

/// Decoder over a frozen model; requests are independent of each other.
pub struct Generator<'a> {
    state: &'a ModelState,
    tokenizers: &'a Tokenizers,
}

/// The conditioning prefix frozen to raw rows, replayed each decode step.
type FrozenPrefix = Option<(Vec<f64>, Vec<usize>)>;

impl<'a> Generator<'a> {
    pub fn new(state: &'a ModelState, tokenizers: &'a Tokenizers) -> Self {
        Generator { state, tokenizers }
    }

    /// Argmax decoding; deterministic, so `seed` and `num_samples` are
    /// irrelevant.
    pub fn greedy_decode(&self, request: &GenerationRequest) -> Result<Candidate, GenerateError> {
        request.validate()?;
        let prefix = self.conditioning(request)?;
        self.decode_one(request, &prefix, None, &mut |_| {})
    }

    /// `num_samples` independent sequences from streams seeded
    /// `seed + sample_index`.
    pub fn nucleus_sample(
        &self,
        request: &GenerationRequest,
    ) -> Result<Vec<Candidate>, GenerateError> {
        self.nucleus_sample_traced(request, &mut |_| {})
    }

    /// Nucleus sampling with every step reported to `observe` before the
    /// token is committed.
    pub fn nucleus_sample_traced(
        &self,
        request: &GenerationRequest,
        observe: &mut dyn FnMut(StepObservation<'_>),
    ) -> Result<Vec<Candidate>, GenerateError> {
        request.validate()?;
        let p = match request.mode {
            Mode::Nucleus { p } => p,
            Mode::Greedy => {
                return Err(GenerateError::Request {
                    field: "mode",
                    detail: "nucleus_sample needs a nucleus request".into(),
                })
            }
        };
        let prefix = self.conditioning(request)?;
        (0..request.num_samples)
            .map(|k| self.decode_one(request, &prefix, Some((p, k)), observe))
            .collect()
    }

    /// Dispatch on the request's mode; greedy yields one candidate.
    pub fn generate(&self, request: &GenerationRequest) -> Result<Vec<Candidate>, GenerateError> {
        match request.mode {
            Mode::Greedy => self.greedy_decode(request).map(|c| vec![c]),
            Mode::Nucleus { .. } => self.nucleus_sample(request),
        }
    }

    /// Run every request, collecting per-item outcomes.
    pub fn generate_batch(&self, requests: &[GenerationRequest]) -> Vec<RequestResult> {
        requests
            .iter()
            .map(|request| RequestResult {
                request: request.clone(),
                outcome: self.generate(request),
            })
            .collect()
    }

    /// Tokenize the request and run the conditioning side once.
    fn conditioning(&self, request: &GenerationRequest) -> Result<FrozenPrefix, GenerateError> {
        let text = self
            .tokenizers
            .text
            .encode(&request.instruction, &request.description)?;
        let ligand = self.tokenizers.smiles.encode(&request.smiles)?;
        let mut session = Session::new(self.state);
        let prefix = session.condition(&text.ids, &ligand.ids)?;
        Ok(prefix.map(|id| {
            (
                session.graph.data(id).to_vec(),
                session.graph.shape(id).to_vec(),
            )
        }))
    }

    /// One full decode. `sampling` is `(p, sample_index)` for nucleus mode,
    /// `None` for greedy.
    fn decode_one(
        &self,
        request: &GenerationRequest,
        prefix: &FrozenPrefix,
        sampling: Option<(f64, usize)>,
        observe: &mut dyn FnMut(StepObservation<'_>),
    ) -> Result<Candidate, GenerateError> {
        let sample_index = sampling.map_or(0, |(_, k)| k);
        let mut rng = sampling
            .map(|(_, k)| ChaCha8Rng::seed_from_u64(request.seed.wrapping_add(k as u64)));
        // One slot is spent on BOS, so the position table caps the residues.
        let cap = request
            .max_length
            .min(self.state.config.max_protein_positions - 1);

        let mut ids = vec![BOS];
        let mut token_log_probs = Vec::new();
        let mut ended_with_eos = false;
        for step in 0.. {
            let log_probs = self.next_log_probs(prefix, &ids)?;
            let chosen = match sampling {
                None => masked_argmax(&log_probs),
                Some((p, _)) => {
                    let probs = masked_probs(&log_probs);
                    let nucleus = nucleus_set(&probs, p);
                    let chosen = sample_within(&probs, &nucleus, rng.as_mut().unwrap());
                    observe(StepObservation {
                        step,
                        probs: &probs,
                        nucleus: &nucleus,
                        chosen,
                    });
                    chosen
                }
            };
            token_log_probs.push(log_probs[chosen]);
            if chosen as u32 == EOS {
                ended_with_eos = true;
                break;
            }
            ids.push(chosen as u32);
            if ids.len() - 1 == cap {
                break;
            }
        }

        let sequence = ProteinVocab::decode(&ids);
        if sequence.is_empty() {
            return Err(GenerateError::EmptyOutput);
        }
        Ok(Candidate {
            sequence,
            token_log_probs,
            ended_with_eos,
            sample_index,
        })
    }

    /// Full-vocabulary log-softmax of the next-token logits after `ids`.
    fn next_log_probs(&self, prefix: &FrozenPrefix, ids: &[u32]) -> Result<Vec<f64>, GenerateError> {
        let mut session = Session::new(self.state);
        let prefix_id = match prefix {
            Some((data, shape)) => Some(session.graph.constant(data.clone(), shape)?),
            None => None,
        };
        let logits = session.decode_logits(prefix_id, ids)?;
        let vocab = session.graph.shape(logits)[1];
        let data = session.graph.data(logits);
        let last = &data[(ids.len() - 1) * vocab..ids.len() * vocab];
        Ok(log_softmax(last))
    }
}

const BLOCKED: [u32; 3] = [PAD, BOS, UNK];

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    logits.iter().map(|x| x - lse).collect()
}

/// Highest-probability non-blocked token, lowest id on exact ties.
fn masked_argmax(log_probs: &[f64]) -> usize {
    let mut best = usize::MAX;
    let mut best_lp = f64::NEG_INFINITY;
    for (i, &lp) in log_probs.iter().enumerate() {
        if BLOCKED.contains(&(i as u32)) {
            continue;
        }
        if lp > best_lp {
            best = i;
            best_lp = lp;
        }
    }
    best
}

/// The emission distribution: blocked specials zeroed, the rest renormalized.
fn masked_probs(log_probs: &[f64]) -> Vec<f64> {
    let mut probs: Vec<f64> = log_probs.iter().map(|&lp| lp.exp()).collect();
    for id in BLOCKED {
        probs[id as usize] = 0.0;
    }
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    probs
}

/// Token indices of the nucleus: sort the support by probability descending
/// (ties by id ascending), cut at the smallest prefix with cumulative mass
/// at least `p`, then widen to keep every token tied with the boundary
/// probability. Expects `probs` to sum to 1.
pub fn nucleus_set(probs: &[f64], p: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..probs.len()).filter(|&i| probs[i] > 0.0).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    let mut cut = order.len();
    let mut mass = 0.0;
    for (k, &i) in order.iter().enumerate() {
        mass += probs[i];
        if mass >= p {
            cut = k + 1;
            break;
        }
    }
    let boundary = probs[order[cut - 1]];
    while cut < order.len() && probs[order[cut]] == boundary {
        cut += 1;
    }
    order.truncate(cut);
    order
}

/// Inverse-CDF draw over the nucleus, renormalized by scaling the draw to
/// the nucleus mass instead of dividing every member.
fn sample_within(probs: &[f64], nucleus: &[usize], rng: &mut ChaCha8Rng) -> usize {
    let mass: f64 = nucleus.iter().map(|&i| probs[i]).sum();
    let draw = rng.random::<f64>() * mass;
    let mut cum = 0.0;
    for &i in nucleus {
        cum += probs[i];
        if draw < cum {
            return i;
        }
    }
    *nucleus.last().expect("nucleus is never empty")
}

/// FASTA rendering of every successful candidate; headers carry the request
/// id, the decode mode, the seed, and the sample stream.
pub fn fasta_records(results: &[RequestResult]) -> Vec<FastaRecord> {
    let mut records = Vec::new();
    for result in results {
        let Ok(candidates) = &result.outcome else {
            continue;
        };
        for candidate in candidates {
            records.push(FastaRecord {
                id: format!(
                    "{} {} seed={} sample={}",
                    result.request.id,
                    result.request.mode,
                    result.request.seed,
                    candidate.sample_index
                ),
                sequence: candidate.sequence.clone(),
            });
        }
    }
    records
}

/// One line-delimited metadata record per candidate, or one error record per
/// failed request.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub id: String,
    pub mode: String,
    pub seed: u64,
    pub sample: usize,
    pub length: usize,
    pub log_prob: f64,
    pub ended_with_eos: bool,
    pub sequence: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn metadata_records(results: &[RequestResult]) -> Vec<GenerationRecord> {
    let mut records = Vec::new();
    for result in results {
        let base = GenerationRecord {
            id: result.request.id.clone(),
            mode: result.request.mode.to_string(),
            seed: result.request.seed,
            sample: 0,
            length: 0,
            log_prob: 0.0,
            ended_with_eos: false,
            sequence: String::new(),
            error: None,
        };
        match &result.outcome {
            Ok(candidates) => {
                for candidate in candidates {
                    records.push(GenerationRecord {
                        sample: candidate.sample_index,
                        length: candidate.len(),
                        log_prob: candidate.total_log_prob(),
                        ended_with_eos: candidate.ended_with_eos,
                        sequence: candidate.sequence.clone(),
                        ..base.clone()
                    });
                }
            }
            Err(error) => {
                records.push(GenerationRecord {
                    error: Some(error.to_string()),
                    ..base
                });
            }
        }
    }
    records
}
