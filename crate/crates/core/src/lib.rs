//! Conditional protein sequence design.
//!
//! Everything needed to go from raw (instruction, description, ligand SMILES,
//! protein) records to trained models and designed sequences, with no native
//! or GPU dependencies:
//!
//! - [`tensor`]: a small dense tensor library with reverse-mode autodiff on a
//!   per-forward-pass tape.
//! - [`tokenize`]: protein, SMILES, and instruction-text tokenizers plus
//!   corpus-derived vocabularies with content hashes.
//! - [`model`]: a text encoder, a learned memory bottleneck, a ligand encoder,
//!   and an autoregressive protein decoder conditioned through per-layer
//!   key/value prefixes.
//! - [`train`]: negative log-likelihood training with Adam, a linear
//!   warmup/decay schedule, token-count batching, and resumable checkpoints.
//! - [`generate`]: greedy and nucleus decoding with per-token log-prob
//!   instrumentation.
//! - [`metrics`]: Needleman-Wunsch global alignment, novelty and diversity
//!   scores, and evaluation job manifests for external structure tools.
//! - [`data`]: corpus ingestion, identity-based greedy clustering, stratified
//!   cluster-level splits, and ligand-aware test partitioning.
//! - [`checkpoint`]: a self-describing binary format for model and optimizer
//!   state.
//!
//! The tensor core is generic over its element type through [`Scalar`]
//! (`f32` or `f64`); the model stack and everything above it is pinned to
//! `f64` via the aliases below so that training, decoding, and checkpoints
//! stay bit-reproducible run to run.

pub mod checkpoint;
pub mod data;
pub mod generate;
pub mod io;
pub mod metrics;
pub mod model;
pub mod scalar;
pub mod tensor;
pub mod tokenize;
pub mod train;

pub use scalar::Scalar;

/// Computation graph over `f64`, the element type used by the model stack.
pub type Graph = tensor::Graph<f64>;

/// Handle to a tensor stored in a [`Graph`].
pub type TensorId = tensor::TensorId;

/// Error raised by [`Graph`] operations at the default precision.
pub type TensorError = tensor::TensorError;
