//! One forward pass = one `Session`: a fresh tape over a shared
//! `ModelState`. Parameters are bound into the graph on first use, so
//! ablated sub-networks never enter the tape, and `gradients` hands back
//! exactly the parameters that participated.

use indexmap::IndexMap;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ModelError, ModelState, SubnetConfig};
use crate::tensor::TensorId;
use crate::tokenize::{TokenizedTriple, BOS, PAD};
use crate::Graph;

/// Compressed text representation plus the attention that produced it
/// (rows: memory slots, columns: text positions; each row sums to 1).
#[derive(Debug, Clone, Copy)]
pub struct MemoryOut {
    pub rows: TensorId,
    pub attention: TensorId,
}

/// Summed negative log-likelihood over one example and the number of
/// positions it covers.
#[derive(Debug, Clone, Copy)]
pub struct NllOut {
    pub loss: TensorId,
    pub tokens: usize,
}

pub struct Session<'a> {
    pub graph: Graph,
    state: &'a ModelState,
    bound: IndexMap<String, TensorId>,
    dropout_rng: Option<ChaCha8Rng>,
}

impl<'a> Session<'a> {
    /// Inference session: dropout disabled regardless of the config rate.
    pub fn new(state: &'a ModelState) -> Self {
        Session {
            graph: Graph::new(),
            state,
            bound: IndexMap::new(),
            dropout_rng: None,
        }
    }

    /// Training session: dropout active at the config rate, driven by its
    /// own seeded stream.
    pub fn for_training(state: &'a ModelState, dropout_seed: u64) -> Self {
        Session {
            dropout_rng: Some(ChaCha8Rng::seed_from_u64(dropout_seed)),
            ..Session::new(state)
        }
    }

    /// Bind a parameter into the tape (once per session).
    pub fn param(&mut self, name: &str) -> TensorId {
        if let Some(&id) = self.bound.get(name) {
            return id;
        }
        let p = self.state.param(name);
        let id = self
            .graph
            .tensor(p.data.clone(), &p.shape, true)
            .expect("stored parameter shapes are consistent");
        self.bound.insert(name.to_string(), id);
        id
    }

    fn maybe_dropout(&mut self, x: TensorId) -> Result<TensorId, ModelError> {
        let rate = self.state.config.dropout;
        if rate > 0.0 {
            if let Some(rng) = self.dropout_rng.as_mut() {
                return Ok(self.graph.dropout(x, rate, rng)?);
            }
        }
        Ok(x)
    }

    fn linear(&mut self, x: TensorId, w: &str, b: &str) -> Result<TensorId, ModelError> {
        let w = self.param(w);
        let b = self.param(b);
        let y = self.graph.matmul(x, w)?;
        Ok(self.graph.add_bias(y, b)?)
    }

    fn layer_norm(&mut self, x: TensorId, prefix: &str, which: &str) -> Result<TensorId, ModelError> {
        let gain = self.param(&format!("{prefix}.{which}.gain"));
        let bias = self.param(&format!("{prefix}.{which}.bias"));
        Ok(self.graph.layer_norm(x, gain, bias, 1e-5)?)
    }

    /// Multi-head attention with queries from `x` and keys/values from
    /// `[kv_extra; x]`. With `causal`, position i sees every extra row and
    /// positions 0..=i of `x`; without, attention is bidirectional over `x`
    /// alone.
    fn attention(
        &mut self,
        x: TensorId,
        kv_extra: Option<TensorId>,
        s: SubnetConfig,
        prefix: &str,
        causal: bool,
    ) -> Result<TensorId, ModelError> {
        let src = match kv_extra {
            Some(extra) => self.graph.concat_rows(&[extra, x])?,
            None => x,
        };
        let q = self.linear(x, &format!("{prefix}.attn.wq"), &format!("{prefix}.attn.bq"))?;
        let k = self.linear(src, &format!("{prefix}.attn.wk"), &format!("{prefix}.attn.bk"))?;
        let v = self.linear(src, &format!("{prefix}.attn.wv"), &format!("{prefix}.attn.bv"))?;
        let n = self.graph.shape(x)[0];
        let m = self.graph.shape(src)[0];
        let n_extra = m - n;
        let dh = s.width / s.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let causal_mask = causal.then(|| {
            let mut allowed = vec![false; n * m];
            for i in 0..n {
                for j in 0..m {
                    allowed[i * m + j] = j < n_extra || (j - n_extra) <= i;
                }
            }
            allowed
        });
        let mut heads = Vec::with_capacity(s.heads);
        for h in 0..s.heads {
            let (lo, hi) = (h * dh, (h + 1) * dh);
            let qh = self.graph.slice_cols(q, lo, hi)?;
            let kh = self.graph.slice_cols(k, lo, hi)?;
            let vh = self.graph.slice_cols(v, lo, hi)?;
            let kt = self.graph.transpose(kh)?;
            let logits = self.graph.matmul(qh, kt)?;
            let scaled = self.graph.scale(logits, scale)?;
            let weights = match &causal_mask {
                Some(allowed) => self.graph.masked_softmax(scaled, allowed)?,
                None => self.graph.softmax(scaled, 1)?,
            };
            heads.push(self.graph.matmul(weights, vh)?);
        }
        let merged = self.graph.concat_cols(&heads)?;
        let out = self.linear(
            merged,
            &format!("{prefix}.attn.wo"),
            &format!("{prefix}.attn.bo"),
        )?;
        self.maybe_dropout(out)
    }

    /// One block: attention and feed-forward sublayers, each residual then
    /// layer-normed (post-norm order).
    fn transformer_layer(
        &mut self,
        x: TensorId,
        kv_extra: Option<TensorId>,
        s: SubnetConfig,
        prefix: &str,
        causal: bool,
    ) -> Result<TensorId, ModelError> {
        let attn = self.attention(x, kv_extra, s, prefix, causal)?;
        let sum = self.graph.add(attn, x)?;
        let h = self.layer_norm(sum, prefix, "ln1")?;
        let f = self.linear(h, &format!("{prefix}.ffn.w1"), &format!("{prefix}.ffn.b1"))?;
        let f = self.graph.gelu(f)?;
        let f = self.linear(f, &format!("{prefix}.ffn.w2"), &format!("{prefix}.ffn.b2"))?;
        let f = self.maybe_dropout(f)?;
        let sum = self.graph.add(f, h)?;
        self.layer_norm(sum, prefix, "ln2")
    }

    /// Token embedding plus learned absolute positions, truncating (with a
    /// warning) anything past the stream's position table.
    fn embed(&mut self, name: &str, ids: &[u32], max_positions: usize) -> Result<TensorId, ModelError> {
        let ids = if ids.len() > max_positions {
            log::warn!(
                "{name} input of {} tokens truncated to {max_positions}",
                ids.len()
            );
            &ids[..max_positions]
        } else {
            ids
        };
        let table = self.param(&format!("{name}.embedding"));
        let emb = self.graph.embedding(table, ids)?;
        let positions = self.param(&format!("{name}.positions"));
        let pos = self.graph.slice_rows(positions, 0, ids.len())?;
        Ok(self.graph.add(emb, pos)?)
    }

    fn encoder_stack(
        &mut self,
        name: &str,
        s: SubnetConfig,
        ids: &[u32],
        max_positions: usize,
    ) -> Result<TensorId, ModelError> {
        let mut x = self.embed(name, ids, max_positions)?;
        for l in 0..s.layers {
            x = self.transformer_layer(x, None, s, &format!("{name}.layer{l}"), false)?;
        }
        Ok(x)
    }

    /// Bidirectional text encoder: one row per text token.
    pub fn encode_text(&mut self, ids: &[u32]) -> Result<TensorId, ModelError> {
        let s = self.state.config.text;
        let max = self.state.config.max_text_positions;
        self.encoder_stack("text", s, ids, max)
    }

    /// Bidirectional ligand encoder: one row per SMILES token.
    pub fn encode_ligand(&mut self, ids: &[u32]) -> Result<TensorId, ModelError> {
        let s = self.state.config.ligand;
        let max = self.state.config.max_ligand_positions;
        self.encoder_stack("ligand", s, ids, max)
    }

    /// Compress the text rows into `memory_size` rows by single-head
    /// attention: learned memory rows query projected text keys/values,
    /// logits scaled by 1/sqrt(text width).
    pub fn elicit_memory(&mut self, text_rows: TensorId) -> Result<MemoryOut, ModelError> {
        let m = self.param("memory.m");
        let wq = self.param("memory.wq");
        let wk = self.param("memory.wk");
        let wv = self.param("memory.wv");
        let q = self.graph.matmul(m, wq)?;
        let k = self.graph.matmul(text_rows, wk)?;
        let v = self.graph.matmul(text_rows, wv)?;
        let kt = self.graph.transpose(k)?;
        let logits = self.graph.matmul(q, kt)?;
        let scale = 1.0 / (self.state.config.text.width as f64).sqrt();
        let scaled = self.graph.scale(logits, scale)?;
        let attention = self.graph.softmax(scaled, 1)?;
        let rows = self.graph.matmul(attention, v)?;
        Ok(MemoryOut { rows, attention })
    }

    /// Project conditioning rows into decoder width and concatenate,
    /// memory rows first. `None` means that stream is ablated; both absent
    /// yields no prefix (unconditional decoding).
    pub fn build_prefix(
        &mut self,
        memory_rows: Option<TensorId>,
        ligand_rows: Option<TensorId>,
    ) -> Result<Option<TensorId>, ModelError> {
        let mem = match memory_rows {
            Some(rows) => Some(self.linear(rows, "adapter.memory.w", "adapter.memory.b")?),
            None => None,
        };
        let lig = match ligand_rows {
            Some(rows) => Some(self.linear(rows, "adapter.ligand.w", "adapter.ligand.b")?),
            None => None,
        };
        Ok(match (mem, lig) {
            (Some(a), Some(b)) => Some(self.graph.concat_rows(&[a, b])?),
            (Some(a), None) => Some(a),
            (None, Some(b)) => Some(b),
            (None, None) => None,
        })
    }

    /// Run the conditioning side as the ablation flags dictate and return
    /// the decoder prefix. With the memory module off, the raw text rows go
    /// through the memory adapter unchanged in count.
    pub fn condition(
        &mut self,
        text_ids: &[u32],
        ligand_ids: &[u32],
    ) -> Result<Option<TensorId>, ModelError> {
        let use_text = self.state.config.use_text_encoder;
        let use_ligand = self.state.config.use_ligand_encoder;
        let use_memory = self.state.config.use_memory_module;
        let memory_rows = if use_text {
            let rows = self.encode_text(text_ids)?;
            Some(if use_memory {
                self.elicit_memory(rows)?.rows
            } else {
                rows
            })
        } else {
            None
        };
        let ligand_rows = if use_ligand {
            Some(self.encode_ligand(ligand_ids)?)
        } else {
            None
        };
        self.build_prefix(memory_rows, ligand_rows)
    }

    /// Next-token logits for every position of the protein prefix. The
    /// conditioning prefix is re-projected by each decoder layer's key and
    /// value maps and prepended to that layer's attention source; queries
    /// range over protein positions only, causally masked among themselves.
    pub fn decode_logits(
        &mut self,
        prefix: Option<TensorId>,
        protein_ids: &[u32],
    ) -> Result<TensorId, ModelError> {
        if protein_ids.first() != Some(&BOS) {
            return Err(ModelError::BosRequired);
        }
        let c = self.state.config.decoder;
        let max = self.state.config.max_protein_positions;
        let mut x = self.embed("decoder", protein_ids, max)?;
        for l in 0..c.layers {
            x = self.transformer_layer(x, prefix, c, &format!("decoder.layer{l}"), true)?;
        }
        self.linear(x, "decoder.out.w", "decoder.out.b")
    }

    /// Summed negative log-likelihood of one tokenized example: the decoder
    /// consumes `[BOS, r_1..r_N]` and each position is scored against the
    /// next token of `[r_1..r_N, EOS]`. PAD targets are ignored.
    pub fn nll(&mut self, example: &TokenizedTriple) -> Result<NllOut, ModelError> {
        let prefix = self.condition(&example.text, &example.smiles)?;
        let input = &example.protein[..example.protein.len() - 1];
        let targets = &example.protein[1..];
        let logits = self.decode_logits(prefix, input)?;
        let rows = self.graph.shape(logits)[0];
        let out = self.graph.cross_entropy(logits, &targets[..rows], PAD)?;
        Ok(NllOut {
            loss: out.loss,
            tokens: out.counted,
        })
    }

    /// Post-backward: the gradient of every parameter this session touched,
    /// in binding order.
    pub fn gradients(&self) -> Vec<(&str, &[f64])> {
        self.bound
            .iter()
            .filter_map(|(name, &id)| self.graph.grad(id).map(|g| (name.as_str(), g)))
            .collect()
    }

    /// Names of the parameters bound so far.
    pub fn bound_names(&self) -> Vec<&str> {
        self.bound.keys().map(String::as_str).collect()
    }
}
