//! Dense tensors with reverse-mode automatic differentiation.
//!
//! A [`Graph`] is a define-by-run tape: every operation appends a node that
//! owns its output values, its saved activations, and handles to its inputs.
//! The tape is intended to be rebuilt for each forward pass; parameters live
//! outside the graph and are bound as leaves per pass.
//!
//! Storage is a flat row-major `Vec` per node. Kernels are single-threaded
//! with a fixed summation order, so identical inputs produce bitwise
//! identical outputs and gradients.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::scalar::Scalar;


/// Handle to a node in a [`Graph`]. Only valid for the graph that issued it;
/// using it with another graph is a logic error and may panic.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct TensorId(usize);

/// Error raised while building or differentiating a graph.
#[derive(Debug, thiserror::Error)]
pub enum TensorError {
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("data length {len} does not match shape {shape:?}")]
    LengthMismatch { len: usize, shape: Vec<usize> },
    #[error("{op}: expected a rank-{expected} tensor, got shape {shape:?}")]
    RankMismatch {
        op: &'static str,
        expected: usize,
        shape: Vec<usize>,
    },
    #[error("axis {axis} out of range for shape {shape:?}")]
    AxisOutOfRange { axis: usize, shape: Vec<usize> },
    #[error("{op}: range {start}..{end} out of bounds for dimension of size {dim}")]
    RangeOutOfBounds {
        op: &'static str,
        start: usize,
        end: usize,
        dim: usize,
    },
    #[error("{op}: index {index} out of range for dimension of size {dim}")]
    IndexOutOfRange {
        op: &'static str,
        index: usize,
        dim: usize,
    },
    #[error("{op}: needs at least one input")]
    EmptyInput { op: &'static str },
    #[error("backward root must be a scalar, got shape {shape:?}")]
    NonScalarRoot { shape: Vec<usize> },
    #[error("target id {target} out of range for {classes} classes at row {row}")]
    TargetOutOfRange {
        target: usize,
        classes: usize,
        row: usize,
    },
    #[error("{op}: {what} length {len} does not match expected {expected}")]
    AuxLengthMismatch {
        op: &'static str,
        what: &'static str,
        len: usize,
        expected: usize,
    },
    #[error("dropout rate {rate} outside [0, 1)")]
    InvalidDropoutRate { rate: f64 },
}

type Result<T> = std::result::Result<T, TensorError>;

/// Recorded operation. Saved activations needed by the backward pass are
/// stored inline (e.g. normalized values for layer norm, probabilities for
/// cross-entropy).
enum Op<S> {
    Leaf,
    Matmul {
        a: TensorId,
        b: TensorId,
    },
    Add {
        a: TensorId,
        b: TensorId,
    },
    Mul {
        a: TensorId,
        b: TensorId,
    },
    AddBias {
        x: TensorId,
        bias: TensorId,
    },
    Scale {
        x: TensorId,
        factor: S,
    },
    Transpose {
        x: TensorId,
    },
    Reshape {
        x: TensorId,
    },
    ConcatRows {
        parts: Vec<TensorId>,
    },
    ConcatCols {
        parts: Vec<TensorId>,
    },
    SliceRows {
        x: TensorId,
        start: usize,
    },
    SliceCols {
        x: TensorId,
        start: usize,
    },
    SumAll {
        x: TensorId,
    },
    Gelu {
        x: TensorId,
    },
    Relu {
        x: TensorId,
    },
    Softmax {
        x: TensorId,
        axis: usize,
    },
    MaskedSoftmax {
        x: TensorId,
    },
    LayerNorm {
        x: TensorId,
        gain: TensorId,
        bias: TensorId,
        /// Normalized values (before gain/bias), one per element.
        xhat: Vec<S>,
        /// 1 / sqrt(var + eps), one per row.
        inv_std: Vec<S>,
    },
    CrossEntropy {
        logits: TensorId,
        /// Per row: `Some(class)` or `None` when the row is ignored.
        targets: Vec<Option<usize>>,
        /// Softmax of the logits, saved for the backward pass.
        probs: Vec<S>,
    },
    Embedding {
        table: TensorId,
        ids: Vec<usize>,
    },
    Dropout {
        x: TensorId,
        /// Per-element factor: 0 for dropped entries, 1/(1-rate) otherwise.
        mask: Vec<S>,
    },
}

struct Node<S> {
    shape: Vec<usize>,
    data: Vec<S>,
    grad: Option<Vec<S>>,
    requires_grad: bool,
    op: Op<S>,
}

/// Loss handle plus how many target positions actually contributed to it.
///
/// `counted == 0` means every position was ignored; the loss is exactly zero
/// and a warning has been logged.
#[derive(Clone, Copy, Debug)]
pub struct CrossEntropyOut {
    pub loss: TensorId,
    pub counted: usize,
}

/// Define-by-run computation tape.
pub struct Graph<S: Scalar> {
    nodes: Vec<Node<S>>,
}

impl<S: Scalar> Default for Graph<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> Graph<S> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    /// Number of nodes recorded so far.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, shape: Vec<usize>, data: Vec<S>, requires_grad: bool, op: Op<S>) -> TensorId {
        debug_assert_eq!(data.len(), shape.iter().product::<usize>());
        self.nodes.push(Node {
            shape,
            data,
            grad: None,
            requires_grad,
            op,
        });
        TensorId(self.nodes.len() - 1)
    }

    fn node(&self, id: TensorId) -> &Node<S> {
        &self.nodes[id.0]
    }

    /// Create a leaf tensor. `requires_grad` leaves accumulate into
    /// [`Graph::grad`] when [`Graph::backward`] runs.
    pub fn tensor(&mut self, data: Vec<S>, shape: &[usize], requires_grad: bool) -> Result<TensorId> {
        let numel: usize = shape.iter().product();
        if data.len() != numel {
            return Err(TensorError::LengthMismatch {
                len: data.len(),
                shape: shape.to_vec(),
            });
        }
        Ok(self.push(shape.to_vec(), data, requires_grad, Op::Leaf))
    }

    /// Leaf that never receives gradients.
    pub fn constant(&mut self, data: Vec<S>, shape: &[usize]) -> Result<TensorId> {
        self.tensor(data, shape, false)
    }

    /// Single-element constant of shape `[1]`.
    pub fn scalar(&mut self, value: S) -> TensorId {
        self.push(vec![1], vec![value], false, Op::Leaf)
    }

    pub fn zeros(&mut self, shape: &[usize], requires_grad: bool) -> TensorId {
        let numel: usize = shape.iter().product();
        self.push(shape.to_vec(), vec![S::zero(); numel], requires_grad, Op::Leaf)
    }

    pub fn shape(&self, id: TensorId) -> &[usize] {
        &self.node(id).shape
    }

    pub fn data(&self, id: TensorId) -> &[S] {
        &self.node(id).data
    }

    /// Accumulated gradient, present only after a [`Graph::backward`] call
    /// reached this node and it `requires_grad`.
    pub fn grad(&self, id: TensorId) -> Option<&[S]> {
        self.node(id).grad.as_deref()
    }

    pub fn requires_grad(&self, id: TensorId) -> bool {
        self.node(id).requires_grad
    }

    /// Value of a single-element tensor.
    ///
    /// Panics if the tensor does not hold exactly one element; callers only
    /// use this on scalars they constructed (losses, sums).
    pub fn item(&self, id: TensorId) -> S {
        let node = self.node(id);
        assert!(
            node.data.len() == 1,
            "item() on tensor of shape {:?}",
            node.shape
        );
        node.data[0]
    }

    /// Clear accumulated gradients on every node.
    pub fn zero_grads(&mut self) {
        for node in &mut self.nodes {
            node.grad = None;
        }
    }

    fn rank2(&self, op: &'static str, id: TensorId) -> Result<(usize, usize)> {
        let shape = &self.node(id).shape;
        if shape.len() != 2 {
            return Err(TensorError::RankMismatch {
                op,
                expected: 2,
                shape: shape.clone(),
            });
        }
        Ok((shape[0], shape[1]))
    }

    // ----- arithmetic -----------------------------------------------------

    /// Matrix product of `[m, k] x [k, n] -> [m, n]`.
    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let (m, ka) = self.rank2("matmul", a)?;
        let (kb, n) = self.rank2("matmul", b)?;
        if ka != kb {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                lhs: self.node(a).shape.clone(),
                rhs: self.node(b).shape.clone(),
            });
        }
        let data = mm_nn(&self.node(a).data, &self.node(b).data, m, ka, n);
        let rg = self.node(a).requires_grad || self.node(b).requires_grad;
        Ok(self.push(vec![m, n], data, rg, Op::Matmul { a, b }))
    }

    /// Element-wise sum of two tensors of identical shape.
    pub fn add(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        if self.node(a).shape != self.node(b).shape {
            return Err(TensorError::ShapeMismatch {
                op: "add",
                lhs: self.node(a).shape.clone(),
                rhs: self.node(b).shape.clone(),
            });
        }
        let data: Vec<S> = self
            .node(a)
            .data
            .iter()
            .zip(&self.node(b).data)
            .map(|(&x, &y)| x + y)
            .collect();
        let rg = self.node(a).requires_grad || self.node(b).requires_grad;
        let shape = self.node(a).shape.clone();
        Ok(self.push(shape, data, rg, Op::Add { a, b }))
    }

    /// Element-wise (Hadamard) product of two tensors of identical shape.
    pub fn mul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        if self.node(a).shape != self.node(b).shape {
            return Err(TensorError::ShapeMismatch {
                op: "mul",
                lhs: self.node(a).shape.clone(),
                rhs: self.node(b).shape.clone(),
            });
        }
        let data: Vec<S> = self
            .node(a)
            .data
            .iter()
            .zip(&self.node(b).data)
            .map(|(&x, &y)| x * y)
            .collect();
        let rg = self.node(a).requires_grad || self.node(b).requires_grad;
        let shape = self.node(a).shape.clone();
        Ok(self.push(shape, data, rg, Op::Mul { a, b }))
    }

    /// Broadcast a rank-1 bias of length `d` over the trailing axis of `x`.
    pub fn add_bias(&mut self, x: TensorId, bias: TensorId) -> Result<TensorId> {
        let xshape = self.node(x).shape.clone();
        let bshape = self.node(bias).shape.clone();
        let d = match (xshape.last(), bshape.as_slice()) {
            (Some(&d), [bd]) if d == *bd => d,
            _ => {
                return Err(TensorError::ShapeMismatch {
                    op: "add_bias",
                    lhs: xshape,
                    rhs: bshape,
                })
            }
        };
        let bdata = &self.node(bias).data;
        let data: Vec<S> = self
            .node(x)
            .data
            .iter()
            .enumerate()
            .map(|(i, &v)| v + bdata[i % d])
            .collect();
        let rg = self.node(x).requires_grad || self.node(bias).requires_grad;
        Ok(self.push(xshape, data, rg, Op::AddBias { x, bias }))
    }

    /// Multiply every element by a constant.
    pub fn scale(&mut self, x: TensorId, factor: S) -> Result<TensorId> {
        let data: Vec<S> = self.node(x).data.iter().map(|&v| v * factor).collect();
        let rg = self.node(x).requires_grad;
        let shape = self.node(x).shape.clone();
        Ok(self.push(shape, data, rg, Op::Scale { x, factor }))
    }

    // ----- shape manipulation ---------------------------------------------

    /// Transpose of a rank-2 tensor.
    pub fn transpose(&mut self, x: TensorId) -> Result<TensorId> {
        let (m, n) = self.rank2("transpose", x)?;
        let src = &self.node(x).data;
        let mut data = vec![S::zero(); m * n];
        for i in 0..m {
            for j in 0..n {
                data[j * m + i] = src[i * n + j];
            }
        }
        let rg = self.node(x).requires_grad;
        Ok(self.push(vec![n, m], data, rg, Op::Transpose { x }))
    }

    /// View the same elements under a new shape with equal element count.
    pub fn reshape(&mut self, x: TensorId, shape: &[usize]) -> Result<TensorId> {
        let numel: usize = shape.iter().product();
        if numel != self.node(x).data.len() {
            return Err(TensorError::LengthMismatch {
                len: self.node(x).data.len(),
                shape: shape.to_vec(),
            });
        }
        let data = self.node(x).data.clone();
        let rg = self.node(x).requires_grad;
        Ok(self.push(shape.to_vec(), data, rg, Op::Reshape { x }))
    }

    /// Stack rank-2 tensors with equal column counts along the row axis.
    pub fn concat_rows(&mut self, parts: &[TensorId]) -> Result<TensorId> {
        if parts.is_empty() {
            return Err(TensorError::EmptyInput { op: "concat_rows" });
        }
        let (_, cols) = self.rank2("concat_rows", parts[0])?;
        let mut rows = 0;
        for &p in parts {
            let (r, c) = self.rank2("concat_rows", p)?;
            if c != cols {
                return Err(TensorError::ShapeMismatch {
                    op: "concat_rows",
                    lhs: self.node(parts[0]).shape.clone(),
                    rhs: self.node(p).shape.clone(),
                });
            }
            rows += r;
        }
        let mut data = Vec::with_capacity(rows * cols);
        for &p in parts {
            data.extend_from_slice(&self.node(p).data);
        }
        let rg = parts.iter().any(|&p| self.node(p).requires_grad);
        Ok(self.push(
            vec![rows, cols],
            data,
            rg,
            Op::ConcatRows {
                parts: parts.to_vec(),
            },
        ))
    }

    /// Stack rank-2 tensors with equal row counts along the column axis.
    pub fn concat_cols(&mut self, parts: &[TensorId]) -> Result<TensorId> {
        if parts.is_empty() {
            return Err(TensorError::EmptyInput { op: "concat_cols" });
        }
        let (rows, _) = self.rank2("concat_cols", parts[0])?;
        let mut cols = 0;
        for &p in parts {
            let (r, c) = self.rank2("concat_cols", p)?;
            if r != rows {
                return Err(TensorError::ShapeMismatch {
                    op: "concat_cols",
                    lhs: self.node(parts[0]).shape.clone(),
                    rhs: self.node(p).shape.clone(),
                });
            }
            cols += c;
        }
        let mut data = vec![S::zero(); rows * cols];
        let mut offset = 0;
        for &p in parts {
            let (_, c) = self.rank2("concat_cols", p)?;
            let src = &self.node(p).data;
            for i in 0..rows {
                data[i * cols + offset..i * cols + offset + c]
                    .copy_from_slice(&src[i * c..(i + 1) * c]);
            }
            offset += c;
        }
        let rg = parts.iter().any(|&p| self.node(p).requires_grad);
        Ok(self.push(
            vec![rows, cols],
            data,
            rg,
            Op::ConcatCols {
                parts: parts.to_vec(),
            },
        ))
    }

    /// Rows `start..end` of a rank-2 tensor.
    pub fn slice_rows(&mut self, x: TensorId, start: usize, end: usize) -> Result<TensorId> {
        let (m, n) = self.rank2("slice_rows", x)?;
        if start > end || end > m {
            return Err(TensorError::RangeOutOfBounds {
                op: "slice_rows",
                start,
                end,
                dim: m,
            });
        }
        let data = self.node(x).data[start * n..end * n].to_vec();
        let rg = self.node(x).requires_grad;
        Ok(self.push(vec![end - start, n], data, rg, Op::SliceRows { x, start }))
    }

    /// Columns `start..end` of a rank-2 tensor.
    pub fn slice_cols(&mut self, x: TensorId, start: usize, end: usize) -> Result<TensorId> {
        let (m, n) = self.rank2("slice_cols", x)?;
        if start > end || end > n {
            return Err(TensorError::RangeOutOfBounds {
                op: "slice_cols",
                start,
                end,
                dim: n,
            });
        }
        let w = end - start;
        let src = &self.node(x).data;
        let mut data = Vec::with_capacity(m * w);
        for i in 0..m {
            data.extend_from_slice(&src[i * n + start..i * n + end]);
        }
        let rg = self.node(x).requires_grad;
        Ok(self.push(vec![m, w], data, rg, Op::SliceCols { x, start }))
    }

    /// Sum of every element, as a `[1]` tensor.
    pub fn sum_all(&mut self, x: TensorId) -> Result<TensorId> {
        let total = self.node(x).data.iter().fold(S::zero(), |acc, &v| acc + v);
        let rg = self.node(x).requires_grad;
        Ok(self.push(vec![1], vec![total], rg, Op::SumAll { x }))
    }

    // ----- nonlinearities --------------------------------------------------

    /// GELU activation, tanh approximation:
    /// `0.5 * x * (1 + tanh(sqrt(2/pi) * (x + 0.044715 * x^3)))`.
    pub fn gelu(&mut self, x: TensorId) -> Result<TensorId> {
        let data: Vec<S> = self.node(x).data.iter().map(|&v| gelu_value(v)).collect();
        let rg = self.node(x).requires_grad;
        let shape = self.node(x).shape.clone();
        Ok(self.push(shape, data, rg, Op::Gelu { x }))
    }

    pub fn relu(&mut self, x: TensorId) -> Result<TensorId> {
        let data: Vec<S> = self
            .node(x)
            .data
            .iter()
            .map(|&v| if v > S::zero() { v } else { S::zero() })
            .collect();
        let rg = self.node(x).requires_grad;
        let shape = self.node(x).shape.clone();
        Ok(self.push(shape, data, rg, Op::Relu { x }))
    }

    /// Softmax along `axis`, stabilized by subtracting the slice maximum.
    pub fn softmax(&mut self, x: TensorId, axis: usize) -> Result<TensorId> {
        let shape = self.node(x).shape.clone();
        if axis >= shape.len() {
            return Err(TensorError::AxisOutOfRange { axis, shape });
        }
        let n = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        let outer: usize = shape[..axis].iter().product();
        let src = &self.node(x).data;
        let mut data = vec![S::zero(); src.len()];
        for o in 0..outer {
            for r in 0..inner {
                let base = o * n * inner + r;
                let mut max = S::neg_infinity();
                for t in 0..n {
                    let v = src[base + t * inner];
                    if v > max {
                        max = v;
                    }
                }
                let mut sum = S::zero();
                for t in 0..n {
                    let e = (src[base + t * inner] - max).exp();
                    data[base + t * inner] = e;
                    sum += e;
                }
                for t in 0..n {
                    data[base + t * inner] /= sum;
                }
            }
        }
        let rg = self.node(x).requires_grad;
        Ok(self.push(shape, data, rg, Op::Softmax { x, axis }))
    }

    /// Row-wise softmax over a rank-2 tensor restricted to `allowed` entries.
    ///
    /// Disallowed entries are excluded from the maximum and the normalizer and
    /// come out exactly `0.0`; they receive exactly zero gradient. A row with
    /// no allowed entry yields an all-zero row.
    pub fn masked_softmax(&mut self, x: TensorId, allowed: &[bool]) -> Result<TensorId> {
        let (m, n) = self.rank2("masked_softmax", x)?;
        if allowed.len() != m * n {
            return Err(TensorError::AuxLengthMismatch {
                op: "masked_softmax",
                what: "mask",
                len: allowed.len(),
                expected: m * n,
            });
        }
        let src = &self.node(x).data;
        let mut data = vec![S::zero(); m * n];
        for i in 0..m {
            let row = i * n;
            let mut max = S::neg_infinity();
            for j in 0..n {
                if allowed[row + j] && src[row + j] > max {
                    max = src[row + j];
                }
            }
            if max == S::neg_infinity() {
                continue; // no allowed entries: row stays zero
            }
            let mut sum = S::zero();
            for j in 0..n {
                if allowed[row + j] {
                    let e = (src[row + j] - max).exp();
                    data[row + j] = e;
                    sum += e;
                }
            }
            for j in 0..n {
                if allowed[row + j] {
                    data[row + j] /= sum;
                }
            }
        }
        let rg = self.node(x).requires_grad;
        Ok(self.push(vec![m, n], data, rg, Op::MaskedSoftmax { x }))
    }

    /// Layer normalization over the trailing axis with learned gain and bias.
    pub fn layer_norm(&mut self, x: TensorId, gain: TensorId, bias: TensorId, eps: S) -> Result<TensorId> {
        let xshape = self.node(x).shape.clone();
        let d = match xshape.last() {
            Some(&d) if d > 0 => d,
            _ => return Err(TensorError::EmptyInput { op: "layer_norm" }),
        };
        for (name, t) in [("gain", gain), ("bias", bias)] {
            let s = &self.node(t).shape;
            if s.as_slice() != [d] {
                return Err(TensorError::AuxLengthMismatch {
                    op: "layer_norm",
                    what: if name == "gain" { "gain" } else { "bias" },
                    len: self.node(t).data.len(),
                    expected: d,
                });
            }
        }
        let rows = self.node(x).data.len() / d;
        let src = &self.node(x).data;
        let gdata = &self.node(gain).data;
        let bdata = &self.node(bias).data;
        let mut data = vec![S::zero(); src.len()];
        let mut xhat = vec![S::zero(); src.len()];
        let mut inv_std = vec![S::zero(); rows];
        let dn = S::from_usize(d);
        for r in 0..rows {
            let row = &src[r * d..(r + 1) * d];
            let mean = row.iter().fold(S::zero(), |acc, &v| acc + v) / dn;
            let var = row
                .iter()
                .fold(S::zero(), |acc, &v| acc + (v - mean) * (v - mean))
                / dn;
            let is = (var + eps).sqrt().recip();
            inv_std[r] = is;
            for j in 0..d {
                let xh = (row[j] - mean) * is;
                xhat[r * d + j] = xh;
                data[r * d + j] = gdata[j] * xh + bdata[j];
            }
        }
        let rg = self.node(x).requires_grad
            || self.node(gain).requires_grad
            || self.node(bias).requires_grad;
        Ok(self.push(
            xshape,
            data,
            rg,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
        ))
    }

    // ----- losses and lookups ----------------------------------------------

    /// Summed cross-entropy between rank-2 `logits` (`[rows, classes]`) and
    /// integer `targets`, skipping rows whose target equals `ignore_id`.
    ///
    /// The returned loss is the *sum* over counted rows; divide by
    /// [`CrossEntropyOut::counted`] for the mean. If every row is ignored the
    /// loss is exactly zero and a warning is logged.
    pub fn cross_entropy(&mut self, logits: TensorId, targets: &[u32], ignore_id: u32) -> Result<CrossEntropyOut> {
        let (rows, classes) = self.rank2("cross_entropy", logits)?;
        if targets.len() != rows {
            return Err(TensorError::AuxLengthMismatch {
                op: "cross_entropy",
                what: "targets",
                len: targets.len(),
                expected: rows,
            });
        }
        let mut resolved = Vec::with_capacity(rows);
        for (row, &t) in targets.iter().enumerate() {
            if t == ignore_id {
                resolved.push(None);
            } else if (t as usize) < classes {
                resolved.push(Some(t as usize));
            } else {
                return Err(TensorError::TargetOutOfRange {
                    target: t as usize,
                    classes,
                    row,
                });
            }
        }
        let src = &self.node(logits).data;
        let mut probs = vec![S::zero(); src.len()];
        let mut loss = S::zero();
        let mut counted = 0usize;
        for (r, target) in resolved.iter().enumerate() {
            let row = &src[r * classes..(r + 1) * classes];
            let max = row.iter().fold(S::neg_infinity(), |m, &v| if v > m { v } else { m });
            let sum_exp = row.iter().fold(S::zero(), |acc, &v| acc + (v - max).exp());
            let lse = max + sum_exp.ln();
            for j in 0..classes {
                probs[r * classes + j] = (row[j] - lse).exp();
            }
            if let Some(t) = target {
                loss += lse - row[*t];
                counted += 1;
            }
        }
        if counted == 0 {
            log::warn!("cross_entropy: every target position was ignored; loss is 0");
        }
        let rg = self.node(logits).requires_grad;
        let loss_id = self.push(
            vec![1],
            vec![loss],
            rg,
            Op::CrossEntropy {
                logits,
                targets: resolved,
                probs,
            },
        );
        Ok(CrossEntropyOut {
            loss: loss_id,
            counted,
        })
    }

    /// Gather rows of `table` (`[vocab, width]`) by token id.
    pub fn embedding(&mut self, table: TensorId, ids: &[u32]) -> Result<TensorId> {
        let (vocab, width) = self.rank2("embedding", table)?;
        let mut idx = Vec::with_capacity(ids.len());
        for &id in ids {
            if (id as usize) >= vocab {
                return Err(TensorError::IndexOutOfRange {
                    op: "embedding",
                    index: id as usize,
                    dim: vocab,
                });
            }
            idx.push(id as usize);
        }
        let src = &self.node(table).data;
        let mut data = Vec::with_capacity(idx.len() * width);
        for &i in &idx {
            data.extend_from_slice(&src[i * width..(i + 1) * width]);
        }
        let rg = self.node(table).requires_grad;
        Ok(self.push(
            vec![idx.len(), width],
            data,
            rg,
            Op::Embedding { table, ids: idx },
        ))
    }

    /// Inverted dropout with a seeded RNG. Each element is zeroed with
    /// probability `rate`, survivors are scaled by `1/(1-rate)`. A rate of
    /// exactly zero returns `x` unchanged without recording a node.
    pub fn dropout(&mut self, x: TensorId, rate: f64, rng: &mut ChaCha8Rng) -> Result<TensorId> {
        if !(0.0..1.0).contains(&rate) {
            return Err(TensorError::InvalidDropoutRate { rate });
        }
        if rate == 0.0 {
            return Ok(x);
        }
        let keep = S::from_f64(1.0 / (1.0 - rate));
        let mask: Vec<S> = (0..self.node(x).data.len())
            .map(|_| {
                if rng.random::<f64>() < rate {
                    S::zero()
                } else {
                    keep
                }
            })
            .collect();
        let data: Vec<S> = self
            .node(x)
            .data
            .iter()
            .zip(&mask)
            .map(|(&v, &m)| v * m)
            .collect();
        let rg = self.node(x).requires_grad;
        let shape = self.node(x).shape.clone();
        Ok(self.push(shape, data, rg, Op::Dropout { x, mask }))
    }

    // ----- backward ---------------------------------------------------------

    /// Reverse-mode differentiation from a scalar `root`.
    ///
    /// Walks the tape once in reverse creation order, so each node is visited
    /// exactly once. Gradients accumulate into every `requires_grad` node;
    /// calling `backward` again adds to the existing accumulation (use
    /// [`Graph::zero_grads`] between passes if that is not wanted).
    pub fn backward(&mut self, root: TensorId) -> Result<()> {
        if self.node(root).data.len() != 1 {
            return Err(TensorError::NonScalarRoot {
                shape: self.node(root).shape.clone(),
            });
        }
        let mut pending: Vec<Option<Vec<S>>> = vec![None; self.nodes.len()];
        pending[root.0] = Some(vec![S::one()]);
        for id in (0..=root.0).rev() {
            let Some(gy) = pending[id].take() else {
                continue;
            };
            if !self.nodes[id].requires_grad {
                continue;
            }
            {
                let node = &mut self.nodes[id];
                let grad = node.grad.get_or_insert_with(|| vec![S::zero(); gy.len()]);
                for (g, &u) in grad.iter_mut().zip(&gy) {
                    *g += u;
                }
            }
            self.propagate(id, &gy, &mut pending);
        }
        Ok(())
    }

    /// Add `contrib` into the pending gradient of `target` if it needs one.
    fn send(&self, pending: &mut [Option<Vec<S>>], target: TensorId, contrib: Vec<S>) {
        if !self.node(target).requires_grad {
            return;
        }
        match &mut pending[target.0] {
            Some(acc) => {
                for (a, c) in acc.iter_mut().zip(&contrib) {
                    *a += *c;
                }
            }
            slot @ None => *slot = Some(contrib),
        }
    }

    fn propagate(&self, id: usize, gy: &[S], pending: &mut [Option<Vec<S>>]) {
        // Ops are matched by moving lightweight fields out via references; all
        // reads go through immutable borrows of `self.nodes`.
        match &self.nodes[id].op {
            Op::Leaf => {}
            Op::Matmul { a, b } => {
                let (a, b) = (*a, *b);
                let m = self.node(a).shape[0];
                let k = self.node(a).shape[1];
                let n = self.node(b).shape[1];
                if self.node(a).requires_grad {
                    let ga = mm_nt(gy, &self.node(b).data, m, n, k);
                    self.send(pending, a, ga);
                }
                if self.node(b).requires_grad {
                    let gb = mm_tn(&self.node(a).data, gy, m, k, n);
                    self.send(pending, b, gb);
                }
            }
            Op::Add { a, b } => {
                let (a, b) = (*a, *b);
                self.send(pending, a, gy.to_vec());
                self.send(pending, b, gy.to_vec());
            }
            Op::Mul { a, b } => {
                let (a, b) = (*a, *b);
                if self.node(a).requires_grad {
                    let ga: Vec<S> = gy
                        .iter()
                        .zip(&self.node(b).data)
                        .map(|(&g, &v)| g * v)
                        .collect();
                    self.send(pending, a, ga);
                }
                if self.node(b).requires_grad {
                    let gb: Vec<S> = gy
                        .iter()
                        .zip(&self.node(a).data)
                        .map(|(&g, &v)| g * v)
                        .collect();
                    self.send(pending, b, gb);
                }
            }
            Op::AddBias { x, bias } => {
                let (x, bias) = (*x, *bias);
                let d = self.node(bias).data.len();
                self.send(pending, x, gy.to_vec());
                if self.node(bias).requires_grad {
                    let mut gb = vec![S::zero(); d];
                    for (i, &g) in gy.iter().enumerate() {
                        gb[i % d] += g;
                    }
                    self.send(pending, bias, gb);
                }
            }
            Op::Scale { x, factor } => {
                let (x, factor) = (*x, *factor);
                let gx: Vec<S> = gy.iter().map(|&g| g * factor).collect();
                self.send(pending, x, gx);
            }
            Op::Transpose { x } => {
                let x = *x;
                let m = self.node(x).shape[0];
                let n = self.node(x).shape[1];
                // gy has shape [n, m]; transpose it back.
                let mut gx = vec![S::zero(); m * n];
                for j in 0..n {
                    for i in 0..m {
                        gx[i * n + j] = gy[j * m + i];
                    }
                }
                self.send(pending, x, gx);
            }
            Op::Reshape { x } => {
                let x = *x;
                self.send(pending, x, gy.to_vec());
            }
            Op::ConcatRows { parts } => {
                let parts = parts.clone();
                let mut offset = 0;
                for p in parts {
                    let len = self.node(p).data.len();
                    let slice = gy[offset..offset + len].to_vec();
                    offset += len;
                    self.send(pending, p, slice);
                }
            }
            Op::ConcatCols { parts } => {
                let parts = parts.clone();
                let rows = self.nodes[id].shape[0];
                let cols = self.nodes[id].shape[1];
                let mut offset = 0;
                for p in parts {
                    let c = self.node(p).shape[1];
                    let mut gp = Vec::with_capacity(rows * c);
                    for i in 0..rows {
                        gp.extend_from_slice(&gy[i * cols + offset..i * cols + offset + c]);
                    }
                    offset += c;
                    self.send(pending, p, gp);
                }
            }
            Op::SliceRows { x, start } => {
                let (x, start) = (*x, *start);
                let n = self.node(x).shape[1];
                let mut gx = vec![S::zero(); self.node(x).data.len()];
                gx[start * n..start * n + gy.len()].copy_from_slice(gy);
                self.send(pending, x, gx);
            }
            Op::SliceCols { x, start } => {
                let (x, start) = (*x, *start);
                let m = self.node(x).shape[0];
                let n = self.node(x).shape[1];
                let w = self.nodes[id].shape[1];
                let mut gx = vec![S::zero(); m * n];
                for i in 0..m {
                    gx[i * n + start..i * n + start + w].copy_from_slice(&gy[i * w..(i + 1) * w]);
                }
                self.send(pending, x, gx);
            }
            Op::SumAll { x } => {
                let x = *x;
                let g = gy[0];
                let gx = vec![g; self.node(x).data.len()];
                self.send(pending, x, gx);
            }
            Op::Gelu { x } => {
                let x = *x;
                let gx: Vec<S> = self
                    .node(x)
                    .data
                    .iter()
                    .zip(gy)
                    .map(|(&v, &g)| g * gelu_derivative(v))
                    .collect();
                self.send(pending, x, gx);
            }
            Op::Relu { x } => {
                let x = *x;
                let gx: Vec<S> = self
                    .node(x)
                    .data
                    .iter()
                    .zip(gy)
                    .map(|(&v, &g)| if v > S::zero() { g } else { S::zero() })
                    .collect();
                self.send(pending, x, gx);
            }
            Op::Softmax { x, axis } => {
                let (x, axis) = (*x, *axis);
                let shape = &self.nodes[id].shape;
                let n = shape[axis];
                let inner: usize = shape[axis + 1..].iter().product();
                let outer: usize = shape[..axis].iter().product();
                let y = &self.nodes[id].data;
                let mut gx = vec![S::zero(); y.len()];
                for o in 0..outer {
                    for r in 0..inner {
                        let base = o * n * inner + r;
                        let mut dot = S::zero();
                        for t in 0..n {
                            let i = base + t * inner;
                            dot += gy[i] * y[i];
                        }
                        for t in 0..n {
                            let i = base + t * inner;
                            gx[i] = y[i] * (gy[i] - dot);
                        }
                    }
                }
                self.send(pending, x, gx);
            }
            Op::MaskedSoftmax { x } => {
                // Disallowed entries have y == 0, so they contribute nothing
                // to the row dot product and receive exactly zero gradient.
                let x = *x;
                let m = self.nodes[id].shape[0];
                let n = self.nodes[id].shape[1];
                let y = &self.nodes[id].data;
                let mut gx = vec![S::zero(); y.len()];
                for i in 0..m {
                    let row = i * n;
                    let mut dot = S::zero();
                    for j in 0..n {
                        dot += gy[row + j] * y[row + j];
                    }
                    for j in 0..n {
                        gx[row + j] = y[row + j] * (gy[row + j] - dot);
                    }
                }
                self.send(pending, x, gx);
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            } => {
                let (x, gain, bias) = (*x, *gain, *bias);
                let d = self.node(gain).data.len();
                let rows = xhat.len() / d;
                let dn = S::from_usize(d);
                let gdata = &self.node(gain).data;
                let mut gx = vec![S::zero(); xhat.len()];
                let mut ggain = vec![S::zero(); d];
                let mut gbias = vec![S::zero(); d];
                for r in 0..rows {
                    let base = r * d;
                    let is = inv_std[r];
                    let mut mean_dxhat = S::zero();
                    let mut mean_dxhat_xhat = S::zero();
                    for j in 0..d {
                        let g = gy[base + j];
                        let xh = xhat[base + j];
                        ggain[j] += g * xh;
                        gbias[j] += g;
                        let dxh = g * gdata[j];
                        mean_dxhat += dxh;
                        mean_dxhat_xhat += dxh * xh;
                    }
                    mean_dxhat /= dn;
                    mean_dxhat_xhat /= dn;
                    for j in 0..d {
                        let dxh = gy[base + j] * gdata[j];
                        gx[base + j] = is * (dxh - mean_dxhat - xhat[base + j] * mean_dxhat_xhat);
                    }
                }
                // xhat/inv_std borrows end here; sends only need separate ids.
                self.send(pending, x, gx);
                self.send(pending, gain, ggain);
                self.send(pending, bias, gbias);
            }
            Op::CrossEntropy {
                logits,
                targets,
                probs,
            } => {
                let logits = *logits;
                let classes = self.node(logits).shape[1];
                let g = gy[0];
                let mut gx = vec![S::zero(); probs.len()];
                for (r, target) in targets.iter().enumerate() {
                    let Some(t) = target else { continue };
                    let base = r * classes;
                    for j in 0..classes {
                        gx[base + j] = probs[base + j] * g;
                    }
                    gx[base + *t] -= g;
                }
                self.send(pending, logits, gx);
            }
            Op::Embedding { table, ids } => {
                let table = *table;
                let ids = ids.clone();
                let width = self.node(table).shape[1];
                let mut gt = vec![S::zero(); self.node(table).data.len()];
                for (row, &i) in ids.iter().enumerate() {
                    for j in 0..width {
                        gt[i * width + j] += gy[row * width + j];
                    }
                }
                self.send(pending, table, gt);
            }
            Op::Dropout { x, mask } => {
                let x = *x;
                let gx: Vec<S> = gy.iter().zip(mask).map(|(&g, &m)| g * m).collect();
                self.send(pending, x, gx);
            }
        }
    }
}

/// `C[m,n] = A[m,k] * B[k,n]`, accumulating over `k` in ascending order.
fn mm_nn<S: Scalar>(a: &[S], b: &[S], m: usize, k: usize, n: usize) -> Vec<S> {
    let mut c = vec![S::zero(); m * n];
    for i in 0..m {
        for p in 0..k {
            let aip = a[i * k + p];
            let crow = &mut c[i * n..(i + 1) * n];
            let brow = &b[p * n..(p + 1) * n];
            for j in 0..n {
                crow[j] += aip * brow[j];
            }
        }
    }
    c
}

/// `C[m,k] = A[m,n] * B[k,n]^T`, accumulating over `n` in ascending order.
fn mm_nt<S: Scalar>(a: &[S], b: &[S], m: usize, n: usize, k: usize) -> Vec<S> {
    let mut c = vec![S::zero(); m * k];
    for i in 0..m {
        let arow = &a[i * n..(i + 1) * n];
        for p in 0..k {
            let brow = &b[p * n..(p + 1) * n];
            let mut acc = S::zero();
            for j in 0..n {
                acc += arow[j] * brow[j];
            }
            c[i * k + p] = acc;
        }
    }
    c
}

/// `C[k,n] = A[m,k]^T * B[m,n]`, accumulating over `m` in ascending order.
fn mm_tn<S: Scalar>(a: &[S], b: &[S], m: usize, k: usize, n: usize) -> Vec<S> {
    let mut c = vec![S::zero(); k * n];
    for i in 0..m {
        for p in 0..k {
            let aip = a[i * k + p];
            let crow = &mut c[p * n..(p + 1) * n];
            let brow = &b[i * n..(i + 1) * n];
            for j in 0..n {
                crow[j] += aip * brow[j];
            }
        }
    }
    c
}

fn gelu_value<S: Scalar>(x: S) -> S {
    let half = S::from_f64(0.5);
    let c = S::from_f64(0.797_884_560_802_865_4); // sqrt(2/pi)
    let k = S::from_f64(0.044715);
    let u = c * (x + k * x * x * x);
    half * x * (S::one() + u.tanh())
}

fn gelu_derivative<S: Scalar>(x: S) -> S {
    let half = S::from_f64(0.5);
    let c = S::from_f64(0.797_884_560_802_865_4);
    let k = S::from_f64(0.044715);
    let three = S::from_f64(3.0);
    let u = c * (x + k * x * x * x);
    let t = u.tanh();
    let du = c * (S::one() + three * k * x * x);
    half * (S::one() + t) + half * x * (S::one() - t * t) * du
}
