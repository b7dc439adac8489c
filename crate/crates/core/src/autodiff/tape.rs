//! Define-by-run reverse-mode differentiation.
//!
//! A [`Tape`] is built fresh for each forward pass. Every operation appends a
//! node holding its output value and enough of its inputs to run the backward
//! rule; node ids are handed out in creation order, so the node list is always
//! topologically sorted and [`Tape::backward`] is a single reverse sweep.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::sparse::SparseMatrix;
use super::tensor::{matmul_raw, transpose_raw, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Elementwise operator family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Elementwise {
    Add,
    Sub,
    Mul,
    Relu,
    Sigmoid,
    Tanh,
    Elu(f64),
    LeakyRelu(f64),
    /// Inverted dropout with drop probability `p`, mask drawn from `seed`.
    Dropout { p: f64, seed: u64 },
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    SpMM(Arc<SparseMatrix>, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    ScaleBy(Var, Var),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    Elu(Var, f64),
    LeakyRelu(Var, f64),
    Dropout(Var, Vec<f64>),
    SoftmaxRows(Var),
    CrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        probs: Vec<f64>,
    },
    Sum(Var),
    Mean(Var),
    MeanRows(Var),
    ConcatCols(Vec<Var>),
    GatherRows(Var, Arc<Vec<usize>>),
    RowDot(Var, Var),
    MulCol(Var, Var),
    SegmentSoftmax(Var, Arc<Vec<usize>>),
    SegmentSum(Var, Arc<Vec<usize>>),
    NormalizeRows(Var, Vec<f64>),
    EdgeDot {
        a: Var,
        b: Var,
        target: Arc<Vec<usize>>,
        source: Arc<Vec<usize>>,
    },
    EdgeAggregate {
        h: Var,
        w: Var,
        source: Arc<Vec<usize>>,
        offsets: Arc<Vec<usize>>,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Recorded computation graph.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Rows below this norm are treated as zero vectors by [`Tape::normalize_rows`].
const NORM_FLOOR: f64 = 1e-12;

fn dims(t: &Tensor) -> (usize, usize) {
    (t.rows(), t.cols())
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Registers an input tensor. Its `requires_grad` flag decides whether
    /// gradients flow to it.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.nodes.push(Node {
            value: t,
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    /// Registers a trainable tensor.
    pub fn param(&mut self, t: Tensor) -> Var {
        self.leaf(t.with_requires_grad(true))
    }

    /// Registers a constant.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.leaf(t.with_requires_grad(false))
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].value.grad()
    }

    /// Moves a node's tensor (with its gradient) out of the tape.
    pub fn take(&mut self, v: Var) -> Tensor {
        std::mem::replace(&mut self.nodes[v.0].value, Tensor::zeros(&[1]))
    }

    fn push(&mut self, shape: Vec<usize>, values: Vec<f64>, op: Op, inputs: &[Var]) -> Result<Var> {
        let requires_grad = inputs.iter().any(|i| self.nodes[i.0].value.requires_grad());
        let value = Tensor::from_parts(shape, values)?.with_requires_grad(requires_grad);
        self.nodes.push(Node { value, op });
        Ok(Var(self.nodes.len() - 1))
    }

    fn mat(&self, v: Var, what: &str) -> Result<(usize, usize)> {
        self.value(v).require_matrix(what)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.mat(a, "matmul lhs")?;
        let (k2, n) = self.mat(b, "matmul rhs")?;
        if k != k2 {
            return Err(Error::dim(format!(
                "matmul inner dimensions differ: {m}x{k} by {k2}x{n}"
            )));
        }
        let out = matmul_raw(self.value(a).values(), self.value(b).values(), m, k, n);
        self.push(vec![m, n], out, Op::MatMul(a, b), &[a, b])
    }

    /// Sparse constant times dense variable.
    pub fn spmm(&mut self, s: &Arc<SparseMatrix>, d: Var) -> Result<Var> {
        let (k, n) = self.mat(d, "spmm rhs")?;
        if k != s.cols() {
            return Err(Error::dim(format!(
                "spmm: sparse is {}x{}, dense has {k} rows",
                s.rows(),
                s.cols()
            )));
        }
        let out = s.spmm_raw(self.value(d).values(), n);
        self.push(vec![s.rows(), n], out, Op::SpMM(Arc::clone(s), d), &[d])
    }

    /// Dispatches an elementwise operator. Binary kinds take two operands;
    /// `Add` also accepts a row vector as the second operand.
    pub fn elementwise(&mut self, kind: Elementwise, operands: &[Var]) -> Result<Var> {
        let arity = match kind {
            Elementwise::Add | Elementwise::Sub | Elementwise::Mul => 2,
            _ => 1,
        };
        if operands.len() != arity {
            return Err(Error::usage(format!(
                "{kind:?} takes {arity} operand(s), got {}",
                operands.len()
            )));
        }
        let x = operands[0];
        match kind {
            Elementwise::Add => {
                let b = operands[1];
                if self.value(x).shape() == self.value(b).shape() {
                    self.add(x, b)
                } else {
                    self.add_row(x, b)
                }
            }
            Elementwise::Sub => self.sub(x, operands[1]),
            Elementwise::Mul => self.mul(x, operands[1]),
            Elementwise::Relu => self.relu(x),
            Elementwise::Sigmoid => self.sigmoid(x),
            Elementwise::Tanh => self.tanh(x),
            Elementwise::Elu(alpha) => self.elu(x, alpha),
            Elementwise::LeakyRelu(slope) => self.leaky_relu(x, slope),
            Elementwise::Dropout { p, seed } => self.dropout(x, p, seed, true),
        }
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(Error::dim(format!(
                "{what}: shapes {:?} and {:?} differ",
                self.value(a).shape(),
                self.value(b).shape()
            )));
        }
        Ok(())
    }

    fn zip_with(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.value(a)
            .values()
            .iter()
            .zip(self.value(b).values())
            .map(|(&x, &y)| f(x, y))
            .collect()
    }

    fn map(&self, a: Var, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.value(a).values().iter().map(|&x| f(x)).collect()
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let out = self.zip_with(a, b, |x, y| x + y);
        let shape = self.value(a).shape().to_vec();
        self.push(shape, out, Op::Add(a, b), &[a, b])
    }

    /// `x [m×n] + b` with `b` of shape `[n]` or `[1×n]` broadcast over rows.
    pub fn add_row(&mut self, x: Var, b: Var) -> Result<Var> {
        let (m, n) = self.mat(x, "add_row")?;
        if self.value(b).len() != n || self.value(b).rows() != n && self.value(b).rows() != 1 {
            return Err(Error::dim(format!(
                "add_row: bias shape {:?} does not broadcast over {m}x{n}",
                self.value(b).shape()
            )));
        }
        let bias = self.value(b).values();
        let out: Vec<f64> = self
            .value(x)
            .values()
            .chunks(n)
            .flat_map(|row| row.iter().zip(bias).map(|(v, c)| v + c))
            .collect();
        self.push(vec![m, n], out, Op::AddRow(x, b), &[x, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "sub")?;
        let out = self.zip_with(a, b, |x, y| x - y);
        let shape = self.value(a).shape().to_vec();
        self.push(shape, out, Op::Sub(a, b), &[a, b])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        let out = self.zip_with(a, b, |x, y| x * y);
        let shape = self.value(a).shape().to_vec();
        self.push(shape, out, Op::Mul(a, b), &[a, b])
    }

    /// Multiplies by a fixed scalar.
    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        let out = self.map(a, |x| x * s);
        let shape = self.value(a).shape().to_vec();
        self.push(shape, out, Op::Scale(a, s), &[a])
    }

    /// Multiplies by a one-element variable.
    pub fn scale_by(&mut self, a: Var, s: Var) -> Result<Var> {
        if !self.value(s).is_scalar() {
            return Err(Error::dim("scale_by expects a one-element scale"));
        }
        let k = self.value(s).values()[0];
        let out = self.map(a, |x| x * k);
        let shape = self.value(a).shape().to_vec();
        self.push(shape, out, Op::ScaleBy(a, s), &[a, s])
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let out = self.map(a, |x| x.max(0.0));
        let shape = self.value(a).shape().to_vec();
        self.push(shape, out, Op::Relu(a), &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let out = self.map(a, |x| {
            if x >= 0.0 {
                1.0 / (1.0 + (-x).exp())
            } else {
                let e = x.exp();
                e / (1.0 + e)
            }
        });
        let shape = self.value(a).shape().to_vec();
        self.push(shape, out, Op::Sigmoid(a), &[a])
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let out = self.map(a, f64::tanh);
        let shape = self.value(a).shape().to_vec();
        self.push(shape, out, Op::Tanh(a), &[a])
    }

    pub fn elu(&mut self, a: Var, alpha: f64) -> Result<Var> {
        let out = self.map(a, |x| if x > 0.0 { x } else { alpha * x.exp_m1() });
        let shape = self.value(a).shape().to_vec();
        self.push(shape, out, Op::Elu(a, alpha), &[a])
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Result<Var> {
        let out = self.map(a, |x| if x > 0.0 { x } else { slope * x });
        let shape = self.value(a).shape().to_vec();
        self.push(shape, out, Op::LeakyRelu(a, slope), &[a])
    }

    /// Inverted dropout. With `training == false` or `p == 0` the input is
    /// returned unchanged (no node is recorded).
    pub fn dropout(&mut self, a: Var, p: f64, seed: u64, training: bool) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::config(format!("dropout probability {p} outside [0,1)")));
        }
        if !training || p == 0.0 {
            return Ok(a);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let keep = 1.0 / (1.0 - p);
        let mask: Vec<f64> = (0..self.value(a).len())
            .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
            .collect();
        let out = self
            .value(a)
            .values()
            .iter()
            .zip(&mask)
            .map(|(x, m)| x * m)
            .collect();
        let shape = self.value(a).shape().to_vec();
        self.push(shape, out, Op::Dropout(a, mask), &[a])
    }

    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let (m, n) = self.mat(a, "softmax_rows")?;
        let out = softmax_rows_raw(self.value(a).values(), m, n);
        self.push(vec![m, n], out, Op::SoftmaxRows(a), &[a])
    }

    /// Mean negative log-likelihood of `labels` under row-softmax of `logits`.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let (m, c) = self.mat(logits, "cross_entropy")?;
        if labels.len() != m {
            return Err(Error::dim(format!(
                "cross_entropy: {m} rows but {} labels",
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
            return Err(Error::data(format!("label {bad} outside [0,{c})")));
        }
        let x = self.value(logits).values();
        let mut loss = 0.0;
        for (r, &label) in labels.iter().enumerate() {
            let row = &x[r * c..(r + 1) * c];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            loss += lse - row[label];
        }
        loss /= m as f64;
        let probs = softmax_rows_raw(x, m, c);
        self.push(
            vec![1],
            vec![loss],
            Op::CrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
            &[logits],
        )
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).values().iter().sum();
        self.push(vec![1], vec![s], Op::Sum(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let s = t.values().iter().sum::<f64>() / t.len() as f64;
        self.push(vec![1], vec![s], Op::Mean(a), &[a])
    }

    /// Column means: `[m×n] -> [1×n]`.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var> {
        let (m, n) = self.mat(a, "mean_rows")?;
        let mut out = vec![0.0; n];
        for row in self.value(a).values().chunks(n) {
            out.iter_mut().zip(row).for_each(|(o, v)| *o += v);
        }
        out.iter_mut().for_each(|o| *o /= m as f64);
        self.push(vec![1, n], out, Op::MeanRows(a), &[a])
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::usage("concat_cols of nothing"));
        }
        let m = self.value(parts[0]).rows();
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (pm, pn) = self.mat(p, "concat_cols")?;
            if pm != m {
                return Err(Error::dim("concat_cols row counts differ"));
            }
            widths.push(pn);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(m * total);
        for r in 0..m {
            for (&p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.value(p).values()[r * w..(r + 1) * w]);
            }
        }
        self.push(vec![m, total], out, Op::ConcatCols(parts.to_vec()), parts)
    }

    /// Row gather: output row `e` is input row `idx[e]`.
    pub fn gather_rows(&mut self, a: Var, idx: &Arc<Vec<usize>>) -> Result<Var> {
        let (m, n) = self.mat(a, "gather_rows")?;
        if idx.is_empty() {
            return Err(Error::dim("gather_rows with no indices"));
        }
        let src = self.value(a).values();
        let mut out = Vec::with_capacity(idx.len() * n);
        for &i in idx.iter() {
            if i >= m {
                return Err(Error::dim(format!("gather index {i} out of range {m}")));
            }
            out.extend_from_slice(&src[i * n..(i + 1) * n]);
        }
        self.push(vec![idx.len(), n], out, Op::GatherRows(a, Arc::clone(idx)), &[a])
    }

    /// Rowwise inner product: `[E×d]·[E×d] -> [E×1]`.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "row_dot")?;
        let (m, n) = self.mat(a, "row_dot")?;
        let av = self.value(a).values();
        let bv = self.value(b).values();
        let out = (0..m)
            .map(|r| {
                av[r * n..(r + 1) * n]
                    .iter()
                    .zip(&bv[r * n..(r + 1) * n])
                    .map(|(x, y)| x * y)
                    .sum()
            })
            .collect();
        self.push(vec![m, 1], out, Op::RowDot(a, b), &[a, b])
    }

    /// Scales each row of `x [E×d]` by the matching entry of `w [E×1]`.
    pub fn mul_col(&mut self, x: Var, w: Var) -> Result<Var> {
        let (m, n) = self.mat(x, "mul_col")?;
        if self.value(w).len() != m {
            return Err(Error::dim("mul_col weight length must equal row count"));
        }
        let wv = self.value(w).values();
        let out: Vec<f64> = self
            .value(x)
            .values()
            .chunks(n)
            .zip(wv)
            .flat_map(|(row, &s)| row.iter().map(move |v| v * s))
            .collect();
        self.push(vec![m, n], out, Op::MulCol(x, w), &[x, w])
    }

    /// Softmax of a column `[E×1]` within each segment `offsets[i]..offsets[i+1]`.
    pub fn segment_softmax(&mut self, s: Var, offsets: &Arc<Vec<usize>>) -> Result<Var> {
        let e = self.value(s).len();
        check_offsets(offsets, e)?;
        let src = self.value(s).values();
        let mut out = vec![0.0; e];
        for w in offsets.windows(2) {
            let seg = &src[w[0]..w[1]];
            if seg.is_empty() {
                continue;
            }
            let max = seg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for (o, &v) in out[w[0]..w[1]].iter_mut().zip(seg) {
                *o = (v - max).exp();
                z += *o;
            }
            out[w[0]..w[1]].iter_mut().for_each(|o| *o /= z);
        }
        self.push(vec![e, 1], out, Op::SegmentSoftmax(s, Arc::clone(offsets)), &[s])
    }

    /// Sums rows of `x [E×d]` within each segment, producing `[n×d]` with
    /// `n = offsets.len() - 1`. Empty segments give zero rows.
    pub fn segment_sum(&mut self, x: Var, offsets: &Arc<Vec<usize>>) -> Result<Var> {
        let (e, d) = self.mat(x, "segment_sum")?;
        check_offsets(offsets, e)?;
        let n = offsets.len() - 1;
        let src = self.value(x).values();
        let mut out = vec![0.0; n * d];
        for (i, w) in offsets.windows(2).enumerate() {
            let orow = &mut out[i * d..(i + 1) * d];
            for r in w[0]..w[1] {
                orow.iter_mut()
                    .zip(&src[r * d..(r + 1) * d])
                    .for_each(|(o, v)| *o += v);
            }
        }
        self.push(vec![n, d], out, Op::SegmentSum(x, Arc::clone(offsets)), &[x])
    }

    /// Per-edge inner product `a[target[e]] · b[source[e]]` as `[E×1]`,
    /// without materializing the gathered rows.
    pub fn edge_dot(
        &mut self,
        a: Var,
        b: Var,
        target: &Arc<Vec<usize>>,
        source: &Arc<Vec<usize>>,
    ) -> Result<Var> {
        self.same_shape(a, b, "edge_dot")?;
        let (m, n) = self.mat(a, "edge_dot")?;
        if target.len() != source.len() || target.is_empty() {
            return Err(Error::dim("edge_dot needs equally long, non-empty endpoint lists"));
        }
        if target.iter().chain(source.iter()).any(|&i| i >= m) {
            return Err(Error::dim(format!("edge endpoint out of range {m}")));
        }
        let av = self.value(a).values();
        let bv = self.value(b).values();
        let out = target
            .iter()
            .zip(source.iter())
            .map(|(&t, &s)| {
                av[t * n..(t + 1) * n]
                    .iter()
                    .zip(&bv[s * n..(s + 1) * n])
                    .map(|(x, y)| x * y)
                    .sum()
            })
            .collect();
        let op = Op::EdgeDot {
            a,
            b,
            target: Arc::clone(target),
            source: Arc::clone(source),
        };
        self.push(vec![target.len(), 1], out, op, &[a, b])
    }

    /// Weighted neighbor sum: row `i` of the output is
    /// `Σ_{e in offsets[i]..offsets[i+1]} w[e] · h[source[e]]`.
    pub fn edge_aggregate(
        &mut self,
        h: Var,
        w: Var,
        source: &Arc<Vec<usize>>,
        offsets: &Arc<Vec<usize>>,
    ) -> Result<Var> {
        let (m, d) = self.mat(h, "edge_aggregate")?;
        let e = source.len();
        if self.value(w).len() != e {
            return Err(Error::dim("edge_aggregate needs one weight per edge"));
        }
        check_offsets(offsets, e)?;
        if source.iter().any(|&i| i >= m) {
            return Err(Error::dim(format!("edge source out of range {m}")));
        }
        let hv = self.value(h).values();
        let wv = self.value(w).values();
        let n = offsets.len() - 1;
        let mut out = vec![0.0; n * d];
        for (i, seg) in offsets.windows(2).enumerate() {
            let orow = &mut out[i * d..(i + 1) * d];
            for k in seg[0]..seg[1] {
                let (s, wk) = (source[k], wv[k]);
                orow.iter_mut()
                    .zip(&hv[s * d..(s + 1) * d])
                    .for_each(|(o, v)| *o += wk * v);
            }
        }
        let op = Op::EdgeAggregate {
            h,
            w,
            source: Arc::clone(source),
            offsets: Arc::clone(offsets),
        };
        self.push(vec![n, d], out, op, &[h, w])
    }

    /// L2-normalizes each row; rows with (near) zero norm map to zero.
    pub fn normalize_rows(&mut self, a: Var) -> Result<Var> {
        let (m, n) = self.mat(a, "normalize_rows")?;
        let src = self.value(a).values();
        let mut norms = Vec::with_capacity(m);
        let mut out = Vec::with_capacity(m * n);
        for row in src.chunks(n) {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            norms.push(norm);
            if norm < NORM_FLOOR {
                out.extend(std::iter::repeat(0.0).take(n));
            } else {
                out.extend(row.iter().map(|v| v / norm));
            }
        }
        let shape = self.value(a).shape().to_vec();
        self.push(shape, out, Op::NormalizeRows(a, norms), &[a])
    }

    /// Reverse sweep from a one-element `loss`, accumulating into the `grad`
    /// slot of every reachable node that requires a gradient.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if !self.value(loss).is_scalar() {
            return Err(Error::usage(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let n = loss.0 + 1;
        let mut grads: Vec<Option<Vec<f64>>> = (0..n).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);
        for id in (0..n).rev() {
            let Some(g) = grads[id].take() else { continue };
            if !self.nodes[id].value.requires_grad() {
                continue;
            }
            for (input, contribution) in self.local_grads(id, &g)? {
                if !self.nodes[input.0].value.requires_grad() {
                    continue;
                }
                match &mut grads[input.0] {
                    Some(acc) => acc.iter_mut().zip(&contribution).for_each(|(a, c)| *a += c),
                    slot @ None => *slot = Some(contribution),
                }
            }
            self.nodes[id].value.accumulate_grad(&g)?;
        }
        Ok(())
    }

    /// Vector-Jacobian products of node `id` for upstream gradient `g`.
    fn local_grads(&self, id: usize, g: &[f64]) -> Result<Vec<(Var, Vec<f64>)>> {
        let node = &self.nodes[id];
        let out = node.value.values();
        let val = |v: Var| self.value(v).values();
        let needs = |v: Var| self.value(v).requires_grad();
        let mut res = Vec::new();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = dims(self.value(*a));
                let n = self.value(*b).cols();
                if needs(*a) {
                    // dA = G·Bᵀ
                    let bt = transpose_raw(val(*b), k, n);
                    res.push((*a, matmul_raw(g, &bt, m, n, k)));
                }
                if needs(*b) {
                    // dB = Aᵀ·G
                    let at = transpose_raw(val(*a), m, k);
                    res.push((*b, matmul_raw(&at, g, k, m, n)));
                }
            }
            Op::SpMM(s, d) => {
                let n = self.value(*d).cols();
                res.push((*d, s.transpose().spmm_raw(g, n)));
            }
            Op::Add(a, b) => {
                res.push((*a, g.to_vec()));
                res.push((*b, g.to_vec()));
            }
            Op::AddRow(x, b) => {
                let n = self.value(*b).len();
                let mut gb = vec![0.0; n];
                for row in g.chunks(n) {
                    gb.iter_mut().zip(row).for_each(|(o, v)| *o += v);
                }
                res.push((*x, g.to_vec()));
                res.push((*b, gb));
            }
            Op::Sub(a, b) => {
                res.push((*a, g.to_vec()));
                res.push((*b, g.iter().map(|v| -v).collect()));
            }
            Op::Mul(a, b) => {
                res.push((*a, g.iter().zip(val(*b)).map(|(x, y)| x * y).collect()));
                res.push((*b, g.iter().zip(val(*a)).map(|(x, y)| x * y).collect()));
            }
            Op::Scale(a, s) => res.push((*a, g.iter().map(|v| v * s).collect())),
            Op::ScaleBy(a, s) => {
                let k = val(*s)[0];
                res.push((*a, g.iter().map(|v| v * k).collect()));
                let gs = g.iter().zip(val(*a)).map(|(x, y)| x * y).sum();
                res.push((*s, vec![gs]));
            }
            Op::Relu(a) => res.push((
                *a,
                g.iter()
                    .zip(val(*a))
                    .map(|(gv, x)| if *x > 0.0 { *gv } else { 0.0 })
                    .collect(),
            )),
            Op::Sigmoid(a) => res.push((
                *a,
                g.iter().zip(out).map(|(gv, y)| gv * y * (1.0 - y)).collect(),
            )),
            Op::Tanh(a) => res.push((
                *a,
                g.iter().zip(out).map(|(gv, y)| gv * (1.0 - y * y)).collect(),
            )),
            Op::Elu(a, alpha) => res.push((
                *a,
                g.iter()
                    .zip(val(*a))
                    .zip(out)
                    .map(|((gv, x), y)| if *x > 0.0 { *gv } else { gv * (y + alpha) })
                    .collect(),
            )),
            Op::LeakyRelu(a, slope) => res.push((
                *a,
                g.iter()
                    .zip(val(*a))
                    .map(|(gv, x)| if *x > 0.0 { *gv } else { gv * slope })
                    .collect(),
            )),
            Op::Dropout(a, mask) => {
                res.push((*a, g.iter().zip(mask).map(|(gv, m)| gv * m).collect()))
            }
            Op::SoftmaxRows(a) => {
                let n = self.value(*a).cols();
                let mut ga = vec![0.0; g.len()];
                for ((grow, yrow), orow) in g.chunks(n).zip(out.chunks(n)).zip(ga.chunks_mut(n)) {
                    let dot: f64 = grow.iter().zip(yrow).map(|(x, y)| x * y).sum();
                    for ((o, gv), y) in orow.iter_mut().zip(grow).zip(yrow) {
                        *o = y * (gv - dot);
                    }
                }
                res.push((*a, ga));
            }
            Op::CrossEntropy {
                logits,
                labels,
                probs,
            } => {
                let c = self.value(*logits).cols();
                let m = labels.len() as f64;
                let mut gl: Vec<f64> = probs.iter().map(|p| p * g[0] / m).collect();
                for (r, &l) in labels.iter().enumerate() {
                    gl[r * c + l] -= g[0] / m;
                }
                res.push((*logits, gl));
            }
            Op::Sum(a) => res.push((*a, vec![g[0]; self.value(*a).len()])),
            Op::Mean(a) => {
                let n = self.value(*a).len();
                res.push((*a, vec![g[0] / n as f64; n]));
            }
            Op::MeanRows(a) => {
                let (m, _) = dims(self.value(*a));
                let ga: Vec<f64> = (0..m).flat_map(|_| g.iter().map(|v| v / m as f64)).collect();
                res.push((*a, ga));
            }
            Op::ConcatCols(parts) => {
                let total = node.value.cols();
                let m = node.value.rows();
                let mut start = 0;
                for &p in parts {
                    let w = self.value(p).cols();
                    let mut gp = Vec::with_capacity(m * w);
                    for r in 0..m {
                        gp.extend_from_slice(&g[r * total + start..r * total + start + w]);
                    }
                    start += w;
                    res.push((p, gp));
                }
            }
            Op::GatherRows(a, idx) => {
                let (m, n) = dims(self.value(*a));
                let mut ga = vec![0.0; m * n];
                for (e, &i) in idx.iter().enumerate() {
                    ga[i * n..(i + 1) * n]
                        .iter_mut()
                        .zip(&g[e * n..(e + 1) * n])
                        .for_each(|(o, v)| *o += v);
                }
                res.push((*a, ga));
            }
            Op::RowDot(a, b) => {
                let n = self.value(*a).cols();
                let scale_rows = |src: &[f64]| -> Vec<f64> {
                    src.chunks(n)
                        .zip(g)
                        .flat_map(|(row, gv)| row.iter().map(move |v| v * gv))
                        .collect()
                };
                res.push((*a, scale_rows(val(*b))));
                res.push((*b, scale_rows(val(*a))));
            }
            Op::MulCol(x, w) => {
                let n = self.value(*x).cols();
                let wv = val(*w);
                let gx: Vec<f64> = g
                    .chunks(n)
                    .zip(wv)
                    .flat_map(|(row, s)| row.iter().map(move |v| v * s))
                    .collect();
                let gw: Vec<f64> = g
                    .chunks(n)
                    .zip(val(*x).chunks(n))
                    .map(|(gr, xr)| gr.iter().zip(xr).map(|(a, b)| a * b).sum())
                    .collect();
                res.push((*x, gx));
                res.push((*w, gw));
            }
            Op::SegmentSoftmax(s, offsets) => {
                let mut gs = vec![0.0; g.len()];
                for w in offsets.windows(2) {
                    let r = w[0]..w[1];
                    let dot: f64 = g[r.clone()].iter().zip(&out[r.clone()]).map(|(a, b)| a * b).sum();
                    for e in r {
                        gs[e] = out[e] * (g[e] - dot);
                    }
                }
                res.push((*s, gs));
            }
            Op::SegmentSum(x, offsets) => {
                let (e, d) = dims(self.value(*x));
                let mut gx = vec![0.0; e * d];
                for (i, w) in offsets.windows(2).enumerate() {
                    for r in w[0]..w[1] {
                        gx[r * d..(r + 1) * d].copy_from_slice(&g[i * d..(i + 1) * d]);
                    }
                }
                res.push((*x, gx));
            }
            Op::EdgeDot { a, b, target, source } => {
                let (m, n) = dims(self.value(*a));
                let (av, bv) = (val(*a), val(*b));
                let mut ga = vec![0.0; m * n];
                let mut gb = vec![0.0; m * n];
                for ((&t, &s), &ge) in target.iter().zip(source.iter()).zip(g) {
                    for j in 0..n {
                        ga[t * n + j] += ge * bv[s * n + j];
                        gb[s * n + j] += ge * av[t * n + j];
                    }
                }
                res.push((*a, ga));
                res.push((*b, gb));
            }
            Op::EdgeAggregate { h, w, source, offsets } => {
                let (m, d) = dims(self.value(*h));
                let (hv, wv) = (val(*h), val(*w));
                let mut gh = vec![0.0; m * d];
                let mut gw = vec![0.0; source.len()];
                for (i, seg) in offsets.windows(2).enumerate() {
                    let gi = &g[i * d..(i + 1) * d];
                    for k in seg[0]..seg[1] {
                        let s = source[k];
                        let hs = &hv[s * d..(s + 1) * d];
                        gw[k] = gi.iter().zip(hs).map(|(a, b)| a * b).sum();
                        gh[s * d..(s + 1) * d]
                            .iter_mut()
                            .zip(gi)
                            .for_each(|(o, v)| *o += wv[k] * v);
                    }
                }
                if needs(*h) {
                    res.push((*h, gh));
                }
                res.push((*w, gw));
            }
            Op::NormalizeRows(a, norms) => {
                let n = self.value(*a).cols();
                let mut ga = vec![0.0; g.len()];
                for (r, &norm) in norms.iter().enumerate() {
                    if norm < NORM_FLOOR {
                        continue;
                    }
                    let span = r * n..(r + 1) * n;
                    let y = &out[span.clone()];
                    let gr = &g[span.clone()];
                    let dot: f64 = y.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for ((o, gv), yv) in ga[span].iter_mut().zip(gr).zip(y) {
                        *o = (gv - yv * dot) / norm;
                    }
                }
                res.push((*a, ga));
            }
        }
        Ok(res)
    }
}

fn check_offsets(offsets: &[usize], len: usize) -> Result<()> {
    if offsets.first() != Some(&0)
        || offsets.last() != Some(&len)
        || offsets.windows(2).any(|w| w[0] > w[1])
    {
        return Err(Error::dim(format!(
            "segment offsets do not partition {len} rows"
        )));
    }
    Ok(())
}

pub(crate) fn softmax_rows_raw(x: &[f64], m: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for r in 0..m {
        let row = &x[r * n..(r + 1) * n];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let orow = &mut out[r * n..(r + 1) * n];
        let mut z = 0.0;
        for (o, v) in orow.iter_mut().zip(row) {
            *o = (v - max).exp();
            z += *o;
        }
        orow.iter_mut().for_each(|o| *o /= z);
    }
    out
}

/// Row softmax of a plain tensor.
pub fn softmax_rows(x: &Tensor) -> Result<Tensor> {
    let (m, n) = x.require_matrix("softmax_rows")?;
    Tensor::from_parts(vec![m, n], softmax_rows_raw(x.values(), m, n))
}
