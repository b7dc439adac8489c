use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{Activation, GinAggregation, ModelConfig, Operator};
use super::context::GraphContext;
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::util::{derive_seed, rng};

/// Negative slope of the attention-score LeakyReLU.
pub const ATTENTION_SLOPE: f64 = 0.2;
const INIT_STREAM: u64 = 0x1417;

/// Forward-pass mode. Training mode applies dropout with masks derived from
/// `seed`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Eval,
    Train { seed: u64 },
}

#[derive(Clone, Copy, Debug)]
enum Init {
    Glorot,
    Zeros,
    Const(f64),
}

struct ParamSpec {
    name: String,
    shape: Vec<usize>,
    init: Init,
}

fn spec(name: impl Into<String>, shape: &[usize], init: Init) -> ParamSpec {
    ParamSpec {
        name: name.into(),
        shape: shape.to_vec(),
        init,
    }
}

fn dense_specs(out: &mut Vec<ParamSpec>, prefix: &str, din: usize, dout: usize) {
    out.push(spec(format!("{prefix}.weight"), &[din, dout], Init::Glorot));
    out.push(spec(format!("{prefix}.bias"), &[1, dout], Init::Zeros));
}

/// GAT per-head width of hidden layers.
fn gat_head_dim(c: &ModelConfig) -> usize {
    if c.concat_heads {
        (c.hidden_dim / c.heads).max(1)
    } else {
        c.hidden_dim
    }
}

fn layout(c: &ModelConfig, in_dim: usize) -> Vec<ParamSpec> {
    let (h, classes, layers, k) = (c.hidden_dim, c.n_classes, c.num_layers, c.order());
    let mut out = Vec::new();
    let layer_in = |l: usize| if l == 0 { in_dim } else { h };
    match c.operator {
        Operator::Gcn | Operator::Sage => {
            for l in 0..layers {
                dense_specs(&mut out, &format!("conv{l}"), layer_in(l), h);
            }
            dense_specs(&mut out, "head", h, classes);
        }
        Operator::Cheb | Operator::Tagcn => {
            let terms = if c.operator == Operator::Cheb { k } else { k + 1 };
            for l in 0..layers {
                for t in 0..terms {
                    out.push(spec(format!("conv{l}.weight{t}"), &[layer_in(l), h], Init::Glorot));
                }
                out.push(spec(format!("conv{l}.bias"), &[1, h], Init::Zeros));
            }
            dense_specs(&mut out, "head", h, classes);
        }
        Operator::Gin => {
            for l in 0..layers {
                if c.epsilon_learnable {
                    out.push(spec(format!("conv{l}.epsilon"), &[1], Init::Zeros));
                }
                dense_specs(&mut out, &format!("conv{l}.mlp0"), layer_in(l), h);
                dense_specs(&mut out, &format!("conv{l}.mlp1"), h, h);
            }
            dense_specs(&mut out, "head", h, classes);
        }
        Operator::Sgc => dense_specs(&mut out, "linear", in_dim, classes),
        Operator::Agnn => {
            dense_specs(&mut out, "input", in_dim, h);
            for l in 0..layers {
                out.push(spec(format!("prop{l}.beta"), &[1], Init::Const(1.0)));
            }
            dense_specs(&mut out, "head", h, classes);
        }
        Operator::Gat => {
            let dh = gat_head_dim(c);
            let mut din = in_dim;
            for l in 0..layers {
                let last = l + 1 == layers;
                let width = if last { classes } else { dh };
                for head in 0..c.heads {
                    let p = format!("gat{l}.head{head}");
                    out.push(spec(format!("{p}.weight"), &[din, width], Init::Glorot));
                    out.push(spec(format!("{p}.att_target"), &[width, 1], Init::Glorot));
                    out.push(spec(format!("{p}.att_source"), &[width, 1], Init::Glorot));
                }
                let combined = if !last && c.concat_heads {
                    width * c.heads
                } else {
                    width
                };
                out.push(spec(format!("gat{l}.bias"), &[1, combined], Init::Zeros));
                din = combined;
            }
        }
    }
    out
}

struct Cursor<'a> {
    vars: &'a [Var],
    pos: usize,
}

impl Cursor<'_> {
    fn next(&mut self) -> Var {
        let v = self.vars[self.pos];
        self.pos += 1;
        v
    }
}

/// Per-forward side outputs useful for inspection.
#[derive(Default)]
struct Inspect {
    /// Attention coefficients per GAT layer and head, aligned with
    /// `GraphContext::attention_edges`.
    attention: Vec<Vec<Var>>,
}

/// A graph neural network: configuration plus its parameter tensors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GnnModel {
    config: ModelConfig,
    in_dim: usize,
    names: Vec<String>,
    params: Vec<Tensor>,
    #[serde(default)]
    vocab_hash: Option<String>,
}

impl GnnModel {
    /// Glorot-uniform weights and zero biases drawn from the config seed.
    pub fn new(config: ModelConfig, in_dim: usize) -> Result<Self> {
        config.validate()?;
        if in_dim == 0 {
            return Err(Error::config("input feature dimension is zero"));
        }
        let mut r = rng(derive_seed(config.seed, INIT_STREAM));
        let specs = layout(&config, in_dim);
        let mut names = Vec::with_capacity(specs.len());
        let mut params = Vec::with_capacity(specs.len());
        for s in specs {
            let n: usize = s.shape.iter().product();
            let values = match s.init {
                Init::Zeros => vec![0.0; n],
                Init::Const(v) => vec![v; n],
                Init::Glorot => {
                    let limit = (6.0 / (s.shape[0] + s.shape[1]) as f64).sqrt();
                    (0..n).map(|_| r.gen_range(-limit..limit)).collect()
                }
            };
            names.push(s.name);
            params.push(Tensor::new(s.shape, values)?);
        }
        Ok(GnnModel {
            config,
            in_dim,
            names,
            params,
            vocab_hash: None,
        })
    }

    /// Hash of the feature vocabulary the model was trained against.
    pub fn vocab_hash(&self) -> Option<&str> {
        self.vocab_hash.as_deref()
    }

    pub fn set_vocab_hash(&mut self, hash: impl Into<String>) {
        self.vocab_hash = Some(hash.into());
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn operator(&self) -> Operator {
        self.config.operator
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn param_names(&self) -> &[String] {
        &self.names
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    pub fn param(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.params[i])
    }

    /// Replaces one parameter; the shape must match.
    pub fn set_param(&mut self, name: &str, value: Tensor) -> Result<()> {
        let i = self
            .names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::usage(format!("no parameter named {name}")))?;
        if value.shape() != self.params[i].shape() {
            return Err(Error::dim(format!(
                "{name}: expected shape {:?}, got {:?}",
                self.params[i].shape(),
                value.shape()
            )));
        }
        self.params[i] = value;
        Ok(())
    }

    pub(crate) fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub(crate) fn set_params(&mut self, params: Vec<Tensor>) {
        debug_assert_eq!(params.len(), self.params.len());
        self.params = params;
    }

    /// Registers the parameters on `tape` as trainable leaves.
    pub fn register(&self, tape: &mut Tape) -> Vec<Var> {
        self.params.iter().map(|p| tape.param(p.clone())).collect()
    }

    /// Node logits `[n×classes]` for features `x` using parameter variables
    /// `params` (as returned by [`GnnModel::register`]).
    pub fn forward(
        &self,
        tape: &mut Tape,
        ctx: &GraphContext,
        x: &Tensor,
        params: &[Var],
        mode: Mode,
    ) -> Result<Var> {
        self.forward_inspect(tape, ctx, x, params, mode, &mut Inspect::default())
    }

    /// Evaluation-mode logits as a plain tensor.
    pub fn logits(&self, ctx: &GraphContext, x: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = self.params.iter().map(|p| tape.constant(p.clone())).collect();
        let out = self.forward(&mut tape, ctx, x, &vars, Mode::Eval)?;
        Ok(tape.take(out))
    }

    /// GAT attention coefficients in evaluation mode, indexed
    /// `[layer][head][edge]` with edges as in `ctx.attention_edges()`.
    pub fn attention(&self, ctx: &GraphContext, x: &Tensor) -> Result<Vec<Vec<Vec<f64>>>> {
        if self.operator() != Operator::Gat {
            return Err(Error::usage("attention coefficients exist only for GAT"));
        }
        let mut tape = Tape::new();
        let vars: Vec<Var> = self.params.iter().map(|p| tape.constant(p.clone())).collect();
        let mut inspect = Inspect::default();
        self.forward_inspect(&mut tape, ctx, x, &vars, Mode::Eval, &mut inspect)?;
        Ok(inspect
            .attention
            .iter()
            .map(|heads| heads.iter().map(|&v| tape.value(v).values().to_vec()).collect())
            .collect())
    }

    fn forward_inspect(
        &self,
        tape: &mut Tape,
        ctx: &GraphContext,
        x: &Tensor,
        params: &[Var],
        mode: Mode,
        inspect: &mut Inspect,
    ) -> Result<Var> {
        if params.len() != self.params.len() {
            return Err(Error::usage(format!(
                "expected {} parameter variables, got {}",
                self.params.len(),
                params.len()
            )));
        }
        if x.rows() != ctx.num_nodes() || x.cols() != self.in_dim {
            return Err(Error::dim(format!(
                "features {}x{} do not fit a {}-node graph with {} inputs",
                x.rows(),
                x.cols(),
                ctx.num_nodes(),
                self.in_dim
            )));
        }
        let c = &self.config;
        let mut cur = Cursor { vars: params, pos: 0 };
        let layers = c.num_layers;
        let mut f = Forward { tape, ctx, c, mode };

        let logits = match c.operator {
            Operator::Sgc => {
                let propagated = if std::ptr::eq(x, ctx.features()) {
                    ctx.propagated_features(c.order())?
                } else {
                    Arc::new(ctx.propagate(x, c.order())?)
                };
                let h = f.tape.constant((*propagated).clone());
                let h = f.dropout(h, 0)?;
                f.dense(h, &mut cur)?
            }
            Operator::Agnn => {
                let h = f.tape.constant(x.clone());
                let h = f.dropout(h, 0)?;
                let h = f.dense(h, &mut cur)?;
                let mut h = f.activate(h)?;
                for _ in 0..layers {
                    let beta = cur.next();
                    h = agnn_propagate(f.tape, ctx, h, beta)?;
                }
                let h = f.dropout(h, 1)?;
                f.dense(h, &mut cur)?
            }
            Operator::Gat => {
                let mut h = f.tape.constant(x.clone());
                for l in 0..layers {
                    let last = l + 1 == layers;
                    h = f.dropout(h, l)?;
                    let (out, att) = f.gat_layer(h, &mut cur, !last && c.concat_heads)?;
                    inspect.attention.push(att);
                    h = if last { out } else { f.activate(out)? };
                }
                h
            }
            _ => {
                let mut h = f.tape.constant(x.clone());
                for l in 0..layers {
                    h = f.dropout(h, l)?;
                    h = f.conv(h, &mut cur)?;
                    h = f.activate(h)?;
                }
                let h = f.dropout(h, layers)?;
                f.dense(h, &mut cur)?
            }
        };
        debug_assert_eq!(cur.pos, params.len());
        Ok(logits)
    }
}

struct Forward<'t, 'c> {
    tape: &'t mut Tape,
    ctx: &'c GraphContext,
    c: &'c ModelConfig,
    mode: Mode,
}

impl Forward<'_, '_> {
    fn dropout(&mut self, h: Var, layer: usize) -> Result<Var> {
        match self.mode {
            Mode::Eval => Ok(h),
            Mode::Train { seed } => {
                self.tape
                    .dropout(h, self.c.dropout, derive_seed(seed, layer as u64), true)
            }
        }
    }

    fn activate(&mut self, h: Var) -> Result<Var> {
        match self.c.activation {
            Activation::Relu => self.tape.relu(h),
            Activation::Elu => self.tape.elu(h, 1.0),
            Activation::LeakyRelu => self.tape.leaky_relu(h, 0.01),
            Activation::Tanh => self.tape.tanh(h),
            Activation::Sigmoid => self.tape.sigmoid(h),
            Activation::Identity => Ok(h),
        }
    }

    fn dense(&mut self, h: Var, cur: &mut Cursor<'_>) -> Result<Var> {
        let (w, b) = (cur.next(), cur.next());
        let z = self.tape.matmul(h, w)?;
        self.tape.add_row(z, b)
    }

    /// One propagation layer of the convolutional operators, before the
    /// activation.
    fn conv(&mut self, h: Var, cur: &mut Cursor<'_>) -> Result<Var> {
        let ctx = self.ctx;
        let tape = &mut *self.tape;
        let z = match self.c.operator {
            Operator::Gcn => {
                let w = cur.next();
                let hw = tape.matmul(h, w)?;
                tape.spmm(&ctx.norm_adj, hw)?
            }
            Operator::Sage => {
                let w = cur.next();
                let m = tape.spmm(&ctx.sage_mean, h)?;
                tape.matmul(m, w)?
            }
            Operator::Cheb => {
                let l = &ctx.laplacian.matrix;
                let mut prev2 = h;
                let mut acc = {
                    let w = cur.next();
                    tape.matmul(h, w)?
                };
                let mut prev1 = h;
                for t in 1..self.c.order() {
                    let next = if t == 1 {
                        tape.spmm(l, h)?
                    } else {
                        let lp = tape.spmm(l, prev1)?;
                        let twice = tape.scale(lp, 2.0)?;
                        tape.sub(twice, prev2)?
                    };
                    let w = cur.next();
                    let term = tape.matmul(next, w)?;
                    acc = tape.add(acc, term)?;
                    prev2 = prev1;
                    prev1 = next;
                }
                acc
            }
            Operator::Tagcn => {
                let mut hop = h;
                let w = cur.next();
                let mut acc = tape.matmul(h, w)?;
                for _ in 0..self.c.order() {
                    hop = tape.spmm(&ctx.norm_adj, hop)?;
                    let w = cur.next();
                    let term = tape.matmul(hop, w)?;
                    acc = tape.add(acc, term)?;
                }
                acc
            }
            Operator::Gin => {
                let agg_matrix = match self.c.gin_aggregation {
                    GinAggregation::Mean => &ctx.neighbor_mean,
                    GinAggregation::Sum => &ctx.neighbor_sum,
                };
                let agg = tape.spmm(agg_matrix, h)?;
                let own = if self.c.epsilon_learnable {
                    let eps = cur.next();
                    let scaled = tape.scale_by(h, eps)?;
                    tape.add(h, scaled)?
                } else {
                    h
                };
                let z = tape.add(own, agg)?;
                let z = self.dense(z, cur)?;
                let z = self.activate(z)?;
                return self.dense(z, cur);
            }
            Operator::Sgc | Operator::Agnn | Operator::Gat => {
                unreachable!("handled by the caller")
            }
        };
        let b = cur.next();
        self.tape.add_row(z, b)
    }

    /// Multi-head attention layer. Returns the combined output (with bias)
    /// and each head's attention coefficients.
    fn gat_layer(&mut self, h: Var, cur: &mut Cursor<'_>, concat: bool) -> Result<(Var, Vec<Var>)> {
        let edges = &self.ctx.attention_edges;
        let tape = &mut *self.tape;
        let mut outs = Vec::with_capacity(self.c.heads);
        let mut atts = Vec::with_capacity(self.c.heads);
        for _ in 0..self.c.heads {
            let (w, a_t, a_s) = (cur.next(), cur.next(), cur.next());
            let z = tape.matmul(h, w)?;
            let score_t = tape.matmul(z, a_t)?;
            let score_s = tape.matmul(z, a_s)?;
            let et = tape.gather_rows(score_t, &edges.target)?;
            let es = tape.gather_rows(score_s, &edges.source)?;
            let e = tape.add(et, es)?;
            let e = tape.leaky_relu(e, ATTENTION_SLOPE)?;
            let alpha = tape.segment_softmax(e, &edges.offsets)?;
            outs.push(tape.edge_aggregate(z, alpha, &edges.source, &edges.offsets)?);
            atts.push(alpha);
        }
        let combined = if concat {
            tape.concat_cols(&outs)?
        } else {
            let mut acc = outs[0];
            for &o in &outs[1..] {
                acc = tape.add(acc, o)?;
            }
            tape.scale(acc, 1.0 / self.c.heads as f64)?
        };
        let b = cur.next();
        Ok((tape.add_row(combined, b)?, atts))
    }
}

/// Cosine-attention propagation: node `i` receives `Σ_j P_ij h_j` over its
/// neighbors with `P_i·` the softmax of `β·cos(h_i, h_j)`. Nodes without
/// neighbors receive zero.
fn agnn_propagate(tape: &mut Tape, ctx: &GraphContext, h: Var, beta: Var) -> Result<Var> {
    let edges = &ctx.neighbor_edges;
    if edges.is_empty() {
        let zeros = Tensor::zeros(tape.value(h).shape());
        return Ok(tape.constant(zeros));
    }
    let weights = agnn_weights(tape, ctx, h, beta)?;
    tape.edge_aggregate(h, weights, &edges.source, &edges.offsets)
}

fn agnn_weights(tape: &mut Tape, ctx: &GraphContext, h: Var, beta: Var) -> Result<Var> {
    let edges = &ctx.neighbor_edges;
    let unit = tape.normalize_rows(h)?;
    let cos = tape.edge_dot(unit, unit, &edges.target, &edges.source)?;
    let scores = tape.scale_by(cos, beta)?;
    tape.segment_softmax(scores, &edges.offsets)
}

/// Cosine-attention propagation weights for embeddings `h`, one per entry
/// of `ctx.neighbor_edges()`.
pub fn agnn_propagation_weights(ctx: &GraphContext, h: &Tensor, beta: f64) -> Result<Vec<f64>> {
    if ctx.neighbor_edges.is_empty() {
        return Ok(Vec::new());
    }
    let mut tape = Tape::new();
    let hv = tape.constant(h.clone());
    let b = tape.constant(Tensor::scalar(beta)?);
    let w = agnn_weights(&mut tape, ctx, hv, b)?;
    Ok(tape.value(w).values().to_vec())
}

/// Graph-level readout: concatenation over layers of the column mean of each
/// layer's node states.
pub fn gin_readout(states: &[Tensor]) -> Result<Tensor> {
    if states.is_empty() {
        return Err(Error::usage("readout of zero layer states"));
    }
    let mut out = Vec::new();
    for s in states {
        let (m, n) = s.require_matrix("layer state")?;
        if m == 0 {
            return Err(Error::usage("readout of an empty layer state"));
        }
        let mut mean = vec![0.0; n];
        for r in 0..m {
            mean.iter_mut().zip(s.row(r)).for_each(|(o, v)| *o += v);
        }
        out.extend(mean.into_iter().map(|v| v / m as f64));
    }
    Tensor::vector(out)
}
