use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::binary::{check_labels, BinaryMatrix};
use super::tree::check_width;
use crate::autodiff::{softmax_rows, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostConfig {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        BoostConfig {
            n_rounds: 100,
            max_depth: 3,
            learning_rate: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressionNode {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        left: Box<RegressionNode>,
        right: Box<RegressionNode>,
    },
}

impl RegressionNode {
    fn eval(&self, row: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                RegressionNode::Leaf { value } => return *value,
                RegressionNode::Split {
                    feature,
                    left,
                    right,
                } => node = if row[*feature] == 1.0 { right } else { left },
            }
        }
    }
}

/// Multiclass gradient boosting on the softmax cross-entropy: one
/// regression tree per class per round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientBoosting {
    /// Initial scores: centered log class priors.
    pub initial: Vec<f64>,
    /// `rounds[r][c]` is the tree for class `c` in round `r`.
    pub rounds: Vec<Vec<RegressionNode>>,
    pub learning_rate: f64,
    pub n_classes: usize,
    pub n_features: usize,
    /// Training log-loss before the first round and after each round.
    pub train_log_loss: Vec<f64>,
}

/// Floor on a prior so that an absent class keeps a finite score.
const PRIOR_FLOOR: f64 = 1e-12;
const MIN_GAIN: f64 = 1e-12;

struct RegBuilder<'a> {
    x: &'a BinaryMatrix,
    residual: &'a [f64],
    max_depth: usize,
    n_classes: usize,
}

impl RegBuilder<'_> {
    /// One Newton step for the softmax loss, using `|r|(1-|r|)` as the
    /// Hessian proxy.
    fn leaf_value(&self, idx: &[usize]) -> f64 {
        let num: f64 = idx.iter().map(|&i| self.residual[i]).sum();
        let den: f64 = idx
            .iter()
            .map(|&i| {
                let a = self.residual[i].abs();
                a * (1.0 - a)
            })
            .sum();
        if den < 1e-12 {
            return 0.0;
        }
        let k = self.n_classes as f64;
        (k - 1.0) / k * num / den
    }

    fn build(&self, idx: &[usize], depth: usize) -> RegressionNode {
        if depth >= self.max_depth || idx.len() < 2 {
            return RegressionNode::Leaf {
                value: self.leaf_value(idx),
            };
        }
        let total: f64 = idx.iter().map(|&i| self.residual[i]).sum();
        let n = idx.len();
        let base = total * total / n as f64;
        let mut best: Option<(usize, f64)> = None;
        for f in 0..self.x.n_features() {
            let col = self.x.column(f);
            let (mut s_on, mut n_on) = (0.0, 0usize);
            for &i in idx {
                if col[i] {
                    s_on += self.residual[i];
                    n_on += 1;
                }
            }
            if n_on == 0 || n_on == n {
                continue;
            }
            let s_off = total - s_on;
            let gain = s_on * s_on / n_on as f64 + s_off * s_off / (n - n_on) as f64 - base;
            if gain > MIN_GAIN && best.map_or(true, |(_, g)| gain > g + MIN_GAIN) {
                best = Some((f, gain));
            }
        }
        let Some((feature, _)) = best else {
            return RegressionNode::Leaf {
                value: self.leaf_value(idx),
            };
        };
        let (r, l): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x.get(i, feature));
        RegressionNode::Split {
            feature,
            left: Box::new(self.build(&l, depth + 1)),
            right: Box::new(self.build(&r, depth + 1)),
        }
    }
}

fn log_loss(probs: &Tensor, y: &[usize]) -> f64 {
    y.iter()
        .enumerate()
        .map(|(r, &c)| -probs.get(r, c).max(f64::MIN_POSITIVE).ln())
        .sum::<f64>()
        / y.len() as f64
}

/// Residuals `onehot − softmax(scores)` for class `c`.
pub fn softmax_residuals(scores: &Tensor, y: &[usize], c: usize) -> Result<Vec<f64>> {
    let p = softmax_rows(scores)?;
    Ok(y.iter()
        .enumerate()
        .map(|(r, &label)| f64::from(u8::from(label == c)) - p.get(r, c))
        .collect())
}

impl GradientBoosting {
    pub fn fit(x: &Tensor, y: &[usize], n_classes: usize, config: &BoostConfig) -> Result<Self> {
        if !(config.learning_rate > 0.0 && config.learning_rate.is_finite()) {
            return Err(Error::config("boosting learning rate must be positive"));
        }
        let bx = BinaryMatrix::from_tensor(x)?;
        let m = bx.rows();
        if m == 0 {
            return Err(Error::usage("cannot fit boosting on zero samples"));
        }
        check_labels(y, m, n_classes)?;
        let mut counts = vec![0usize; n_classes];
        y.iter().for_each(|&c| counts[c] += 1);
        if counts.iter().filter(|&&c| c > 0).count() < 2 {
            return Err(Error::config("gradient boosting needs at least two classes"));
        }
        let logs: Vec<f64> = counts
            .iter()
            .map(|&c| (c as f64 / m as f64).max(PRIOR_FLOOR).ln())
            .collect();
        let mean = logs.iter().sum::<f64>() / n_classes as f64;
        let initial: Vec<f64> = logs.iter().map(|l| l - mean).collect();

        let mut scores: Vec<f64> = (0..m).flat_map(|_| initial.iter().copied()).collect();
        let idx: Vec<usize> = (0..m).collect();
        let mut rounds = Vec::with_capacity(config.n_rounds);
        let mut losses = Vec::with_capacity(config.n_rounds + 1);
        for _ in 0..config.n_rounds {
            let s = Tensor::new(vec![m, n_classes], scores.clone())?;
            losses.push(log_loss(&softmax_rows(&s)?, y));
            let trees: Vec<RegressionNode> = (0..n_classes)
                .into_par_iter()
                .map(|c| {
                    let residual = softmax_residuals(&s, y, c)?;
                    let b = RegBuilder {
                        x: &bx,
                        residual: &residual,
                        max_depth: config.max_depth,
                        n_classes,
                    };
                    Ok(b.build(&idx, 0))
                })
                .collect::<Result<_>>()?;
            for r in 0..m {
                let row = x.row(r);
                for (c, t) in trees.iter().enumerate() {
                    scores[r * n_classes + c] += config.learning_rate * t.eval(row);
                }
            }
            rounds.push(trees);
        }
        let s = Tensor::new(vec![m, n_classes], scores)?;
        losses.push(log_loss(&softmax_rows(&s)?, y));
        Ok(GradientBoosting {
            initial,
            rounds,
            learning_rate: config.learning_rate,
            n_classes,
            n_features: bx.n_features(),
            train_log_loss: losses,
        })
    }

    pub fn decision_function(&self, x: &Tensor) -> Result<Tensor> {
        check_width(x, self.n_features)?;
        let k = self.n_classes;
        let mut out = Vec::with_capacity(x.rows() * k);
        for r in 0..x.rows() {
            let row = x.row(r);
            let mut s = self.initial.clone();
            for trees in &self.rounds {
                for (c, t) in trees.iter().enumerate() {
                    s[c] += self.learning_rate * t.eval(row);
                }
            }
            out.extend(s);
        }
        Tensor::new(vec![x.rows(), k], out)
    }

    pub fn predict_proba(&self, x: &Tensor) -> Result<Tensor> {
        softmax_rows(&self.decision_function(x)?)
    }

    pub fn predict(&self, x: &Tensor) -> Result<Vec<usize>> {
        Ok(self.decision_function(x)?.argmax_rows())
    }
}
