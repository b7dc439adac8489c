use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{softmax_rows, AdamState, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::gnn::EpochRecord;
use crate::util::{derive_seed, rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpConfig {
    pub hidden_dim: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub patience: usize,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden_dim: 64,
            lr: 0.01,
            weight_decay: 5e-4,
            epochs: 200,
            patience: 30,
            dropout: 0.0,
            seed: 0,
        }
    }
}

/// One hidden ReLU layer: `relu(x W1 + b1) W2 + b2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub config: MlpConfig,
    pub n_classes: usize,
    /// `[W1, b1, W2, b2]`.
    pub params: Vec<Tensor>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<EpochRecord>,
}

impl Mlp {
    pub fn new(config: MlpConfig, in_dim: usize, n_classes: usize) -> Result<Self> {
        if config.hidden_dim == 0 || in_dim == 0 || n_classes < 2 {
            return Err(Error::config("MLP needs positive widths and at least two classes"));
        }
        if !(config.lr > 0.0 && config.lr.is_finite()) {
            return Err(Error::config("MLP lr must be positive"));
        }
        if !(0.0..1.0).contains(&config.dropout) {
            return Err(Error::config("MLP dropout must lie in [0,1)"));
        }
        let mut r = rng(derive_seed(config.seed, 0x1417));
        let mut glorot = |a: usize, b: usize| {
            let limit = (6.0 / (a + b) as f64).sqrt();
            let v = (0..a * b).map(|_| r.gen_range(-limit..limit)).collect();
            Tensor::new(vec![a, b], v)
        };
        let h = config.hidden_dim;
        let params = vec![
            glorot(in_dim, h)?,
            Tensor::zeros(&[1, h]),
            glorot(h, n_classes)?,
            Tensor::zeros(&[1, n_classes]),
        ];
        Ok(Mlp {
            config,
            n_classes,
            params,
            trace: Vec::new(),
        })
    }

    pub fn in_dim(&self) -> usize {
        self.params[0].rows()
    }

    /// Logits for `x` given parameter variables in `[W1, b1, W2, b2]` order.
    pub fn forward(&self, tape: &mut Tape, x: &Tensor, params: &[Var], dropout_seed: Option<u64>) -> Result<Var> {
        if params.len() != 4 {
            return Err(Error::usage("MLP expects four parameter variables"));
        }
        let xv = tape.constant(x.clone());
        let z = tape.matmul(xv, params[0])?;
        let z = tape.add_row(z, params[1])?;
        let h = tape.relu(z)?;
        let h = match dropout_seed {
            Some(seed) => tape.dropout(h, self.config.dropout, seed, true)?,
            None => h,
        };
        let o = tape.matmul(h, params[2])?;
        tape.add_row(o, params[3])
    }

    pub fn logits(&self, x: &Tensor) -> Result<Tensor> {
        let (_, f) = x.require_matrix("MLP input")?;
        if f != self.in_dim() {
            return Err(Error::dim(format!("MLP expects {} features, got {f}", self.in_dim())));
        }
        let mut tape = Tape::new();
        let vars: Vec<Var> = self.params.iter().map(|p| tape.constant(p.clone())).collect();
        let out = self.forward(&mut tape, x, &vars, None)?;
        Ok(tape.take(out))
    }

    /// Adam on the training cross-entropy, keeping the parameters with the
    /// lowest validation loss.
    pub fn fit(
        x_train: &Tensor,
        y_train: &[usize],
        x_val: &Tensor,
        y_val: &[usize],
        n_classes: usize,
        config: &MlpConfig,
    ) -> Result<Self> {
        if y_train.is_empty() || y_val.is_empty() {
            return Err(Error::config("MLP needs non-empty train and validation sets"));
        }
        if x_train.rows() != y_train.len() || x_val.rows() != y_val.len() {
            return Err(Error::dim("MLP feature rows and labels differ in length"));
        }
        let mut model = Mlp::new(config.clone(), x_train.cols(), n_classes)?;
        let mut adam = AdamState::new(&model.params, config.lr, config.weight_decay);
        let mut best: Option<(f64, usize, Vec<Tensor>)> = None;
        let mut trace = Vec::new();
        for epoch in 0..config.epochs {
            let mut tape = Tape::new();
            let vars: Vec<Var> = model.params.iter().map(|p| tape.param(p.clone())).collect();
            let seed = (config.dropout > 0.0).then(|| derive_seed(config.seed, epoch as u64 + 1));
            let logits = model.forward(&mut tape, x_train, &vars, seed)?;
            let loss = tape.cross_entropy(logits, y_train)?;
            tape.backward(loss)?;
            let train_loss = tape.value(loss).values()[0];
            let train_accuracy = accuracy(tape.value(logits), y_train);
            let val_logits = model.logits(x_val)?;
            let val_loss = cross_entropy(&val_logits, y_val)?;
            if !(train_loss.is_finite() && val_loss.is_finite()) {
                return Err(Error::Numeric(format!("MLP diverged at epoch {epoch}")));
            }
            trace.push(EpochRecord {
                epoch,
                train_loss,
                train_accuracy,
                val_loss,
                val_accuracy: accuracy(&val_logits, y_val),
            });
            if best.as_ref().map_or(true, |b| val_loss < b.0) {
                best = Some((val_loss, epoch, model.params.clone()));
            }
            let grads: Vec<Vec<f64>> = vars
                .iter()
                .zip(&model.params)
                .map(|(&v, p)| tape.grad(v).map_or_else(|| vec![0.0; p.len()], <[f64]>::to_vec))
                .collect();
            adam.step(&mut model.params, &grads)?;
            if let Some((_, e, _)) = &best {
                if epoch - e >= config.patience {
                    break;
                }
            }
        }
        if let Some((_, _, params)) = best {
            model.params = params;
        }
        model.trace = trace;
        Ok(model)
    }

    pub fn predict_proba(&self, x: &Tensor) -> Result<Tensor> {
        softmax_rows(&self.logits(x)?)
    }

    pub fn predict(&self, x: &Tensor) -> Result<Vec<usize>> {
        Ok(self.logits(x)?.argmax_rows())
    }
}

fn accuracy(logits: &Tensor, y: &[usize]) -> f64 {
    let pred = logits.argmax_rows();
    pred.iter().zip(y).filter(|(p, t)| p == t).count() as f64 / y.len() as f64
}

fn cross_entropy(logits: &Tensor, y: &[usize]) -> Result<f64> {
    let p = softmax_rows(logits)?;
    Ok(y.iter()
        .enumerate()
        .map(|(r, &c)| -p.get(r, c).max(f64::MIN_POSITIVE).ln())
        .sum::<f64>()
        / y.len() as f64)
}
