use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::context::GraphContext;
use super::model::{GnnModel, Mode};
use crate::autodiff::{softmax_rows, AdamState, Tape, Tensor};
use crate::error::{Error, Result};
use crate::util::derive_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub model: GnnModel,
    pub trace: Vec<EpochRecord>,
    /// Epoch whose parameters were kept, if any epoch ran.
    pub best_epoch: Option<usize>,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub nodes: Vec<usize>,
    /// Class probabilities, one row per entry of `nodes`.
    pub probabilities: Tensor,
    pub classes: Vec<usize>,
}

fn labels_for(ctx: &GraphContext, nodes: &[usize], what: &str) -> Result<Vec<usize>> {
    if nodes.is_empty() {
        return Err(Error::config(format!("{what} mask has no labeled nodes")));
    }
    nodes
        .iter()
        .map(|&i| {
            ctx.labels
                .get(i)
                .copied()
                .flatten()
                .ok_or_else(|| Error::data(format!("{what} node {i} has no label")))
        })
        .collect()
}

/// Mean cross-entropy and accuracy of `logits` restricted to `nodes`.
fn score(logits: &Tensor, nodes: &[usize], labels: &[usize]) -> Result<(f64, f64)> {
    let sub = logits.select_rows(nodes)?;
    let probs = softmax_rows(&sub)?;
    let mut loss = 0.0;
    let mut correct = 0usize;
    let pred = sub.argmax_rows();
    for (r, &y) in labels.iter().enumerate() {
        loss -= probs.get(r, y).max(f64::MIN_POSITIVE).ln();
        correct += usize::from(pred[r] == y);
    }
    let n = labels.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Full-batch Adam on the cross-entropy of the `train` nodes with early
/// stopping on the `val` loss. The returned model carries the parameters of
/// the epoch with the lowest validation loss.
pub fn train_model(
    ctx: &GraphContext,
    mut model: GnnModel,
    train: &[usize],
    val: &[usize],
) -> Result<TrainedModel> {
    let started = Instant::now();
    let config = model.config().clone();
    config.validate()?;
    let y_train = labels_for(ctx, train, "train")?;
    let y_val = labels_for(ctx, val, "validation")?;
    let train_idx = Arc::new(train.to_vec());
    let x = ctx.features();
    if !ctx.vocab_hash().is_empty() {
        model.set_vocab_hash(ctx.vocab_hash());
    }

    let mut adam = AdamState::new(model.params(), config.lr, config.weight_decay);
    let mut trace = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, Vec<Tensor>)> = None;
    for epoch in 0..config.epochs {
        let mut tape = Tape::new();
        let vars = model.register(&mut tape);
        let mode = if config.dropout > 0.0 {
            Mode::Train {
                seed: derive_seed(config.seed, epoch as u64 + 1),
            }
        } else {
            Mode::Eval
        };
        let logits = model.forward(&mut tape, ctx, x, &vars, mode)?;
        let train_logits = tape.gather_rows(logits, &train_idx)?;
        let loss = tape.cross_entropy(train_logits, &y_train)?;
        tape.backward(loss)?;

        let train_loss = tape.value(loss).values()[0];
        let train_accuracy = {
            let pred = tape.value(train_logits).argmax_rows();
            pred.iter().zip(&y_train).filter(|(p, y)| p == y).count() as f64 / y_train.len() as f64
        };
        let (val_loss, val_accuracy) = if config.dropout > 0.0 {
            score(&model.logits(ctx, x)?, val, &y_val)?
        } else {
            score(tape.value(logits), val, &y_val)?
        };
        if !(train_loss.is_finite() && val_loss.is_finite()) {
            return Err(Error::Numeric(format!(
                "{} diverged at epoch {epoch}",
                config.operator.key()
            )));
        }
        trace.push(EpochRecord {
            epoch,
            train_loss,
            train_accuracy,
            val_loss,
            val_accuracy,
        });
        if best.as_ref().map_or(true, |b| val_loss < b.0) {
            best = Some((val_loss, epoch, model.params().to_vec()));
        }

        let grads: Vec<Vec<f64>> = vars
            .iter()
            .zip(model.params())
            .map(|(&v, p)| tape.grad(v).map_or_else(|| vec![0.0; p.len()], <[f64]>::to_vec))
            .collect();
        adam.step(model.params_mut(), &grads)?;

        if let Some((_, best_epoch, _)) = &best {
            if epoch - best_epoch >= config.patience {
                break;
            }
        }
    }
    let best_epoch = best.map(|(_, e, params)| {
        model.set_params(params);
        e
    });
    Ok(TrainedModel {
        model,
        trace,
        best_epoch,
        seconds: started.elapsed().as_secs_f64(),
    })
}

/// Class probabilities and argmax classes for `nodes`. Ties go to the lowest
/// class index.
pub fn predict(model: &GnnModel, ctx: &GraphContext, nodes: &[usize]) -> Result<Prediction> {
    if !model_vocab_matches(model, ctx) {
        return Err(Error::data("model was trained on a different feature vocabulary"));
    }
    let logits = model.logits(ctx, ctx.features())?;
    let sub = logits.select_rows(nodes)?;
    let probabilities = softmax_rows(&sub)?;
    let classes = sub.argmax_rows();
    Ok(Prediction {
        nodes: nodes.to_vec(),
        probabilities,
        classes,
    })
}

fn model_vocab_matches(model: &GnnModel, ctx: &GraphContext) -> bool {
    model.in_dim() == ctx.num_features()
        && model
            .vocab_hash()
            .map_or(true, |h| h == ctx.vocab_hash())
}
