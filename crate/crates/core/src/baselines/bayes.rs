use serde::{Deserialize, Serialize};

use super::binary::{argmax, check_labels, BinaryMatrix};
use super::tree::check_width;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Bernoulli naive Bayes with add-one smoothing:
/// `P(f=1 | c) = (count + 1) / (n_c + 2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayes {
    pub class_counts: Vec<usize>,
    /// `feature_counts[c][f]` samples of class `c` with feature `f` on.
    pub feature_counts: Vec<Vec<usize>>,
}

impl NaiveBayes {
    pub fn fit(x: &Tensor, y: &[usize], n_classes: usize) -> Result<Self> {
        let bx = BinaryMatrix::from_tensor(x)?;
        if bx.rows() == 0 {
            return Err(Error::usage("cannot fit naive Bayes on zero samples"));
        }
        check_labels(y, bx.rows(), n_classes)?;
        let f = bx.n_features();
        let mut class_counts = vec![0; n_classes];
        let mut feature_counts = vec![vec![0; f]; n_classes];
        for (r, &c) in y.iter().enumerate() {
            class_counts[c] += 1;
            for (j, fc) in feature_counts[c].iter_mut().enumerate() {
                if bx.get(r, j) {
                    *fc += 1;
                }
            }
        }
        Ok(NaiveBayes {
            class_counts,
            feature_counts,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.class_counts.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_counts.first().map_or(0, Vec::len)
    }

    /// `ln P(c)`; `-inf` for classes absent from training.
    pub fn log_prior(&self, c: usize) -> f64 {
        let m: usize = self.class_counts.iter().sum();
        (self.class_counts[c] as f64 / m as f64).ln()
    }

    /// Smoothed `P(f=1 | c)`.
    pub fn feature_probability(&self, c: usize, f: usize) -> f64 {
        (self.feature_counts[c][f] as f64 + 1.0) / (self.class_counts[c] as f64 + 2.0)
    }

    /// Unnormalized log posterior per class for each row. Absent classes
    /// get `-inf` and are never predicted.
    pub fn joint_log_likelihood(&self, x: &Tensor) -> Result<Vec<Vec<f64>>> {
        check_width(x, self.n_features())?;
        let k = self.n_classes();
        let tables: Vec<(f64, Vec<f64>, Vec<f64>)> = (0..k)
            .map(|c| {
                let on: Vec<f64> = (0..self.n_features())
                    .map(|f| self.feature_probability(c, f).ln())
                    .collect();
                let off: Vec<f64> = (0..self.n_features())
                    .map(|f| (1.0 - self.feature_probability(c, f)).ln())
                    .collect();
                (self.log_prior(c), on, off)
            })
            .collect();
        Ok((0..x.rows())
            .map(|r| {
                let row = x.row(r);
                tables
                    .iter()
                    .map(|(prior, on, off)| {
                        if prior.is_infinite() {
                            return f64::NEG_INFINITY;
                        }
                        prior
                            + row
                                .iter()
                                .enumerate()
                                .map(|(f, &v)| if v == 1.0 { on[f] } else { off[f] })
                                .sum::<f64>()
                    })
                    .collect()
            })
            .collect())
    }

    pub fn predict_proba(&self, x: &Tensor) -> Result<Tensor> {
        let jll = self.joint_log_likelihood(x)?;
        let k = self.n_classes();
        let mut out = Vec::with_capacity(jll.len() * k);
        for row in &jll {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = row.iter().map(|&v| (v - max).exp()).collect();
            let z: f64 = exps.iter().sum();
            out.extend(exps.into_iter().map(|e| e / z));
        }
        Tensor::new(vec![jll.len(), k], out)
    }

    /// Maximum a posteriori class; ties go to the lowest class index.
    pub fn predict(&self, x: &Tensor) -> Result<Vec<usize>> {
        Ok(self
            .joint_log_likelihood(x)?
            .iter()
            .map(|row| argmax(row))
            .collect())
    }
}
