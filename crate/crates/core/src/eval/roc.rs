use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `(fpr, tpr)` from `(0,0)` to `(1,1)`.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// One-vs-rest ROC for class `class` from probability columns `scores`.
/// Returns `Ok(None)` when the class has no positives or no negatives, since
/// the curve is undefined there.
pub fn roc_curve(scores: &Tensor, y_true: &[usize], class: usize) -> Result<Option<RocCurve>> {
    let (m, c) = scores.require_matrix("roc scores")?;
    if m != y_true.len() {
        return Err(Error::usage(format!("{m} score rows vs {} labels", y_true.len())));
    }
    if class >= c {
        return Err(Error::usage(format!("class {class} outside {c} score columns")));
    }
    for r in 0..m {
        let s: f64 = scores.row(r).iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::usage(format!("score row {r} sums to {s}, not 1")));
        }
    }
    let mut pairs: Vec<(f64, bool)> = (0..m)
        .map(|r| (scores.get(r, class), y_true[r] == class))
        .collect();
    let pos = pairs.iter().filter(|p| p.1).count();
    let neg = m - pos;
    if pos == 0 || neg == 0 {
        return Ok(None);
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < pairs.len() {
        // Samples sharing a score cross the threshold together.
        let threshold = pairs[i].0;
        while i < pairs.len() && pairs[i].0 == threshold {
            if pairs[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    let auc = trapezoid(&points);
    Ok(Some(RocCurve { points, auc }))
}

pub fn trapezoid(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary_scores(p1: &[f64]) -> Tensor {
        Tensor::from_rows(&p1.iter().map(|&p| vec![1.0 - p, p]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn perfect_separation() {
        let s = binary_scores(&[0.9, 0.8, 0.2, 0.1]);
        let roc = roc_curve(&s, &[1, 1, 0, 0], 1).unwrap().unwrap();
        assert_eq!(roc.auc, 1.0);
        assert_eq!(roc.points.first(), Some(&(0.0, 0.0)));
        assert_eq!(roc.points.last(), Some(&(1.0, 1.0)));
    }

    #[test]
    fn constant_scores_give_half() {
        let s = binary_scores(&[0.5; 6]);
        let roc = roc_curve(&s, &[1, 0, 1, 0, 0, 1], 1).unwrap().unwrap();
        assert_eq!(roc.auc, 0.5);
    }

    #[test]
    fn absent_class_is_none() {
        let s = binary_scores(&[0.3, 0.6]);
        assert!(roc_curve(&s, &[0, 0], 1).unwrap().is_none());
    }

    #[test]
    fn rows_must_sum_to_one() {
        let s = Tensor::from_rows(&[vec![0.5, 0.6]]).unwrap();
        assert!(roc_curve(&s, &[0], 0).is_err());
    }
}
