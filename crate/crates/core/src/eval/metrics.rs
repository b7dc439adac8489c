use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square count matrix, rows = true class, columns = predicted class.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

/// One-vs-rest counts for a single class.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClassCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth][pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes()).map(|c| self.counts[c][c]).sum()
    }

    pub fn class_counts(&self, c: usize) -> ClassCounts {
        let tp = self.counts[c][c];
        let row: u64 = self.counts[c].iter().sum();
        let col: u64 = self.counts.iter().map(|r| r[c]).sum();
        let fp = col - tp;
        let fn_ = row - tp;
        ClassCounts {
            tp,
            fp,
            fn_,
            tn: self.total() - tp - fp - fn_,
        }
    }
}

pub fn confusion(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::usage(format!(
            "{} true labels vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    let mut counts = vec![vec![0u64; n_classes]; n_classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t >= n_classes || p >= n_classes {
            return Err(Error::data(format!(
                "label pair ({t},{p}) outside [0,{n_classes})"
            )));
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    #[default]
    Macro,
    Micro,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class_precision: Vec<f64>,
    pub per_class_recall: Vec<f64>,
    pub per_class_f1: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_class_auc: Option<Vec<Option<f64>>>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Accuracy, precision `TP/(TP+FP)`, recall `TP/(TP+FN)` and F1, with any
/// zero-denominator ratio defined as 0.
pub fn metrics(cm: &ConfusionMatrix, averaging: Averaging) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::usage("metrics of an empty confusion matrix"));
    }
    let k = cm.n_classes();
    let per: Vec<ClassCounts> = (0..k).map(|c| cm.class_counts(c)).collect();
    let per_class_precision: Vec<f64> = per.iter().map(|c| ratio(c.tp, c.tp + c.fp)).collect();
    let per_class_recall: Vec<f64> = per.iter().map(|c| ratio(c.tp, c.tp + c.fn_)).collect();
    let per_class_f1: Vec<f64> = per_class_precision
        .iter()
        .zip(&per_class_recall)
        .map(|(&p, &r)| f1(p, r))
        .collect();
    let accuracy = ratio(cm.trace(), total);
    let (precision, recall, f1_avg) = match averaging {
        Averaging::Macro => {
            let mean = |v: &[f64]| v.iter().sum::<f64>() / k as f64;
            (
                mean(&per_class_precision),
                mean(&per_class_recall),
                mean(&per_class_f1),
            )
        }
        Averaging::Micro => {
            let tp: u64 = per.iter().map(|c| c.tp).sum();
            let fp: u64 = per.iter().map(|c| c.fp).sum();
            let fn_: u64 = per.iter().map(|c| c.fn_).sum();
            let p = ratio(tp, tp + fp);
            let r = ratio(tp, tp + fn_);
            (p, r, f1(p, r))
        }
    };
    Ok(MetricsReport {
        accuracy,
        precision,
        recall,
        f1: f1_avg,
        per_class_precision,
        per_class_recall,
        per_class_f1,
        per_class_auc: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_when_equal() {
        let y = [0, 1, 2, 6, 6];
        let cm = confusion(&y, &y, 7).unwrap();
        assert_eq!(cm.trace(), 5);
        assert_eq!(cm.get(6, 6), 2);
        let m = metrics(&cm, Averaging::Macro).unwrap();
        assert_eq!(m.accuracy, 1.0);
        // classes 3,4,5 never appear: their P/R/F1 are 0 by convention
        assert_eq!(m.per_class_f1[3], 0.0);
    }

    #[test]
    fn single_off_diagonal_pair() {
        let cm = confusion(&[0], &[1], 7).unwrap();
        assert_eq!(cm.get(0, 1), 1);
        assert_eq!(cm.total(), 1);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(confusion(&[0, 1], &[0], 7), Err(Error::Usage(_))));
    }

    #[test]
    fn perfect_two_class_report() {
        let y = [0, 1, 1, 0];
        let m = metrics(&confusion(&y, &y, 2).unwrap(), Averaging::Macro).unwrap();
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn binary_hand_computation() {
        // class 0 positive: TP=3, FN=2, FP=1, TN=4
        let y_true = [0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        let y_pred = [0, 0, 0, 1, 1, 0, 1, 1, 1, 1];
        let cm = confusion(&y_true, &y_pred, 2).unwrap();
        assert_eq!(
            cm.class_counts(0),
            ClassCounts {
                tp: 3,
                fp: 1,
                fn_: 2,
                tn: 4
            }
        );
        let m = metrics(&cm, Averaging::Macro).unwrap();
        assert_eq!(m.accuracy, 0.7);
        assert_eq!(m.per_class_precision[0], 0.75);
        assert_eq!(m.per_class_recall[0], 0.6);
        assert!((m.per_class_f1[0] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn micro_equals_accuracy() {
        let cm = confusion(&[0, 1, 2, 2], &[0, 2, 2, 1], 3).unwrap();
        let m = metrics(&cm, Averaging::Micro).unwrap();
        assert_eq!(m.precision, m.accuracy);
        assert_eq!(m.recall, m.accuracy);
    }

    #[test]
    fn empty_matrix_is_usage_error() {
        let cm = confusion(&[], &[], 7).unwrap();
        assert!(matches!(metrics(&cm, Averaging::Macro), Err(Error::Usage(_))));
    }
}
