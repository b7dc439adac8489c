use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Column-major 0/1 matrix for split scans.
#[derive(Clone, Debug)]
pub(crate) struct BinaryMatrix {
    rows: usize,
    cols: Vec<Vec<bool>>,
}

impl BinaryMatrix {
    pub(crate) fn from_tensor(x: &Tensor) -> Result<Self> {
        let (m, f) = x.require_matrix("feature matrix")?;
        let mut cols = vec![Vec::with_capacity(m); f];
        for r in 0..m {
            for (c, &v) in x.row(r).iter().enumerate() {
                let bit = if v == 1.0 {
                    true
                } else if v == 0.0 {
                    false
                } else {
                    return Err(Error::data(format!("non-binary feature value {v} at ({r},{c})")));
                };
                cols[c].push(bit);
            }
        }
        Ok(BinaryMatrix { rows: m, cols })
    }

    pub(crate) fn rows(&self) -> usize {
        self.rows
    }

    pub(crate) fn n_features(&self) -> usize {
        self.cols.len()
    }

    pub(crate) fn get(&self, r: usize, f: usize) -> bool {
        self.cols[f][r]
    }

    pub(crate) fn column(&self, f: usize) -> &[bool] {
        &self.cols[f]
    }
}

pub(crate) fn check_labels(y: &[usize], m: usize, n_classes: usize) -> Result<()> {
    if y.len() != m {
        return Err(Error::dim(format!("{m} samples but {} labels", y.len())));
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
        return Err(Error::data(format!("label {bad} outside [0,{n_classes})")));
    }
    Ok(())
}

/// Index of the largest entry; ties go to the lowest index.
pub(crate) fn argmax<T: PartialOrd + Copy>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}
