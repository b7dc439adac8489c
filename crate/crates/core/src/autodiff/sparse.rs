use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Compressed-sparse-row matrix of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    offsets: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Validates raw CSR arrays.
    pub fn new(
        rows: usize,
        cols: usize,
        offsets: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::dim("sparse matrix dimensions must be positive"));
        }
        if offsets.len() != rows + 1 || offsets[0] != 0 {
            return Err(Error::dim("offsets must have rows+1 entries starting at 0"));
        }
        if offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::dim("offsets must be nondecreasing"));
        }
        if *offsets.last().unwrap() != indices.len() || indices.len() != values.len() {
            return Err(Error::dim("last offset must equal the number of nonzeros"));
        }
        for r in 0..rows {
            let cols_in_row = &indices[offsets[r]..offsets[r + 1]];
            if cols_in_row.iter().any(|&c| c >= cols) {
                return Err(Error::dim(format!("row {r}: column index out of range")));
            }
            if cols_in_row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::dim(format!(
                    "row {r}: column indices must be strictly increasing"
                )));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite sparse value".into()));
        }
        Ok(SparseMatrix {
            rows,
            cols,
            offsets,
            indices,
            values,
        })
    }

    /// Builds from unordered `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut per_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); rows];
        for &(r, c, v) in triplets {
            if r >= rows || c >= cols {
                return Err(Error::dim(format!("triplet ({r},{c}) outside {rows}x{cols}")));
            }
            per_row[r].push((c, v));
        }
        let mut offsets = Vec::with_capacity(rows + 1);
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        offsets.push(0);
        for mut entries in per_row {
            entries.sort_by_key(|e| e.0);
            for (c, v) in entries {
                if indices.len() > *offsets.last().unwrap() && *indices.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    values.push(v);
                }
            }
            offsets.push(indices.len());
        }
        SparseMatrix::new(rows, cols, offsets, indices, values)
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            rows: n,
            cols: n,
            offsets: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Matrix with no stored entries.
    pub fn empty(rows: usize, cols: usize) -> Self {
        SparseMatrix {
            rows,
            cols,
            offsets: vec![0; rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn from_dense(t: &Tensor) -> Result<Self> {
        let (m, n) = t.require_matrix("from_dense")?;
        let mut triplets = Vec::new();
        for r in 0..m {
            for c in 0..n {
                let v = t.get(r, c);
                if v != 0.0 {
                    triplets.push((r, c, v));
                }
            }
        }
        SparseMatrix::from_triplets(m, n, &triplets)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `(col, value)` pairs of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.offsets[r]..self.offsets[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.offsets[r]..self.offsets[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Tensor {
        let mut t = Tensor::zeros(&[self.rows, self.cols]);
        let cols = self.cols;
        let vals = t.values_mut();
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                vals[r * cols + c] = v;
            }
        }
        t
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for i in 0..self.cols {
            counts[i + 1] += counts[i];
        }
        let offsets = counts.clone();
        let mut next = counts;
        let mut indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                let pos = next[c];
                indices[pos] = r;
                values[pos] = v;
                next[c] += 1;
            }
        }
        SparseMatrix {
            rows: self.cols,
            cols: self.rows,
            offsets,
            indices,
            values,
        }
    }

    /// Whether `self == selfᵀ` entrywise within `tol`.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        (0..self.rows).all(|r| self.row(r).all(|(c, v)| (self.get(c, r) - v).abs() <= tol))
    }

    /// Sparse-dense product on raw row-major buffers.
    pub(crate) fn spmm_raw(&self, d: &[f64], n: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.rows * n];
        for r in 0..self.rows {
            let orow = &mut out[r * n..(r + 1) * n];
            for (c, v) in self.row(r) {
                let drow = &d[c * n..(c + 1) * n];
                for (o, &x) in orow.iter_mut().zip(drow) {
                    *o += v * x;
                }
            }
        }
        out
    }

    /// Untracked sparse-dense product.
    pub fn spmm(&self, d: &Tensor) -> Result<Tensor> {
        let (k, n) = d.require_matrix("spmm rhs")?;
        if k != self.cols {
            return Err(Error::dim(format!(
                "spmm: sparse is {}x{}, dense has {k} rows",
                self.rows, self.cols
            )));
        }
        let mut shape = d.shape().to_vec();
        shape[0] = self.rows;
        Tensor::from_parts(shape, self.spmm_raw(d.values(), n))
    }

    /// `alpha·self + beta·other` for equally shaped matrices.
    pub fn linear_combination(&self, alpha: f64, other: &SparseMatrix, beta: f64) -> Result<SparseMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::dim("linear_combination shape mismatch"));
        }
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        for r in 0..self.rows {
            triplets.extend(self.row(r).map(|(c, v)| (r, c, alpha * v)));
            triplets.extend(other.row(r).map(|(c, v)| (r, c, beta * v)));
        }
        SparseMatrix::from_triplets(self.rows, self.cols, &triplets)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_catches_unsorted_columns() {
        assert!(SparseMatrix::new(1, 3, vec![0, 2], vec![2, 1], vec![1.0, 1.0]).is_err());
        assert!(SparseMatrix::new(1, 3, vec![0, 2], vec![1, 1], vec![1.0, 1.0]).is_err());
        assert!(SparseMatrix::new(1, 3, vec![0, 1], vec![3], vec![1.0]).is_err());
        assert!(SparseMatrix::new(2, 3, vec![0, 2, 1], vec![0, 1], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn identity_times_dense_is_dense() {
        let d = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        assert_eq!(SparseMatrix::identity(3).spmm(&d).unwrap(), d);
    }

    #[test]
    fn empty_times_dense_is_zero() {
        let d = Tensor::full(&[3, 2], 7.0);
        assert_eq!(SparseMatrix::empty(4, 3).spmm(&d).unwrap(), Tensor::zeros(&[4, 2]));
    }

    #[test]
    fn transpose_round_trips() {
        let s = SparseMatrix::from_triplets(2, 3, &[(0, 2, 1.5), (1, 0, -2.0), (0, 0, 3.0)]).unwrap();
        let t = s.transpose();
        assert_eq!(t.get(2, 0), 1.5);
        assert_eq!(t.get(0, 1), -2.0);
        assert_eq!(t.transpose(), s);
    }

    #[test]
    fn triplet_duplicates_sum() {
        let s = SparseMatrix::from_triplets(1, 1, &[(0, 0, 1.0), (0, 0, 2.0)]).unwrap();
        assert_eq!(s.nnz(), 1);
        assert_eq!(s.get(0, 0), 3.0);
    }
}
