//! Sparse propagation operators derived from a [`FeatureGraph`].

use std::sync::Arc;

use log::warn;
use serde::{Deserialize, Serialize};

use super::FeatureGraph;
use crate::autodiff::{SparseMatrix, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// `D̂^{-1/2} (A + I) D̂^{-1/2}` with `D̂` the degrees of `A + I`.
    SymSelfLoop,
    /// `D̂^{-1} (A + I)`.
    RandomWalk,
    /// `A + I`.
    None,
}

#[derive(Clone, Debug)]
pub struct NormalizedAdjacency {
    pub matrix: Arc<SparseMatrix>,
    pub kind: Normalization,
}

pub fn normalize_adjacency(g: &FeatureGraph, kind: Normalization) -> NormalizedAdjacency {
    let n = g.num_nodes();
    let deg: Vec<f64> = (0..n).map(|i| g.degree(i) as f64 + 1.0).collect();
    let weight = |i: usize, j: usize| match kind {
        Normalization::SymSelfLoop => 1.0 / (deg[i] * deg[j]).sqrt(),
        Normalization::RandomWalk => 1.0 / deg[i],
        Normalization::None => 1.0,
    };
    let mut offsets = Vec::with_capacity(n + 1);
    let mut indices = Vec::new();
    let mut values = Vec::new();
    offsets.push(0);
    for i in 0..n {
        let mut row: Vec<usize> = g.neighbors(i).to_vec();
        row.push(i);
        row.sort_unstable();
        for j in row {
            indices.push(j);
            values.push(weight(i, j));
        }
        offsets.push(indices.len());
    }
    let matrix = SparseMatrix::new(n, n, offsets, indices, values)
        .expect("neighbor lists are sorted and in range");
    NormalizedAdjacency {
        matrix: Arc::new(matrix),
        kind,
    }
}

/// Unnormalized 0/1 adjacency without self-loops.
pub fn adjacency(g: &FeatureGraph) -> SparseMatrix {
    neighbor_matrix(g, |_| 1.0)
}

/// Row `i` averages the neighbors of `i`; isolated nodes get a zero row.
pub fn neighbor_mean(g: &FeatureGraph) -> SparseMatrix {
    neighbor_matrix(g, |d| 1.0 / d as f64)
}

fn neighbor_matrix(g: &FeatureGraph, weight: impl Fn(usize) -> f64) -> SparseMatrix {
    let n = g.num_nodes();
    let mut offsets = vec![0];
    let mut indices = Vec::new();
    let mut values = Vec::new();
    for i in 0..n {
        let nb = g.neighbors(i);
        indices.extend_from_slice(nb);
        values.extend(std::iter::repeat(weight(nb.len())).take(nb.len()));
        offsets.push(indices.len());
    }
    SparseMatrix::new(n, n, offsets, indices, values).expect("neighbor lists are valid CSR rows")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaMax {
    /// Largest eigenvalue of the normalized Laplacian by power iteration.
    Exact,
    Fixed(f64),
}

impl Default for LambdaMax {
    /// The upper bound of the normalized Laplacian spectrum.
    fn default() -> Self {
        LambdaMax::Fixed(2.0)
    }
}

pub const POWER_ITERATION_TOL: f64 = 1e-9;
pub const POWER_ITERATION_MAX_ITERS: usize = 10_000;
const FALLBACK_LAMBDA_MAX: f64 = 2.0;

/// `(2/λmax)·L − I` with `L = I − D^{-1/2} A D^{-1/2}`; isolated nodes have a
/// zero row in `L`.
#[derive(Clone, Debug)]
pub struct ScaledLaplacian {
    pub matrix: Arc<SparseMatrix>,
    pub lambda_max: f64,
    /// Set when exact mode failed to converge and fell back to 2.0.
    pub fell_back: bool,
}

/// Symmetric normalized Laplacian.
pub fn normalized_laplacian(g: &FeatureGraph) -> SparseMatrix {
    let n = g.num_nodes();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| match g.degree(i) {
            0 => 0.0,
            d => 1.0 / (d as f64).sqrt(),
        })
        .collect();
    let mut offsets = vec![0];
    let mut indices = Vec::new();
    let mut values = Vec::new();
    for i in 0..n {
        let mut row: Vec<(usize, f64)> = g
            .neighbors(i)
            .iter()
            .map(|&j| (j, -inv_sqrt[i] * inv_sqrt[j]))
            .collect();
        if g.degree(i) > 0 {
            row.push((i, 1.0));
        }
        row.sort_unstable_by_key(|e| e.0);
        for (j, v) in row {
            indices.push(j);
            values.push(v);
        }
        offsets.push(indices.len());
    }
    SparseMatrix::new(n, n, offsets, indices, values).expect("valid CSR rows")
}

/// Largest eigenvalue of a symmetric PSD operator by power iteration. Stops
/// once the residual `‖Mv − λv‖` of the Rayleigh estimate is at most `tol`;
/// `None` when that does not happen within the budget.
pub fn power_iteration(m: &SparseMatrix, tol: f64, max_iters: usize) -> Option<f64> {
    let n = m.rows();
    // Deterministic start with components along every node.
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 + 1.0).sqrt().fract()).collect();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let n0 = norm(&v);
    v.iter_mut().for_each(|x| *x /= n0);
    for _ in 0..max_iters {
        let w = m.spmm_raw(&v, 1);
        let lambda: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        let residual = v.iter().zip(&w).map(|(a, b)| (b - lambda * a).powi(2)).sum::<f64>().sqrt();
        if residual <= tol {
            return Some(lambda);
        }
        let wn = norm(&w);
        v = w.into_iter().map(|x| x / wn).collect();
    }
    None
}

pub fn scaled_laplacian(g: &FeatureGraph, lambda_max: LambdaMax) -> Result<ScaledLaplacian> {
    let l = normalized_laplacian(g);
    let (lambda, fell_back) = match lambda_max {
        LambdaMax::Fixed(v) => {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("lambda_max must be positive, got {v}")));
            }
            (v, false)
        }
        LambdaMax::Exact => match power_iteration(&l, POWER_ITERATION_TOL, POWER_ITERATION_MAX_ITERS) {
            // Edgeless graph: L = 0 and any positive scale gives -I.
            Some(v) if v > 1e-12 => (v, false),
            Some(_) => (FALLBACK_LAMBDA_MAX, false),
            None => {
                warn!("power iteration did not converge; using lambda_max = 2");
                (FALLBACK_LAMBDA_MAX, true)
            }
        },
    };
    let identity = SparseMatrix::identity(g.num_nodes());
    let matrix = l.linear_combination(2.0 / lambda, &identity, -1.0)?;
    Ok(ScaledLaplacian {
        matrix: Arc::new(matrix),
        lambda_max: lambda,
        fell_back,
    })
}

/// `Σ_{k<K} T_k(L̃) x θ_k` via the three-term recurrence
/// `T_0 x = x`, `T_1 x = L̃x`, `T_k x = 2 L̃ T_{k-1} x − T_{k-2} x`.
pub fn chebyshev_apply(l: &ScaledLaplacian, x: &Tensor, theta: &[Tensor], k: usize) -> Result<Tensor> {
    if k == 0 {
        return Err(Error::config("Chebyshev order K must be at least 1"));
    }
    if theta.len() != k {
        return Err(Error::config(format!(
            "expected {k} Chebyshev coefficient matrices, got {}",
            theta.len()
        )));
    }
    let mut prev2 = x.clone();
    let mut out = x.matmul(&theta[0])?;
    if k == 1 {
        return Ok(out);
    }
    let mut prev1 = l.matrix.spmm(x)?;
    out = out.add(&prev1.matmul(&theta[1])?)?;
    for th in &theta[2..] {
        let next = l.matrix.spmm(&prev1)?.scale(2.0)?.sub(&prev2)?;
        out = out.add(&next.matmul(th)?)?;
        prev2 = prev1;
        prev1 = next;
    }
    Ok(out)
}
