//! Fixtures and independent oracles shared by the integration suites.
#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use oncograph::autodiff::gradcheck::{check_gradients, GradCheckReport};
use oncograph::autodiff::{Tape, Tensor, Var};
use oncograph::baselines::{Mlp, MlpConfig};
use oncograph::gnn::{GnnModel, GraphContext, Mode, ModelConfig, Operator};
use oncograph::graph::{permute_graph, FeatureGraph};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-4;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_tensor(r: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Tensor {
    let v = (0..rows * cols).map(|_| r.gen_range(-scale..scale)).collect();
    Tensor::new(vec![rows, cols], v).unwrap()
}

/// Triangle 0-1-2 with a tail 2-3-4 and an isolated node 5; four input
/// features per node.
pub fn six_node_graph() -> FeatureGraph {
    let x = Tensor::from_rows(&[
        vec![0.9, -0.3, 0.2, 1.1],
        vec![-0.4, 0.8, -1.2, 0.5],
        vec![0.1, 0.6, 0.7, -0.9],
        vec![1.3, -0.8, 0.4, 0.2],
        vec![-0.7, -0.1, 0.9, 0.6],
        vec![0.5, 1.0, -0.6, -0.4],
    ])
    .unwrap();
    FeatureGraph::unlabeled(6, &[(0, 1), (0, 2), (1, 2), (2, 3), (3, 4)], x).unwrap()
}

pub const SIX_NODE_LABELS: [usize; 6] = [0, 1, 2, 0, 1, 2];

/// Erdős–Rényi graph with uniform features in [-1, 1].
pub fn random_graph(r: &mut impl Rng, n: usize, p_edge: f64, features: usize) -> FeatureGraph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if r.gen_bool(p_edge) {
                edges.push((i, j));
            }
        }
    }
    FeatureGraph::unlabeled(n, &edges, uniform_tensor(r, n, features, 1.0)).unwrap()
}

pub fn random_permutation(r: &mut impl Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(r);
    p
}

/// Small configuration for oracle checks.
pub fn small_config(op: Operator, n_classes: usize) -> ModelConfig {
    let mut c = ModelConfig::new(op);
    c.hidden_dim = 4;
    c.heads = 2;
    c.n_classes = n_classes;
    c.seed = 7;
    c
}

/// Replaces every parameter with uniform values in [-0.8, 0.8] so biases and
/// learnable scalars are exercised away from their initial values.
pub fn randomize(model: &mut GnnModel, r: &mut impl Rng) {
    let names = model.param_names().to_vec();
    for name in names {
        let shape = model.param(&name).unwrap().shape().to_vec();
        let len = shape.iter().product();
        let v = (0..len).map(|_| r.gen_range(-0.8..0.8)).collect();
        model.set_param(&name, Tensor::new(shape, v).unwrap()).unwrap();
    }
}

pub fn gnn_gradcheck(model: &GnnModel, ctx: &GraphContext, labels: &[usize], mode: Mode) -> GradCheckReport {
    let x = ctx.features().clone();
    check_gradients(model.params(), FD_STEP, |tape: &mut Tape, vars: &[Var]| {
        let logits = model.forward(tape, ctx, &x, vars, mode)?;
        tape.cross_entropy(logits, labels)
    })
    .unwrap()
}

pub fn mlp_gradcheck(x: &Tensor, labels: &[usize], n_classes: usize, seed: u64) -> GradCheckReport {
    let cfg = MlpConfig {
        hidden_dim: 5,
        seed,
        ..MlpConfig::default()
    };
    let mut mlp = Mlp::new(cfg, x.cols(), n_classes).unwrap();
    let mut r = rng(seed);
    for p in &mut mlp.params {
        p.values_mut().iter_mut().for_each(|v| *v = r.gen_range(-0.8..0.8));
    }
    check_gradients(&mlp.params.clone(), FD_STEP, |tape: &mut Tape, vars: &[Var]| {
        let logits = mlp.forward(tape, x, vars, None)?;
        tape.cross_entropy(logits, labels)
    })
    .unwrap()
}

pub fn dense(t: &Tensor) -> DMatrix<f64> {
    DMatrix::from_row_slice(t.rows(), t.cols(), t.values())
}

pub fn to_tensor(m: &DMatrix<f64>) -> Tensor {
    let mut v = Vec::with_capacity(m.len());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            v.push(m[(r, c)]);
        }
    }
    Tensor::new(vec![m.nrows(), m.ncols()], v).unwrap()
}

/// Symmetric normalized Laplacian built straight from the edge list, with a
/// zero row for isolated nodes.
pub fn laplacian_oracle(g: &FeatureGraph) -> DMatrix<f64> {
    let n = g.num_nodes();
    let mut a = DMatrix::zeros(n, n);
    for &(i, j) in g.edges() {
        a[(i, j)] = 1.0;
        a[(j, i)] = 1.0;
    }
    let deg: Vec<f64> = (0..n).map(|i| a.row(i).sum()).collect();
    let mut l = DMatrix::zeros(n, n);
    for i in 0..n {
        if deg[i] > 0.0 {
            l[(i, i)] = 1.0;
        }
        for j in 0..n {
            if a[(i, j)] != 0.0 {
                l[(i, j)] -= 1.0 / (deg[i] * deg[j]).sqrt();
            }
        }
    }
    l
}

/// `U (Σ_k T_k(Λ̃) ⊗ θ_k) Uᵀ x` from a dense eigendecomposition, with the
/// Chebyshev polynomials evaluated on the scalar eigenvalues.
pub fn chebyshev_spectral_oracle(g: &FeatureGraph, x: &Tensor, theta: &[Tensor]) -> Tensor {
    let eig = SymmetricEigen::new(laplacian_oracle(g));
    let lambda_max = eig.eigenvalues.max();
    let lambda_max = if lambda_max > 1e-12 { lambda_max } else { 2.0 };
    let u = &eig.eigenvectors;
    let xd = dense(x);
    let mut out = DMatrix::zeros(x.rows(), theta[0].cols());
    for (k, th) in theta.iter().enumerate() {
        let diag: Vec<f64> = eig
            .eigenvalues
            .iter()
            .map(|&l| chebyshev_scalar(k, 2.0 * l / lambda_max - 1.0))
            .collect();
        let filter = u * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag)) * u.transpose();
        out += filter * &xd * dense(th);
    }
    to_tensor(&out)
}

pub fn chebyshev_scalar(k: usize, x: f64) -> f64 {
    let (mut a, mut b) = (1.0, x);
    match k {
        0 => a,
        1 => b,
        _ => {
            for _ in 2..=k {
                let next = 2.0 * x * b - a;
                a = b;
                b = next;
            }
            b
        }
    }
}

/// Largest deviation between `forward(permute(g))` and the rows of
/// `forward(g)` moved by the same permutation.
pub fn equivariance_error(model: &GnnModel, g: &FeatureGraph, perm: &[usize]) -> f64 {
    let ctx = GraphContext::new(g).unwrap();
    let out = model.logits(&ctx, ctx.features()).unwrap();
    let pg = permute_graph(g, perm).unwrap();
    let pctx = GraphContext::new(&pg).unwrap();
    let pout = model.logits(&pctx, pctx.features()).unwrap();
    let mut worst = 0.0f64;
    for (old, &new) in perm.iter().enumerate() {
        for (a, b) in out.row(old).iter().zip(pout.row(new)) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

/// Per-class precision/recall/F1 and macro averages straight from label
/// pairs, with 0 for any zero denominator.
pub struct BruteMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class_f1: Vec<f64>,
}

pub fn brute_force_metrics(y_true: &[usize], y_pred: &[usize], k: usize) -> BruteMetrics {
    let mut p = Vec::new();
    let mut r = Vec::new();
    let mut f = Vec::new();
    for c in 0..k {
        let mut tp = 0u64;
        let mut fp = 0u64;
        let mut fn_ = 0u64;
        for (&t, &q) in y_true.iter().zip(y_pred) {
            match (t == c, q == c) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                (false, false) => {}
            }
        }
        let pc = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let rc = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
        let fc = if pc + rc == 0.0 { 0.0 } else { 2.0 * pc * rc / (pc + rc) };
        p.push(pc);
        r.push(rc);
        f.push(fc);
    }
    let correct = y_true.iter().zip(y_pred).filter(|(a, b)| a == b).count();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / k as f64;
    BruteMetrics {
        accuracy: correct as f64 / y_true.len() as f64,
        precision: mean(&p),
        recall: mean(&r),
        f1: mean(&f),
        per_class_f1: f,
    }
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half.
pub fn mann_whitney(scores: &[f64], positive: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if !positive[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if positive[j] {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

pub fn gini_impurity(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    1.0 - counts
        .iter()
        .map(|&c| (c as f64 / n as f64).powi(2))
        .sum::<f64>()
}

/// Impurity decrease of splitting on each binary feature; `None` when one
/// side would be empty.
pub fn gini_gains(x: &[Vec<bool>], y: &[usize], k: usize) -> Vec<Option<f64>> {
    let n = y.len();
    let mut parent = vec![0; k];
    y.iter().for_each(|&c| parent[c] += 1);
    let parent_gini = gini_impurity(&parent);
    (0..x[0].len())
        .map(|f| {
            let mut on = vec![0; k];
            let mut off = vec![0; k];
            for (row, &c) in x.iter().zip(y) {
                if row[f] {
                    on[c] += 1;
                } else {
                    off[c] += 1;
                }
            }
            let (n_on, n_off) = (on.iter().sum::<usize>(), off.iter().sum::<usize>());
            if n_on == 0 || n_off == 0 {
                return None;
            }
            let child = (n_on as f64 * gini_impurity(&on) + n_off as f64 * gini_impurity(&off)) / n as f64;
            Some(parent_gini - child)
        })
        .collect()
}

/// Bernoulli naive Bayes posterior by direct enumeration of the product
/// `P(c) Π_f P(x_f | c)` with add-one smoothing.
pub fn naive_bayes_oracle(x: &[Vec<bool>], y: &[usize], k: usize, probe: &[bool]) -> Vec<f64> {
    let joint: Vec<f64> = (0..k)
        .map(|c| {
            let members: Vec<&Vec<bool>> = x.iter().zip(y).filter(|(_, &l)| l == c).map(|(r, _)| r).collect();
            let n_c = members.len() as f64;
            if n_c == 0.0 {
                return 0.0;
            }
            let mut p = n_c / y.len() as f64;
            for (f, &on) in probe.iter().enumerate() {
                let count = members.iter().filter(|r| r[f]).count() as f64;
                let theta = (count + 1.0) / (n_c + 2.0);
                p *= if on { theta } else { 1.0 - theta };
            }
            p
        })
        .collect();
    let z: f64 = joint.iter().sum();
    joint.iter().map(|j| j / z).collect()
}

pub fn bool_rows_to_tensor(x: &[Vec<bool>]) -> Tensor {
    let rows: Vec<Vec<f64>> = x
        .iter()
        .map(|r| r.iter().map(|&b| f64::from(u8::from(b))).collect())
        .collect();
    Tensor::from_rows(&rows).unwrap()
}

pub fn random_binary(r: &mut impl Rng, rows: usize, cols: usize, p: f64) -> Vec<Vec<bool>> {
    (0..rows).map(|_| (0..cols).map(|_| r.gen_bool(p)).collect()).collect()
}

const SYLLABLES: [&str; 8] = ["ka", "lo", "mi", "ne", "ro", "su", "ta", "vi"];

fn word(r: &mut impl Rng, len: usize) -> String {
    (0..len).map(|_| SYLLABLES[r.gen_range(0..SYLLABLES.len())]).collect()
}

/// Record with mixed-case multi-word phenotypes, gene symbols and a few
/// genes listed as both pathogenic and VUS.
pub fn random_record(r: &mut impl Rng, i: usize) -> oncograph::ingest::PatientRecord {
    use oncograph::ingest::{CancerType, PatientRecord};
    let class = CancerType::ALL[r.gen_range(0..CancerType::ALL.len())];
    let mut rec = PatientRecord::new(format!("PT-{i:04}"), class);
    for _ in 0..r.gen_range(0..8) {
        let n_words = r.gen_range(1..4);
        let mut term: Vec<String> = (0..n_words).map(|_| word(r, 2)).collect();
        if r.gen_bool(0.3) {
            term[0] = term[0].to_uppercase();
        }
        if r.gen_bool(0.2) {
            term.push("(finding)".to_string());
        }
        rec.phenotypes.insert(term.join(" "));
    }
    for _ in 0..r.gen_range(0..5) {
        rec.pathogenic.insert(format!("{}{}", word(r, 1).to_uppercase(), r.gen_range(1..20)));
    }
    for _ in 0..r.gen_range(0..4) {
        rec.vus.insert(format!("{}{}", word(r, 1).to_uppercase(), r.gen_range(1..20)));
    }
    rec
}

/// Binary features where class `c` switches on features `2c` and `2c+1`
/// with probability 0.7 over a 0.2 background, so trees have informative
/// splits with noise.
pub fn class_correlated_binary(
    r: &mut impl Rng,
    rows: usize,
    cols: usize,
    k: usize,
) -> (Vec<Vec<bool>>, Vec<usize>) {
    let y: Vec<usize> = (0..rows).map(|i| i % k).collect();
    let x = y
        .iter()
        .map(|&c| {
            (0..cols)
                .map(|f| r.gen_bool(if f / 2 == c { 0.7 } else { 0.2 }))
                .collect()
        })
        .collect();
    (x, y)
}

/// Feature with the largest Gini decrease, lowest index among ties within
/// `1e-12`, and that decrease.
pub fn best_gini_split(x: &[Vec<bool>], y: &[usize], k: usize) -> Option<(usize, f64)> {
    let gains = gini_gains(x, y, k);
    let best = gains.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    if best <= 1e-12 {
        return None;
    }
    gains
        .iter()
        .position(|g| g.is_some_and(|g| g >= best - 1e-12))
        .map(|f| (f, best))
}
