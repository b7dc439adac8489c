use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use crate::autodiff::{SparseMatrix, Tensor};
use crate::error::Result;
use crate::graph::{
    adjacency, neighbor_mean, normalize_adjacency, scaled_laplacian, FeatureGraph, LambdaMax,
    Normalization, ScaledLaplacian,
};

/// Edge list grouped by target node: entries `offsets[i]..offsets[i+1]` of
/// `source` are the nodes `i` receives from, ascending.
#[derive(Clone, Debug)]
pub struct EdgeIndex {
    pub offsets: Arc<Vec<usize>>,
    pub source: Arc<Vec<usize>>,
    pub target: Arc<Vec<usize>>,
}

impl EdgeIndex {
    fn build(g: &FeatureGraph, self_loops: bool) -> Self {
        let mut offsets = vec![0];
        let mut source = Vec::new();
        let mut target = Vec::new();
        for i in 0..g.num_nodes() {
            let mut row = g.neighbors(i).to_vec();
            if self_loops {
                row.push(i);
                row.sort_unstable();
            }
            target.extend(std::iter::repeat(i).take(row.len()));
            source.extend(row);
            offsets.push(source.len());
        }
        EdgeIndex {
            offsets: Arc::new(offsets),
            source: Arc::new(source),
            target: Arc::new(target),
        }
    }

    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    pub fn segment(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }
}

/// Everything the operators need from one graph, computed once and shared
/// read-only across models.
#[derive(Debug)]
pub struct GraphContext {
    pub(crate) features: Arc<Tensor>,
    pub(crate) labels: Vec<Option<usize>>,
    pub(crate) vocab_hash: String,
    pub(crate) norm_adj: Arc<SparseMatrix>,
    pub(crate) sage_mean: Arc<SparseMatrix>,
    pub(crate) neighbor_mean: Arc<SparseMatrix>,
    pub(crate) neighbor_sum: Arc<SparseMatrix>,
    pub(crate) laplacian: ScaledLaplacian,
    pub(crate) attention_edges: EdgeIndex,
    pub(crate) neighbor_edges: EdgeIndex,
    sgc_cache: Mutex<BTreeMap<usize, Arc<Tensor>>>,
}

impl GraphContext {
    /// Scales the Laplacian with `λmax = 2`.
    pub fn new(g: &FeatureGraph) -> Result<Self> {
        Self::with_lambda_max(g, LambdaMax::default())
    }

    pub fn with_lambda_max(g: &FeatureGraph, lambda_max: LambdaMax) -> Result<Self> {
        Ok(GraphContext {
            features: Arc::new(g.features().clone()),
            labels: g.labels().to_vec(),
            vocab_hash: g.vocab_hash().to_string(),
            norm_adj: normalize_adjacency(g, Normalization::SymSelfLoop).matrix,
            sage_mean: normalize_adjacency(g, Normalization::RandomWalk).matrix,
            neighbor_mean: Arc::new(neighbor_mean(g)),
            neighbor_sum: Arc::new(adjacency(g)),
            laplacian: scaled_laplacian(g, lambda_max)?,
            attention_edges: EdgeIndex::build(g, true),
            neighbor_edges: EdgeIndex::build(g, false),
            sgc_cache: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.features.rows()
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn vocab_hash(&self) -> &str {
        &self.vocab_hash
    }

    pub fn normalized_adjacency(&self) -> &Arc<SparseMatrix> {
        &self.norm_adj
    }

    pub fn scaled_laplacian(&self) -> &ScaledLaplacian {
        &self.laplacian
    }

    /// Neighborhoods including self, as used by attention.
    pub fn attention_edges(&self) -> &EdgeIndex {
        &self.attention_edges
    }

    /// Neighborhoods excluding self.
    pub fn neighbor_edges(&self) -> &EdgeIndex {
        &self.neighbor_edges
    }

    /// `Â^k x` by `k` sparse products.
    pub fn propagate(&self, x: &Tensor, k: usize) -> Result<Tensor> {
        let mut h = x.clone();
        for _ in 0..k {
            h = self.norm_adj.spmm(&h)?;
        }
        Ok(h)
    }

    /// `Â^k X` for the graph's own features, computed on first use.
    pub fn propagated_features(&self, k: usize) -> Result<Arc<Tensor>> {
        let mut cache = self.sgc_cache.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(t) = cache.get(&k) {
            return Ok(Arc::clone(t));
        }
        let t = Arc::new(self.propagate(&self.features, k)?);
        cache.insert(k, Arc::clone(&t));
        Ok(t)
    }
}
