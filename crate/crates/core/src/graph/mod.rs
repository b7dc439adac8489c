//! Phenotype–gene feature graphs and the operators GNN layers propagate with.

mod feature_graph;
mod operators;

pub use feature_graph::{build_feature_graph, permute_graph, FeatureGraph, GraphNode, NodeKind};
pub use operators::{
    adjacency, chebyshev_apply, neighbor_mean, normalize_adjacency, normalized_laplacian,
    power_iteration, scaled_laplacian, LambdaMax, NormalizedAdjacency, Normalization,
    ScaledLaplacian, POWER_ITERATION_MAX_ITERS, POWER_ITERATION_TOL,
};
