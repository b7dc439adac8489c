use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::ingest::{FeatureKind, FeatureVocabulary, PatientRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeKind {
    Phenotype,
    GenePathogenic,
    GeneVus,
    Patient,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Phenotype => "phenotype",
            NodeKind::GenePathogenic => "gene-pathogenic",
            NodeKind::GeneVus => "gene-vus",
            NodeKind::Patient => "patient",
        }
    }

    pub fn is_gene(self) -> bool {
        matches!(self, NodeKind::GenePathogenic | NodeKind::GeneVus)
    }
}

impl From<FeatureKind> for NodeKind {
    fn from(k: FeatureKind) -> Self {
        match k {
            FeatureKind::Phenotype => NodeKind::Phenotype,
            FeatureKind::GenePathogenic => NodeKind::GenePathogenic,
            FeatureKind::GeneVus => NodeKind::GeneVus,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphNode {
    pub kind: NodeKind,
    pub name: String,
}

/// Undirected node-feature graph. Node ids are positions in `nodes`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureGraph {
    nodes: Vec<GraphNode>,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
    features: Tensor,
    labels: Vec<Option<usize>>,
    vocab_hash: String,
    skipped: Vec<String>,
}

impl FeatureGraph {
    /// Validates and assembles a graph. Edges are unordered pairs; self-edges,
    /// duplicates and dangling endpoints are rejected.
    pub fn new(
        nodes: Vec<GraphNode>,
        edges: &[(usize, usize)],
        features: Tensor,
        labels: Vec<Option<usize>>,
        vocab_hash: String,
    ) -> Result<Self> {
        let n = nodes.len();
        if n == 0 {
            return Err(Error::usage("graph has no nodes"));
        }
        if features.rows() != n {
            return Err(Error::dim(format!(
                "{n} nodes but feature matrix has {} rows",
                features.rows()
            )));
        }
        if labels.len() != n {
            return Err(Error::dim("one label slot per node required"));
        }
        let mut set = BTreeSet::new();
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::data(format!("edge ({a},{b}) references a missing node")));
            }
            if a == b {
                return Err(Error::data(format!("self-edge on node {a}")));
            }
            if !set.insert((a.min(b), a.max(b))) {
                return Err(Error::data(format!("duplicate edge ({a},{b})")));
            }
        }
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in &set {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        neighbors.iter_mut().for_each(|v| v.sort_unstable());
        Ok(FeatureGraph {
            nodes,
            edges: set.into_iter().collect(),
            neighbors,
            features,
            labels,
            vocab_hash,
            skipped: Vec::new(),
        })
    }

    /// Plain graph with anonymous nodes and no labels (handy for operator
    /// tests and small examples).
    pub fn unlabeled(n: usize, edges: &[(usize, usize)], features: Tensor) -> Result<Self> {
        let nodes = (0..n)
            .map(|i| GraphNode {
                kind: NodeKind::Patient,
                name: format!("n{i}"),
            })
            .collect();
        FeatureGraph::new(nodes, edges, features, vec![None; n], String::new())
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    /// Edges as `(low, high)` pairs, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
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

    /// Patients left out because none of their features survived filtering.
    pub fn skipped_patients(&self) -> &[String] {
        &self.skipped
    }

    pub fn patient_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| self.nodes[i].kind == NodeKind::Patient)
            .collect()
    }

    pub fn labeled_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.labels[i].is_some()).collect()
    }

    /// Replaces the node features (same row count required).
    pub fn with_features(mut self, features: Tensor) -> Result<Self> {
        if features.rows() != self.nodes.len() {
            return Err(Error::dim("feature rows must match node count"));
        }
        self.features = features;
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Vec<Option<usize>>) -> Result<Self> {
        if labels.len() != self.nodes.len() {
            return Err(Error::dim("one label slot per node required"));
        }
        self.labels = labels;
        Ok(self)
    }

    /// Dense 0/1 adjacency (for small graphs and tests).
    pub fn dense_adjacency(&self) -> Tensor {
        let n = self.nodes.len();
        let mut a = Tensor::zeros(&[n, n]);
        let v = a.values_mut();
        for &(i, j) in &self.edges {
            v[i * n + j] = 1.0;
            v[j * n + i] = 1.0;
        }
        a
    }

    /// `id<TAB>kind<TAB>name` per node.
    pub fn export_nodes_tsv(&self) -> String {
        let mut out = String::new();
        for (i, node) in self.nodes.iter().enumerate() {
            writeln!(out, "{i}\t{}\t{}", node.kind.as_str(), node.name).unwrap();
        }
        out
    }

    /// `src_id<TAB>dst_id` per undirected edge, lower id first.
    pub fn export_edges_tsv(&self) -> String {
        let mut out = String::new();
        for (a, b) in &self.edges {
            writeln!(out, "{a}\t{b}").unwrap();
        }
        out
    }
}

/// Builds the phenotype–gene feature graph, optionally with one node per
/// patient.
///
/// Node order is canonical: vocabulary order (phenotypes, pathogenic genes,
/// VUS genes, each sorted) followed by patients sorted by id. A phenotype node
/// and a gene node are linked when at least one patient carries both. Patient
/// nodes link to each of their retained features, carry the patient's
/// multi-hot row as input features and the cancer type as label; feature
/// nodes get one-hot identity rows.
pub fn build_feature_graph(
    cohort: &[PatientRecord],
    vocab: &FeatureVocabulary,
    include_patient_nodes: bool,
) -> Result<FeatureGraph> {
    if vocab.is_empty() {
        return Err(Error::config("vocabulary is empty after filtering"));
    }
    if cohort.is_empty() {
        return Err(Error::usage("cohort is empty"));
    }
    let f = vocab.len();
    let mut patients: Vec<(&PatientRecord, Vec<usize>)> = Vec::new();
    let mut skipped = Vec::new();
    let mut sorted: Vec<&PatientRecord> = cohort.iter().collect();
    sorted.sort_by(|a, b| a.patient_id.cmp(&b.patient_id));
    for r in sorted {
        let feats = vocab.patient_features(r);
        if feats.is_empty() {
            skipped.push(r.patient_id.clone());
        } else {
            patients.push((r, feats));
        }
    }

    let mut edge_set: HashSet<(usize, usize)> = HashSet::new();
    for (_, feats) in &patients {
        let phen = feats.iter().filter(|&&j| vocab.keys()[j].kind == FeatureKind::Phenotype);
        for &p in phen {
            for &g in feats.iter().filter(|&&j| vocab.keys()[j].kind != FeatureKind::Phenotype) {
                edge_set.insert((p, g));
            }
        }
    }

    let mut nodes: Vec<GraphNode> = vocab
        .keys()
        .iter()
        .map(|k| GraphNode {
            kind: k.kind.into(),
            name: k.name.clone(),
        })
        .collect();
    let n = f + if include_patient_nodes { patients.len() } else { 0 };
    let mut x = vec![0.0; n * f];
    for j in 0..f {
        x[j * f + j] = 1.0;
    }
    let mut labels = vec![None; n];
    if include_patient_nodes {
        for (pi, (r, feats)) in patients.iter().enumerate() {
            let node = f + pi;
            nodes.push(GraphNode {
                kind: NodeKind::Patient,
                name: r.patient_id.clone(),
            });
            labels[node] = Some(r.label());
            for &j in feats {
                x[node * f + j] = 1.0;
                edge_set.insert((j, node));
            }
        }
    }
    let mut edges: Vec<(usize, usize)> = edge_set.into_iter().collect();
    edges.sort_unstable();
    let features = Tensor::new(vec![n, f], x)?;
    let mut g = FeatureGraph::new(nodes, &edges, features, labels, vocab.hash())?;
    g.skipped = skipped;
    Ok(g)
}

/// Relabels nodes: old node `i` becomes node `perm[i]`. Features, labels and
/// edges move with their nodes.
pub fn permute_graph(g: &FeatureGraph, perm: &[usize]) -> Result<FeatureGraph> {
    let n = g.num_nodes();
    if perm.len() != n {
        return Err(Error::usage(format!(
            "permutation has {} entries for {n} nodes",
            perm.len()
        )));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(Error::usage("permutation is not a bijection"));
        }
    }
    let mut inverse = vec![0; n];
    for (old, &new) in perm.iter().enumerate() {
        inverse[new] = old;
    }
    let nodes = inverse.iter().map(|&old| g.nodes[old].clone()).collect();
    let labels = inverse.iter().map(|&old| g.labels[old]).collect();
    let features = g.features.select_rows(&inverse)?;
    let edges: Vec<(usize, usize)> = g.edges.iter().map(|&(a, b)| (perm[a], perm[b])).collect();
    let mut out = FeatureGraph::new(nodes, &edges, features, labels, g.vocab_hash.clone())?;
    out.skipped = g.skipped.clone();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{build_vocabulary, CancerType, VocabularyConfig};

    fn permissive() -> VocabularyConfig {
        VocabularyConfig {
            phenotype_threshold: 1,
            gene_threshold: 0,
            ..Default::default()
        }
    }

    fn patient(id: &str, phen: &[&str], genes: &[&str]) -> PatientRecord {
        let mut r = PatientRecord::new(id, CancerType::Lung);
        r.phenotypes = phen.iter().map(|s| s.to_string()).collect();
        r.pathogenic = genes.iter().map(|s| s.to_string()).collect();
        r
    }

    #[test]
    fn minimal_instance() {
        let cohort = vec![patient("A", &["p1"], &["g1"])];
        let vocab = build_vocabulary(&cohort, &permissive()).unwrap();
        let g = build_feature_graph(&cohort, &vocab, false).unwrap();
        assert_eq!(g.num_nodes(), 2);
        assert_eq!(g.edges(), &[(0, 1)]);
    }

    #[test]
    fn no_gene_gene_edges() {
        let cohort = vec![patient("A", &["p1"], &["g1"]), patient("B", &["p1"], &["g2"])];
        let vocab = build_vocabulary(&cohort, &permissive()).unwrap();
        let g = build_feature_graph(&cohort, &vocab, false).unwrap();
        // nodes: p1, g1, g2
        assert_eq!(g.edges(), &[(0, 1), (0, 2)]);
    }

    #[test]
    fn patient_nodes_carry_multihot_and_label() {
        let cohort = vec![patient("B", &["p1"], &["g2"]), patient("A", &["p1"], &["g1"])];
        let vocab = build_vocabulary(&cohort, &permissive()).unwrap();
        let g = build_feature_graph(&cohort, &vocab, true).unwrap();
        assert_eq!(g.num_nodes(), 5);
        assert_eq!(g.nodes()[3].name, "A");
        assert_eq!(g.features().row(3), &[1.0, 1.0, 0.0]);
        assert_eq!(g.features().row(1), &[0.0, 1.0, 0.0]);
        assert_eq!(g.labels()[3], Some(CancerType::Lung.index()));
        assert_eq!(g.labels()[0], None);
        assert_eq!(g.neighbors(3), &[0, 1]);
    }

    #[test]
    fn empty_patients_are_skipped() {
        let cohort = vec![patient("A", &["p1"], &["g1"]), patient("Z", &["pain"], &[])];
        let vocab = build_vocabulary(&cohort, &permissive()).unwrap();
        let g = build_feature_graph(&cohort, &vocab, true).unwrap();
        assert_eq!(g.skipped_patients(), &["Z".to_string()]);
        assert_eq!(g.patient_nodes().len(), 1);
    }

    #[test]
    fn empty_vocab_is_config_error() {
        let cohort = vec![patient("A", &["p1"], &["g1"])];
        let vocab = build_vocabulary(&cohort, &VocabularyConfig::default()).unwrap();
        assert!(matches!(
            build_feature_graph(&cohort, &vocab, true),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn rejects_bad_edges() {
        let x = Tensor::identity(3);
        assert!(FeatureGraph::unlabeled(3, &[(0, 0)], x.clone()).is_err());
        assert!(FeatureGraph::unlabeled(3, &[(0, 1), (1, 0)], x.clone()).is_err());
        assert!(FeatureGraph::unlabeled(3, &[(0, 3)], x).is_err());
    }

    #[test]
    fn identity_permutation_is_noop() {
        let g = FeatureGraph::unlabeled(3, &[(0, 1), (1, 2)], Tensor::identity(3)).unwrap();
        assert_eq!(permute_graph(&g, &[0, 1, 2]).unwrap(), g);
        assert!(permute_graph(&g, &[0, 0, 1]).is_err());
        assert!(permute_graph(&g, &[0, 1]).is_err());
    }

    #[test]
    fn export_formats() {
        let g = FeatureGraph::unlabeled(2, &[(1, 0)], Tensor::identity(2)).unwrap();
        assert_eq!(g.export_edges_tsv(), "0\t1\n");
        assert_eq!(g.export_nodes_tsv(), "0\tpatient\tn0\n1\tpatient\tn1\n");
    }
}
