use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::binary::{argmax, check_labels, BinaryMatrix};
use super::tree::{check_width, fit_tree_on, DecisionTree, MaxFeatures, TreeConfig};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::util::{derive_seed, rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: None,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
    pub n_classes: usize,
    pub n_features: usize,
}

impl RandomForest {
    /// Trees are fit in parallel; tree `i` draws everything from its own
    /// stream of `seed`, so the result does not depend on scheduling.
    pub fn fit(x: &Tensor, y: &[usize], n_classes: usize, config: &ForestConfig) -> Result<Self> {
        if config.n_trees == 0 {
            return Err(Error::config("forest needs at least one tree"));
        }
        let bx = BinaryMatrix::from_tensor(x)?;
        let m = bx.rows();
        if m == 0 {
            return Err(Error::usage("cannot fit a forest on zero samples"));
        }
        check_labels(y, m, n_classes)?;
        let trees = (0..config.n_trees)
            .into_par_iter()
            .map(|t| {
                let seed = derive_seed(config.seed, t as u64);
                let idx: Vec<usize> = if config.bootstrap {
                    let mut r = rng(derive_seed(seed, 0));
                    (0..m).map(|_| r.gen_range(0..m)).collect()
                } else {
                    (0..m).collect()
                };
                let tc = TreeConfig {
                    max_depth: config.max_depth,
                    max_features: config.max_features,
                    seed: derive_seed(seed, 1),
                };
                DecisionTree {
                    root: fit_tree_on(&bx, y, &idx, n_classes, &tc),
                    n_classes,
                    n_features: bx.n_features(),
                }
            })
            .collect();
        Ok(RandomForest {
            trees,
            n_classes,
            n_features: bx.n_features(),
        })
    }

    fn votes(&self, row: &[f64]) -> Vec<usize> {
        let mut v = vec![0; self.n_classes];
        for t in &self.trees {
            v[argmax(t.leaf_counts(row))] += 1;
        }
        v
    }

    /// Vote fractions.
    pub fn predict_proba(&self, x: &Tensor) -> Result<Tensor> {
        check_width(x, self.n_features)?;
        let n = self.trees.len() as f64;
        let mut out = Vec::with_capacity(x.rows() * self.n_classes);
        for r in 0..x.rows() {
            out.extend(self.votes(x.row(r)).iter().map(|&v| v as f64 / n));
        }
        Tensor::new(vec![x.rows(), self.n_classes], out)
    }

    /// Majority vote; ties go to the lowest class index.
    pub fn predict(&self, x: &Tensor) -> Result<Vec<usize>> {
        check_width(x, self.n_features)?;
        Ok((0..x.rows()).map(|r| argmax(&self.votes(x.row(r)))).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> (Tensor, Vec<usize>) {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..40 {
            let c = i % 3;
            let mut r = vec![0.0; 6];
            r[c] = 1.0;
            r[3 + (i % 2)] = 1.0;
            rows.push(r);
            y.push(c);
        }
        (Tensor::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn single_tree_without_bootstrap_matches_tree() {
        let (x, y) = data();
        let cfg = ForestConfig {
            n_trees: 1,
            bootstrap: false,
            max_features: MaxFeatures::All,
            ..ForestConfig::default()
        };
        let f = RandomForest::fit(&x, &y, 3, &cfg).unwrap();
        let t = DecisionTree::fit(&x, &y, 3, &TreeConfig::default()).unwrap();
        assert_eq!(f.predict(&x).unwrap(), t.predict(&x).unwrap());
        assert_eq!(f.trees[0].root, t.root);
    }

    #[test]
    fn deterministic() {
        let (x, y) = data();
        let cfg = ForestConfig {
            n_trees: 10,
            seed: 9,
            ..ForestConfig::default()
        };
        let a = RandomForest::fit(&x, &y, 3, &cfg).unwrap();
        let b = RandomForest::fit(&x, &y, 3, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_trees_is_config_error() {
        let (x, y) = data();
        let cfg = ForestConfig {
            n_trees: 0,
            ..ForestConfig::default()
        };
        assert!(matches!(RandomForest::fit(&x, &y, 3, &cfg), Err(Error::Config(_))));
    }
}
