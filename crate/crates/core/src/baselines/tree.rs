use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::binary::{argmax, check_labels, BinaryMatrix};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::util::rng;

/// Binary split tree. `left` holds samples with the feature off, `right`
/// with it on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        counts: Vec<usize>,
    },
    Split {
        feature: usize,
        counts: Vec<usize>,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn counts(&self) -> &[usize] {
        match self {
            TreeNode::Leaf { counts } | TreeNode::Split { counts, .. } => counts,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }

    fn leaf_for(&self, row: &[f64]) -> &[usize] {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { counts } => return counts,
                TreeNode::Split {
                    feature,
                    left,
                    right,
                    ..
                } => node = if row[*feature] == 1.0 { right } else { left },
            }
        }
    }
}

/// How many features a split may look at.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    #[default]
    All,
    /// `ceil(sqrt(F))` drawn afresh at every split.
    Sqrt,
    Count(usize),
}

impl MaxFeatures {
    pub(crate) fn resolve(self, f: usize) -> usize {
        match self {
            MaxFeatures::All => f,
            MaxFeatures::Sqrt => ((f as f64).sqrt().ceil() as usize).clamp(1, f.max(1)),
            MaxFeatures::Count(k) => k.clamp(1, f.max(1)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeConfig {
    #[serde(default)]
    pub max_depth: Option<usize>,
    #[serde(default)]
    pub max_features: MaxFeatures,
    #[serde(default)]
    pub seed: u64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: None,
            max_features: MaxFeatures::All,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub root: TreeNode,
    pub n_classes: usize,
    pub n_features: usize,
}

pub fn gini(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

/// Smallest useful gain, and the margin by which a later feature must beat an
/// earlier one so that rounding noise never breaks a tie.
const MIN_GAIN: f64 = 1e-12;

struct Builder<'a> {
    x: &'a BinaryMatrix,
    y: &'a [usize],
    n_classes: usize,
    config: &'a TreeConfig,
    rng: ChaCha8Rng,
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        idx.iter().for_each(|&i| c[self.y[i]] += 1);
        c
    }

    fn candidates(&mut self) -> Vec<usize> {
        let f = self.x.n_features();
        let k = self.config.max_features.resolve(f);
        if k >= f {
            return (0..f).collect();
        }
        let mut picked = sample(&mut self.rng, f, k).into_vec();
        picked.sort_unstable();
        picked
    }

    fn build(&mut self, idx: &[usize], depth: usize) -> TreeNode {
        let counts = self.counts(idx);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || self.config.max_depth.is_some_and(|d| depth >= d) || idx.len() < 2 {
            return TreeNode::Leaf { counts };
        }
        let parent = gini(&counts);
        let n = idx.len() as f64;
        let mut best: Option<(usize, f64)> = None;
        for f in self.candidates() {
            let col = self.x.column(f);
            let mut on = vec![0usize; self.n_classes];
            for &i in idx {
                if col[i] {
                    on[self.y[i]] += 1;
                }
            }
            let n_on: usize = on.iter().sum();
            if n_on == 0 || n_on == idx.len() {
                continue;
            }
            let off: Vec<usize> = counts.iter().zip(&on).map(|(a, b)| a - b).collect();
            let child = (n_on as f64 * gini(&on) + (idx.len() - n_on) as f64 * gini(&off)) / n;
            let gain = parent - child;
            if gain > MIN_GAIN && best.map_or(true, |(_, g)| gain > g + MIN_GAIN) {
                best = Some((f, gain));
            }
        }
        let Some((feature, _)) = best else {
            return TreeNode::Leaf { counts };
        };
        let (r, l): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x.get(i, feature));
        let left = Box::new(self.build(&l, depth + 1));
        let right = Box::new(self.build(&r, depth + 1));
        TreeNode::Split {
            feature,
            counts,
            left,
            right,
        }
    }
}

pub(crate) fn fit_tree_on(
    x: &BinaryMatrix,
    y: &[usize],
    idx: &[usize],
    n_classes: usize,
    config: &TreeConfig,
) -> TreeNode {
    let mut b = Builder {
        x,
        y,
        n_classes,
        config,
        rng: rng(config.seed),
    };
    b.build(idx, 0)
}

impl DecisionTree {
    /// Greedy Gini partitioning on binary features. Among equally good
    /// splits the lowest feature index wins.
    pub fn fit(x: &Tensor, y: &[usize], n_classes: usize, config: &TreeConfig) -> Result<Self> {
        let bx = BinaryMatrix::from_tensor(x)?;
        if bx.rows() == 0 {
            return Err(Error::usage("cannot fit a tree on zero samples"));
        }
        check_labels(y, bx.rows(), n_classes)?;
        let idx: Vec<usize> = (0..bx.rows()).collect();
        Ok(DecisionTree {
            root: fit_tree_on(&bx, y, &idx, n_classes, config),
            n_classes,
            n_features: bx.n_features(),
        })
    }

    /// Feature tested at the root, if the tree split at all.
    pub fn root_feature(&self) -> Option<usize> {
        match &self.root {
            TreeNode::Split { feature, .. } => Some(*feature),
            TreeNode::Leaf { .. } => None,
        }
    }

    /// Leaf class frequencies.
    pub fn predict_proba(&self, x: &Tensor) -> Result<Tensor> {
        check_width(x, self.n_features)?;
        let mut out = Vec::with_capacity(x.rows() * self.n_classes);
        for r in 0..x.rows() {
            let counts = self.root.leaf_for(x.row(r));
            let total: usize = counts.iter().sum();
            out.extend(counts.iter().map(|&c| c as f64 / total as f64));
        }
        Tensor::new(vec![x.rows(), self.n_classes], out)
    }

    pub fn predict(&self, x: &Tensor) -> Result<Vec<usize>> {
        check_width(x, self.n_features)?;
        Ok((0..x.rows())
            .map(|r| argmax(self.root.leaf_for(x.row(r))))
            .collect())
    }

    pub(crate) fn leaf_counts(&self, row: &[f64]) -> &[usize] {
        self.root.leaf_for(row)
    }
}

pub(crate) fn check_width(x: &Tensor, f: usize) -> Result<()> {
    let (_, c) = x.require_matrix("feature matrix")?;
    if c != f {
        return Err(Error::dim(format!("model expects {f} features, got {c}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(r: &[&[f64]]) -> Tensor {
        Tensor::from_rows(&r.iter().map(|v| v.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn same_label_gives_leaf() {
        let x = rows(&[&[0.0, 1.0], &[1.0, 0.0], &[1.0, 1.0]]);
        let t = DecisionTree::fit(&x, &[2, 2, 2], 3, &TreeConfig::default()).unwrap();
        assert_eq!(t.root, TreeNode::Leaf { counts: vec![0, 0, 3] });
        assert_eq!(t.predict(&x).unwrap(), vec![2, 2, 2]);
    }

    #[test]
    fn separating_feature_gives_stump() {
        let x = rows(&[&[0.0, 1.0], &[0.0, 0.0], &[1.0, 1.0], &[1.0, 0.0]]);
        let y = [0, 0, 1, 1];
        let t = DecisionTree::fit(&x, &y, 2, &TreeConfig::default()).unwrap();
        assert_eq!(t.root_feature(), Some(0));
        assert_eq!(t.root.depth(), 1);
        assert_eq!(t.predict(&x).unwrap(), y.to_vec());
    }

    #[test]
    fn tie_goes_to_lowest_feature() {
        let x = rows(&[&[1.0, 1.0], &[0.0, 0.0]]);
        let t = DecisionTree::fit(&x, &[1, 0], 2, &TreeConfig::default()).unwrap();
        assert_eq!(t.root_feature(), Some(0));
    }

    #[test]
    fn depth_limit() {
        let x = rows(&[&[0.0, 0.0], &[0.0, 1.0], &[1.0, 0.0], &[1.0, 1.0]]);
        let cfg = TreeConfig {
            max_depth: Some(1),
            ..TreeConfig::default()
        };
        let t = DecisionTree::fit(&x, &[0, 1, 1, 0], 2, &cfg).unwrap();
        assert!(t.root.depth() <= 1);
    }

    #[test]
    fn rejects_empty_and_non_binary() {
        let empty = Tensor::zeros(&[0, 3]);
        assert!(matches!(
            DecisionTree::fit(&empty, &[], 2, &TreeConfig::default()),
            Err(Error::Usage(_))
        ));
        let x = rows(&[&[0.5]]);
        assert!(DecisionTree::fit(&x, &[0], 2, &TreeConfig::default()).is_err());
    }

    #[test]
    fn gini_values() {
        assert_eq!(gini(&[5, 0]), 0.0);
        assert_eq!(gini(&[1, 1]), 0.5);
    }
}
