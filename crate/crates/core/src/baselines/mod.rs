//! Classical comparators trained on the patients' multi-hot vectors.

mod bayes;
mod binary;
mod boost;
mod forest;
mod mlp;
mod tree;

use serde::{Deserialize, Serialize};

pub use bayes::NaiveBayes;
pub use boost::{softmax_residuals, BoostConfig, GradientBoosting, RegressionNode};
pub use forest::{ForestConfig, RandomForest};
pub use mlp::{Mlp, MlpConfig};
pub use tree::{gini, DecisionTree, MaxFeatures, TreeConfig, TreeNode};

use crate::autodiff::Tensor;
use crate::checkpoint::Checkpoint;
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    DecisionTree,
    GradientBoosting,
    Mlp,
    NaiveBayes,
    RandomForest,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 5] = [
        BaselineKind::DecisionTree,
        BaselineKind::GradientBoosting,
        BaselineKind::Mlp,
        BaselineKind::NaiveBayes,
        BaselineKind::RandomForest,
    ];

    pub fn key(self) -> &'static str {
        match self {
            BaselineKind::DecisionTree => "decision-tree",
            BaselineKind::GradientBoosting => "gradient-boosting",
            BaselineKind::Mlp => "mlp",
            BaselineKind::NaiveBayes => "naive-bayes",
            BaselineKind::RandomForest => "random-forest",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            BaselineKind::DecisionTree => "Decision Tree",
            BaselineKind::GradientBoosting => "Gradient Boosting",
            BaselineKind::Mlp => "Multi-layer Perceptron",
            BaselineKind::NaiveBayes => "Naive Bayes",
            BaselineKind::RandomForest => "Random Forest",
        }
    }

    pub fn from_key(s: &str) -> Option<Self> {
        let s = s.to_ascii_lowercase().replace('_', "-");
        let alias = match s.as_str() {
            "tree" | "dt" => Some(BaselineKind::DecisionTree),
            "gboost" | "gb" | "boosting" => Some(BaselineKind::GradientBoosting),
            "nb" | "bayes" => Some(BaselineKind::NaiveBayes),
            "rf" | "forest" => Some(BaselineKind::RandomForest),
            _ => None,
        };
        alias.or_else(|| BaselineKind::ALL.into_iter().find(|k| k.key() == s))
    }
}

/// Hyperparameters for every baseline.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub tree: TreeConfig,
    pub forest: ForestConfig,
    pub boost: BoostConfig,
    pub mlp: MlpConfig,
}

/// Any fitted baseline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Baseline {
    DecisionTree(DecisionTree),
    GradientBoosting(GradientBoosting),
    Mlp(Mlp),
    NaiveBayes(NaiveBayes),
    RandomForest(RandomForest),
}

impl Baseline {
    /// Fits `kind`. Every seeded component derives from `seed`; the MLP
    /// uses the validation split for early stopping.
    #[allow(clippy::too_many_arguments)]
    pub fn fit(
        kind: BaselineKind,
        config: &BaselineConfig,
        x_train: &Tensor,
        y_train: &[usize],
        x_val: &Tensor,
        y_val: &[usize],
        n_classes: usize,
        seed: u64,
    ) -> Result<Self> {
        Ok(match kind {
            BaselineKind::DecisionTree => {
                let c = TreeConfig {
                    seed,
                    ..config.tree.clone()
                };
                Baseline::DecisionTree(DecisionTree::fit(x_train, y_train, n_classes, &c)?)
            }
            BaselineKind::RandomForest => {
                let c = ForestConfig {
                    seed,
                    ..config.forest.clone()
                };
                Baseline::RandomForest(RandomForest::fit(x_train, y_train, n_classes, &c)?)
            }
            BaselineKind::GradientBoosting => Baseline::GradientBoosting(GradientBoosting::fit(
                x_train,
                y_train,
                n_classes,
                &config.boost,
            )?),
            BaselineKind::NaiveBayes => Baseline::NaiveBayes(NaiveBayes::fit(x_train, y_train, n_classes)?),
            BaselineKind::Mlp => {
                let c = MlpConfig {
                    seed,
                    ..config.mlp.clone()
                };
                Baseline::Mlp(Mlp::fit(x_train, y_train, x_val, y_val, n_classes, &c)?)
            }
        })
    }

    pub fn kind(&self) -> BaselineKind {
        match self {
            Baseline::DecisionTree(_) => BaselineKind::DecisionTree,
            Baseline::GradientBoosting(_) => BaselineKind::GradientBoosting,
            Baseline::Mlp(_) => BaselineKind::Mlp,
            Baseline::NaiveBayes(_) => BaselineKind::NaiveBayes,
            Baseline::RandomForest(_) => BaselineKind::RandomForest,
        }
    }

    pub fn predict_proba(&self, x: &Tensor) -> Result<Tensor> {
        match self {
            Baseline::DecisionTree(m) => m.predict_proba(x),
            Baseline::GradientBoosting(m) => m.predict_proba(x),
            Baseline::Mlp(m) => m.predict_proba(x),
            Baseline::NaiveBayes(m) => m.predict_proba(x),
            Baseline::RandomForest(m) => m.predict_proba(x),
        }
    }

    pub fn predict(&self, x: &Tensor) -> Result<Vec<usize>> {
        match self {
            Baseline::DecisionTree(m) => m.predict(x),
            Baseline::GradientBoosting(m) => m.predict(x),
            Baseline::Mlp(m) => m.predict(x),
            Baseline::NaiveBayes(m) => m.predict(x),
            Baseline::RandomForest(m) => m.predict(x),
        }
    }
}

impl Checkpoint for Baseline {
    fn model_kind(&self) -> String {
        self.kind().key().to_string()
    }
}
