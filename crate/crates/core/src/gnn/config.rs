use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::NUM_CLASSES;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Operator {
    Agnn,
    Cheb,
    Gcn,
    Gat,
    Gin,
    Sage,
    Sgc,
    Tagcn,
}

impl Operator {
    pub const ALL: [Operator; 8] = [
        Operator::Agnn,
        Operator::Cheb,
        Operator::Gcn,
        Operator::Gat,
        Operator::Gin,
        Operator::Sage,
        Operator::Sgc,
        Operator::Tagcn,
    ];

    /// Short lowercase identifier used on the command line and in files.
    pub fn key(self) -> &'static str {
        match self {
            Operator::Agnn => "agnn",
            Operator::Cheb => "chebnet",
            Operator::Gcn => "gcn",
            Operator::Gat => "gat",
            Operator::Gin => "gin",
            Operator::Sage => "graphsage",
            Operator::Sgc => "sgc",
            Operator::Tagcn => "tagcn",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Operator::Agnn => "AGNN",
            Operator::Cheb => "ChebNet",
            Operator::Gcn => "GCN",
            Operator::Gat => "GAT",
            Operator::Gin => "GIN",
            Operator::Sage => "GraphSAGE",
            Operator::Sgc => "SGC",
            Operator::Tagcn => "TAGCN",
        }
    }

    pub fn from_key(s: &str) -> Option<Self> {
        let s = s.to_ascii_lowercase();
        Operator::ALL
            .into_iter()
            .find(|o| o.key() == s || (s == "cheb" && *o == Operator::Cheb) || (s == "sage" && *o == Operator::Sage))
    }

    /// Polynomial order used when the config leaves it unset.
    pub fn default_order(self) -> usize {
        match self {
            Operator::Cheb => 3,
            Operator::Tagcn | Operator::Sgc => 2,
            _ => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    #[default]
    Relu,
    Elu,
    LeakyRelu,
    Tanh,
    Sigmoid,
    Identity,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GinAggregation {
    #[default]
    Mean,
    Sum,
}

fn default_hidden() -> usize {
    64
}
fn default_layers() -> usize {
    2
}
fn default_heads() -> usize {
    8
}
fn default_true() -> bool {
    true
}
fn default_lr() -> f64 {
    0.01
}
fn default_wd() -> f64 {
    5e-4
}
fn default_epochs() -> usize {
    200
}
fn default_patience() -> usize {
    30
}
fn default_classes() -> usize {
    NUM_CLASSES
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub operator: Operator,
    #[serde(default = "default_hidden")]
    pub hidden_dim: usize,
    #[serde(default = "default_layers")]
    pub num_layers: usize,
    /// Polynomial order; `None` takes [`Operator::default_order`].
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default = "default_heads")]
    pub heads: usize,
    /// GAT hidden layers concatenate heads (otherwise they average).
    #[serde(default = "default_true")]
    pub concat_heads: bool,
    #[serde(default = "default_true")]
    pub epsilon_learnable: bool,
    #[serde(default)]
    pub gin_aggregation: GinAggregation,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default)]
    pub dropout: f64,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_wd")]
    pub weight_decay: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default = "default_classes")]
    pub n_classes: usize,
    #[serde(default)]
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(operator: Operator) -> Self {
        ModelConfig {
            operator,
            hidden_dim: default_hidden(),
            num_layers: default_layers(),
            k: None,
            heads: default_heads(),
            concat_heads: true,
            epsilon_learnable: true,
            gin_aggregation: GinAggregation::Mean,
            activation: Activation::Relu,
            dropout: 0.0,
            lr: default_lr(),
            weight_decay: default_wd(),
            epochs: default_epochs(),
            patience: default_patience(),
            n_classes: NUM_CLASSES,
            seed: 0,
        }
    }

    pub fn order(&self) -> usize {
        self.k.unwrap_or_else(|| self.operator.default_order())
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.hidden_dim >= 1, "hidden_dim must be at least 1"),
            (self.num_layers >= 1, "num_layers must be at least 1"),
            (self.order() >= 1, "K must be at least 1"),
            (self.heads >= 1, "heads must be at least 1"),
            (self.n_classes >= 2, "n_classes must be at least 2"),
            (self.lr > 0.0 && self.lr.is_finite(), "lr must be positive"),
            (
                self.weight_decay >= 0.0 && self.weight_decay.is_finite(),
                "weight_decay must be non-negative",
            ),
            ((0.0..1.0).contains(&self.dropout), "dropout must lie in [0,1)"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::config(format!("{}: {msg}", self.operator.key()))),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = ModelConfig::new(Operator::Cheb);
        assert_eq!((c.hidden_dim, c.num_layers, c.order(), c.heads), (64, 2, 3, 8));
        assert_eq!(ModelConfig::new(Operator::Tagcn).order(), 2);
        assert_eq!(ModelConfig::new(Operator::Sgc).order(), 2);
        assert_eq!((c.lr, c.weight_decay, c.epochs, c.patience), (0.01, 5e-4, 200, 30));
        c.validate().unwrap();
    }

    #[test]
    fn invalid_values() {
        let mut c = ModelConfig::new(Operator::Gcn);
        c.hidden_dim = 0;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = ModelConfig::new(Operator::Cheb);
        c.k = Some(0);
        assert!(c.validate().is_err());
        let mut c = ModelConfig::new(Operator::Gat);
        c.lr = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn keys_round_trip() {
        for op in Operator::ALL {
            assert_eq!(Operator::from_key(op.key()), Some(op));
        }
        assert_eq!(Operator::from_key("GraphSAGE"), Some(Operator::Sage));
        assert_eq!(Operator::from_key("mlp"), None);
    }

    #[test]
    fn json_defaults_fill_in() {
        let c: ModelConfig = serde_json::from_str(r#"{"operator":"gat","seed":3}"#).unwrap();
        assert_eq!(c.heads, 8);
        assert_eq!(c.seed, 3);
    }
}
