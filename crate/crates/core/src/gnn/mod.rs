//! The eight graph neural network operators and their training loop.

mod config;
mod context;
mod model;
mod train;

pub use config::{Activation, GinAggregation, ModelConfig, Operator};
pub use context::{EdgeIndex, GraphContext};
pub use model::{agnn_propagation_weights, gin_readout, GnnModel, Mode, ATTENTION_SLOPE};
pub use train::{predict, train_model, EpochRecord, Prediction, TrainedModel};

impl crate::checkpoint::Checkpoint for GnnModel {
    fn model_kind(&self) -> String {
        self.operator().key().to_string()
    }
}
