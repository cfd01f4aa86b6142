//! Minimal dense-network engine: forward pass, reverse-mode gradients,
//! mini-batch training and a JSON model document.

mod model;
mod network;
mod train;

pub use model::{ModelDocument, ModelMetadata, StandardizedNetwork, Standardizer};
pub use network::{Activation, DenseNetwork, Gradients, Layer, Trace};
pub use train::{
    mean_loss, train, Axis, Dataset, LossHistory, Optimizer, OptimizerState, TrainConfig,
};
