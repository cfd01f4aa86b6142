use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::network::{Activation, DenseNetwork, Layer};
use super::train::{train, Dataset, LossHistory, TrainConfig};
use crate::error::{Error, Result};

/// Per-feature affine scaling `(x − mean) / std`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn identity(n: usize) -> Self {
        Self {
            mean: vec![0.0; n],
            std: vec![1.0; n],
        }
    }

    /// Column statistics over `rows`; constant columns get unit scale.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::InsufficientData("no rows to standardize".into()))?;
        let n = first.len();
        let count = rows.len() as f64;
        let mut mean = vec![0.0; n];
        for r in rows {
            if r.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: r.len(),
                });
            }
            mean.iter_mut().zip(r).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= count);
        let mut var = vec![0.0; n];
        for r in rows {
            var.iter_mut()
                .zip(r.iter().zip(&mean))
                .for_each(|(s, (v, m))| *s += (v - m).powi(2));
        }
        let std = var
            .into_iter()
            .map(|s| (s / count).sqrt())
            .map(|s| if s > 1e-12 { s } else { 1.0 })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn invert(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }
}

/// A network operating in standardized input and output coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedNetwork {
    pub network: DenseNetwork,
    pub input: Standardizer,
    pub output: Standardizer,
    pub metadata: ModelMetadata,
}

impl StandardizedNetwork {
    pub fn new(network: DenseNetwork) -> Self {
        let (ni, no) = (network.input_size(), network.output_size());
        Self {
            network,
            input: Standardizer::identity(ni),
            output: Standardizer::identity(no),
            metadata: ModelMetadata::default(),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        let z = self.network.forward(&self.input.apply(x))?;
        Ok(self.output.invert(&z))
    }

    /// Fits both standardizers on the training portion, then trains.
    pub fn fit(&mut self, data: &Dataset, cfg: &TrainConfig) -> Result<LossHistory> {
        if data.is_empty() {
            return Err(Error::InsufficientData("empty training set".into()));
        }
        let cut = data.split_index(cfg.split);
        self.input = Standardizer::fit(&data.inputs[..cut])?;
        self.output = Standardizer::fit(&data.targets[..cut])?;
        let scaled = Dataset {
            inputs: data.inputs.iter().map(|x| self.input.apply(x)).collect(),
            targets: data.targets.iter().map(|y| self.output.apply(y)).collect(),
            output_axes: data.output_axes.clone(),
        };
        let history = train(&mut self.network, &scaled, cfg)?;
        self.metadata.seed = cfg.seed;
        self.metadata.epochs = cfg.epochs;
        Ok(history)
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            layer_sizes: self.network.layer_sizes(),
            activations: self.network.layers.iter().map(|l| l.activation).collect(),
            weights: self
                .network
                .layers
                .iter()
                .map(|l| l.weights.clone())
                .collect(),
            biases: self
                .network
                .layers
                .iter()
                .map(|l| l.biases.clone())
                .collect(),
            input_mean: self.input.mean.clone(),
            input_std: self.input.std.clone(),
            output_mean: self.output.mean.clone(),
            output_std: self.output.std.clone(),
            metadata: self.metadata.clone(),
        }
    }

    pub fn from_document(doc: ModelDocument) -> Result<Self> {
        let n = doc.layer_sizes.len();
        if n < 2
            || doc.activations.len() != n - 1
            || doc.weights.len() != n - 1
            || doc.biases.len() != n - 1
        {
            return Err(Error::Config(
                "model document layer counts are inconsistent".into(),
            ));
        }
        let layers = (0..n - 1)
            .map(|i| Layer {
                inputs: doc.layer_sizes[i],
                outputs: doc.layer_sizes[i + 1],
                weights: doc.weights[i].clone(),
                biases: doc.biases[i].clone(),
                activation: doc.activations[i],
            })
            .collect();
        let network = DenseNetwork::from_layers(layers)?;
        let input = Standardizer {
            mean: doc.input_mean,
            std: doc.input_std,
        };
        let output = Standardizer {
            mean: doc.output_mean,
            std: doc.output_std,
        };
        if input.len() != network.input_size() || input.std.len() != input.len() {
            return Err(Error::Dimension {
                expected: network.input_size(),
                got: input.len(),
            });
        }
        if output.len() != network.output_size() || output.std.len() != output.len() {
            return Err(Error::Dimension {
                expected: network.output_size(),
                got: output.len(),
            });
        }
        Ok(Self {
            network,
            input,
            output,
            metadata: doc.metadata,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.to_document()).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: ModelDocument =
            serde_json::from_str(s).map_err(|e| Error::Config(format!("model JSON: {e}")))?;
        Self::from_document(doc)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub seed: u64,
    pub epochs: usize,
    /// Free-form tags (sensor kind, window length, feature flags).
    #[serde(flatten)]
    pub tags: BTreeMap<String, serde_json::Value>,
}

/// On-disk model layout. Weights are row-major per layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub layer_sizes: Vec<usize>,
    pub activations: Vec<Activation>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub input_mean: Vec<f64>,
    pub input_std: Vec<f64>,
    pub output_mean: Vec<f64>,
    pub output_std: Vec<f64>,
    pub metadata: ModelMetadata,
}
