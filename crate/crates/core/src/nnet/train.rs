use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{DenseNetwork, Gradients};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Optimizer {
    Sgd,
    Adam {
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Regression-loss weights `(w_x, w_y, w_z)`.
    pub axis_weights: [f64; 3],
    /// Fraction of examples (taken chronologically from the front) used for training.
    pub split: f64,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            epochs: 100,
            batch_size: 32,
            seed: 0,
            axis_weights: [1.0, 1.0, 2.0],
            split: 0.8,
            optimizer: Optimizer::Sgd,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::Config(format!(
                "learning rate {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        let [wx, wy, wz] = self.axis_weights;
        if [wx, wy, wz].iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Config(format!(
                "axis weights {:?}",
                self.axis_weights
            )));
        }
        if wz < wx || wz < wy {
            return Err(Error::Config(format!(
                "z-axis weight {wz} must not be below the horizontal weights"
            )));
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::Config(format!(
                "split {} must lie in (0, 1)",
                self.split
            )));
        }
        Ok(())
    }
}

/// Spatial axis an output refers to, used to pick its loss weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X = 0,
    Y = 1,
    Z = 2,
}

/// Chronologically ordered regression examples.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
    /// Axis of each target column.
    pub output_axes: Vec<Axis>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn output_weights(&self, axis_weights: &[f64; 3]) -> Vec<f64> {
        self.output_axes
            .iter()
            .map(|a| axis_weights[*a as usize])
            .collect()
    }

    /// Index where the validation tail begins.
    pub fn split_index(&self, split: f64) -> usize {
        let n = self.len();
        ((n as f64 * split).round() as usize).clamp(1, n.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LossHistory {
    pub train: Vec<f64>,
    pub validation: Vec<f64>,
}

/// Mean weighted loss over `range` of the dataset.
pub fn mean_loss(
    net: &DenseNetwork,
    data: &Dataset,
    idx: &[usize],
    weights: &[f64],
) -> Result<f64> {
    if idx.is_empty() {
        return Ok(f64::NAN);
    }
    let mut total = 0.0;
    for &i in idx {
        total += net.weighted_loss(&data.inputs[i], &data.targets[i], weights)?;
    }
    Ok(total / idx.len() as f64)
}

/// Parameter update rule shared by every trainer in the crate.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    kind: Optimizer,
    learning_rate: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl OptimizerState {
    pub fn new(kind: Optimizer, learning_rate: f64, n_params: usize) -> Self {
        let (m, v) = match kind {
            Optimizer::Sgd => (Vec::new(), Vec::new()),
            Optimizer::Adam { .. } => (vec![0.0; n_params], vec![0.0; n_params]),
        };
        Self {
            kind,
            learning_rate,
            step: 0,
            m,
            v,
        }
    }

    pub fn apply(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step += 1;
        let lr = self.learning_rate;
        match self.kind {
            Optimizer::Sgd => params.iter_mut().zip(grad).for_each(|(p, g)| *p -= lr * g),
            Optimizer::Adam {
                beta1,
                beta2,
                epsilon,
            } => {
                let c1 = 1.0 - beta1.powi(self.step as i32);
                let c2 = 1.0 - beta2.powi(self.step as i32);
                for i in 0..params.len() {
                    self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * grad[i];
                    self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * grad[i] * grad[i];
                    let mh = self.m[i] / c1;
                    let vh = self.v[i] / c2;
                    params[i] -= lr * mh / (vh.sqrt() + epsilon);
                }
            }
        }
    }
}

/// Mini-batch training with seeded shuffling of the training portion.
/// Returns per-epoch mean training and validation loss.
pub fn train(net: &mut DenseNetwork, data: &Dataset, cfg: &TrainConfig) -> Result<LossHistory> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InsufficientData("empty training set".into()));
    }
    if data.targets.len() != data.len() || data.output_axes.len() != net.output_size() {
        return Err(Error::Dimension {
            expected: net.output_size(),
            got: data.output_axes.len(),
        });
    }
    let weights = data.output_weights(&cfg.axis_weights);
    let cut = data.split_index(cfg.split);
    let mut train_idx: Vec<usize> = (0..cut).collect();
    let val_idx: Vec<usize> = (cut..data.len()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = OptimizerState::new(cfg.optimizer, cfg.learning_rate, net.parameter_count());
    let mut history = LossHistory::default();
    let mut params = net.parameters();

    for epoch in 0..cfg.epochs {
        train_idx.shuffle(&mut rng);
        for batch in train_idx.chunks(cfg.batch_size) {
            let mut grads = Gradients::zeros_like(net);
            for &i in batch {
                net.accumulate_weighted_loss(
                    &data.inputs[i],
                    &data.targets[i],
                    &weights,
                    &mut grads,
                )?;
            }
            grads.scale(1.0 / batch.len() as f64);
            let flat = grads.flatten();
            opt.apply(&mut params, &flat);
            net.set_parameters(&params)?;
        }
        let mut sorted = train_idx.clone();
        sorted.sort_unstable();
        let tl = mean_loss(net, data, &sorted, &weights)?;
        let vl = mean_loss(net, data, &val_idx, &weights)?;
        if !tl.is_finite() || !params.iter().all(|p| p.is_finite()) {
            return Err(Error::Diverged {
                epoch,
                reason: format!("training loss {tl}"),
            });
        }
        history.train.push(tl);
        history.validation.push(vl);
    }
    Ok(history)
}
