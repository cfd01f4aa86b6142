//! Attention-based multimodal fusion with adaptive covariance, followed by
//! an unscented Kalman filter.
//!
//! Per fusion epoch, each modality contributes a position estimate, per-axis
//! standard deviations and two reliability scores. A window of the last `L`
//! estimates per modality is encoded into an embedding; per-axis attention
//! over the embeddings gives convex fusion ratios, which weight both the
//! fused position and its covariance. The barometer only takes part in the
//! `up` axis.

mod attention;
mod bundle;
mod pipeline;
mod train;
mod ukf;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

pub use attention::{
    attention_logits, fuse, fuse_axis, fusion_ratios, softmax, AttentionParams, FusionInput,
    FusionNetwork, FusionTrace,
};
pub use bundle::{FusionBundle, BUNDLE_FORMAT, BUNDLE_VERSION};
pub use pipeline::{amfa_pipeline, AmfaOutput};
pub use train::{build_fusion_inputs, fusion_input, train_fusion, FusionExample};
pub use ukf::{ukf_step, SigmaWeights, UkfConfig, UkfState};

use crate::error::{Error, Result};
use crate::nnet::{Optimizer, TrainConfig};

pub const MODALITIES: usize = 3;
pub const AXES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Modality {
    Uwb,
    GpsIns,
    Baro,
}

impl Modality {
    pub const ALL: [Modality; MODALITIES] = [Modality::Uwb, Modality::GpsIns, Modality::Baro];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Modality::Uwb => "uwb",
            Modality::GpsIns => "gps-ins",
            Modality::Baro => "baro",
        }
    }

    /// The barometer only measures `up`.
    pub fn observes(self, axis: usize) -> bool {
        self != Modality::Baro || axis == 2
    }

    /// Encoder features per window step: estimate relative to the epoch's
    /// reference point plus σ, on the axes the modality observes.
    pub fn feature_width(self) -> usize {
        match self {
            Modality::Baro => 2,
            _ => 6,
        }
    }
}

/// One modality's contribution at a fusion epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModalityObservation {
    pub estimate: Vector3<f64>,
    pub sigma: Vector3<f64>,
    /// Hand-computed reliability scores, both finite and non-negative.
    pub reliability: [f64; 2],
}

/// All modality contributions at one fusion epoch; `None` is absent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionFrame {
    pub t: f64,
    pub observations: [Option<ModalityObservation>; MODALITIES],
}

/// Output of the fusion rule at one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusedObservation {
    pub t: f64,
    pub position: Vector3<f64>,
    /// Diagonal of the adaptive covariance, m².
    pub covariance: Vector3<f64>,
    /// `ratios[axis][modality]`, zero where a modality does not take part.
    pub ratios: [[f64; MODALITIES]; AXES],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    /// Encoder window length `L`.
    pub window: usize,
    pub hidden: usize,
    pub embedding_dim: usize,
    pub key_dim: usize,
    /// Weight of the inter-modality divergence term in the covariance.
    pub lambda: f64,
    /// Initial prior bias of the barometer on `up`.
    pub baro_prior: f64,
    pub sigma_min: f64,
    /// σ multiplier applied to the GPS/INS fallback during warm-up.
    pub warmup_inflation: f64,
    pub train: TrainConfig,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            window: 10,
            hidden: 64,
            embedding_dim: 32,
            key_dim: 16,
            lambda: 1.0,
            baro_prior: std::f64::consts::LN_2,
            sigma_min: crate::fcnn::DEFAULT_SIGMA_MIN,
            warmup_inflation: 3.0,
            train: TrainConfig {
                learning_rate: 1e-3,
                epochs: 40,
                batch_size: 32,
                optimizer: Optimizer::adam(),
                ..TrainConfig::default()
            },
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.hidden == 0 || self.embedding_dim == 0 || self.key_dim == 0 {
            return Err(Error::Config(
                "fusion window and layer sizes must be positive".into(),
            ));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!(
                "lambda must be non-negative, got {}",
                self.lambda
            )));
        }
        if !(self.sigma_min > 0.0) || !(self.warmup_inflation >= 1.0) {
            return Err(Error::Config(
                "sigma_min must be positive and warmup_inflation ≥ 1".into(),
            ));
        }
        self.train.validate()
    }
}
