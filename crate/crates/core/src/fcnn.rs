//! Windowed end-to-end sensor models.
//!
//! Each model regresses the current value from the latest `k` raw
//! measurements and, as a second head, the error the classical solver makes
//! at the same instant. The error head is consumed as a magnitude and becomes
//! the modality's per-axis standard deviation downstream.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{AnchorPose, BaroSample, UwbMeasurement};
use crate::nnet::{
    Axis, Dataset, DenseNetwork, LossHistory, Optimizer, StandardizedNetwork, TrainConfig,
};
use crate::pose::{Algorithm, PoseEstimate};
use crate::sim::ScenarioData;
use crate::solvers::{uwb_geometric_solve, UwbNoise};
use crate::window::SlidingWindow;

pub const DEFAULT_SIGMA_MIN: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorKind {
    Uwb,
    Baro,
}

impl SensorKind {
    pub fn name(self) -> &'static str {
        match self {
            SensorKind::Uwb => "uwb",
            SensorKind::Baro => "baro",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FcnnConfig {
    pub window: usize,
    pub hidden: Vec<usize>,
    pub sigma_min: f64,
    /// Append the current classical solution to the UWB feature vector.
    pub include_geometric: bool,
    pub uwb_noise: UwbNoise,
    pub train: TrainConfig,
}

impl Default for FcnnConfig {
    fn default() -> Self {
        Self {
            window: 10,
            hidden: vec![64, 64],
            sigma_min: DEFAULT_SIGMA_MIN,
            include_geometric: true,
            uwb_noise: UwbNoise::default(),
            train: TrainConfig {
                learning_rate: 1e-3,
                epochs: 150,
                batch_size: 32,
                optimizer: Optimizer::adam(),
                ..TrainConfig::default()
            },
        }
    }
}

impl FcnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::Config("fcnn window must be at least 1".into()));
        }
        if !(self.sigma_min > 0.0 && self.sigma_min.is_finite()) {
            return Err(Error::Config(format!(
                "sigma_min must be positive, got {}",
                self.sigma_min
            )));
        }
        self.train.validate()
    }

    fn layer_sizes(&self, inputs: usize, outputs: usize) -> Vec<usize> {
        std::iter::once(inputs)
            .chain(self.hidden.iter().copied())
            .chain(std::iter::once(outputs))
            .collect()
    }
}

fn floored(v: f64, floor: f64) -> f64 {
    v.abs().max(floor)
}

fn uwb_features(
    window: &[&UwbMeasurement],
    anchor: &AnchorPose,
    include_geometric: bool,
    noise: &UwbNoise,
) -> Vec<f64> {
    let mut f = Vec::with_capacity(3 * window.len() + 3);
    for m in window {
        f.extend_from_slice(&[m.range, m.alpha, m.beta]);
    }
    if include_geometric {
        let current = window.last().expect("non-empty window");
        let geo = uwb_geometric_solve(current, anchor, noise).position;
        f.extend_from_slice(geo.as_slice());
    }
    f
}

fn baro_features(window: &[&BaroSample]) -> Vec<f64> {
    let mut f: Vec<f64> = window.iter().map(|s| s.pressure).collect();
    f.push(window.last().expect("non-empty window").internal_altitude);
    f
}

/// Output of the UWB model at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UwbInference {
    pub pose: PoseEstimate,
    /// Signed predicted error of the classical solution (truth − geometric).
    pub error_prediction: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UwbFcnnModel {
    pub net: StandardizedNetwork,
    pub window: usize,
    pub include_geometric: bool,
    pub sigma_min: f64,
    pub uwb_noise: UwbNoise,
}

impl UwbFcnnModel {
    pub fn input_size(window: usize, include_geometric: bool) -> usize {
        3 * window + if include_geometric { 3 } else { 0 }
    }

    pub fn new(cfg: &FcnnConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let sizes = cfg.layer_sizes(Self::input_size(cfg.window, cfg.include_geometric), 6);
        let mut net = StandardizedNetwork::new(DenseNetwork::init(&sizes, seed)?);
        net.metadata
            .tags
            .insert("sensor".into(), SensorKind::Uwb.name().into());
        net.metadata.tags.insert("window".into(), cfg.window.into());
        net.metadata
            .tags
            .insert("include_geometric".into(), cfg.include_geometric.into());
        net.metadata
            .tags
            .insert("sigma_min".into(), cfg.sigma_min.into());
        Ok(Self {
            net,
            window: cfg.window,
            include_geometric: cfg.include_geometric,
            sigma_min: cfg.sigma_min,
            uwb_noise: cfg.uwb_noise,
        })
    }

    pub fn from_network(net: StandardizedNetwork, uwb_noise: UwbNoise) -> Result<Self> {
        let tags = &net.metadata.tags;
        if tags.get("sensor").and_then(|v| v.as_str()) != Some(SensorKind::Uwb.name()) {
            return Err(Error::Config(
                "model file is not tagged as a uwb model".into(),
            ));
        }
        let window =
            tags.get("window")
                .and_then(|v| v.as_u64())
                .ok_or_else(|| Error::Config("missing window tag".into()))? as usize;
        let include_geometric = tags
            .get("include_geometric")
            .and_then(|v| v.as_bool())
            .unwrap_or(true);
        let sigma_min = tags
            .get("sigma_min")
            .and_then(|v| v.as_f64())
            .unwrap_or(DEFAULT_SIGMA_MIN);
        let expect = Self::input_size(window, include_geometric);
        if net.network.input_size() != expect || net.network.output_size() != 6 {
            return Err(Error::Dimension {
                expected: expect,
                got: net.network.input_size(),
            });
        }
        Ok(Self {
            net,
            window,
            include_geometric,
            sigma_min,
            uwb_noise,
        })
    }

    pub fn features(
        &self,
        window: &SlidingWindow<UwbMeasurement>,
        anchor: &AnchorPose,
    ) -> Result<Vec<f64>> {
        if window.len() < self.window {
            return Err(Error::NotReady {
                have: window.len(),
                need: self.window,
            });
        }
        let latest: Vec<&UwbMeasurement> = window.iter().skip(window.len() - self.window).collect();
        Ok(uwb_features(
            &latest,
            anchor,
            self.include_geometric,
            &self.uwb_noise,
        ))
    }

    pub fn infer(
        &self,
        window: &SlidingWindow<UwbMeasurement>,
        anchor: &AnchorPose,
    ) -> Result<UwbInference> {
        let features = self.features(window, anchor)?;
        let out = self.net.predict(&features)?;
        let t = window.latest().map(|m| m.t).unwrap_or_default();
        let error_prediction = Vector3::new(out[3], out[4], out[5]);
        Ok(UwbInference {
            pose: PoseEstimate {
                t,
                position: Vector3::new(out[0], out[1], out[2]),
                sigma: error_prediction.map(|e| floored(e, self.sigma_min)),
                source: Algorithm::UwbFcnn,
            },
            error_prediction,
        })
    }

    pub fn fit(&mut self, data: &Dataset, cfg: &TrainConfig) -> Result<LossHistory> {
        self.net.fit(data, cfg)
    }
}

/// Output of the barometer model at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaroInference {
    pub t: f64,
    pub altitude: f64,
    pub sigma_z: f64,
    /// Signed predicted error of the pressure-model altitude.
    pub error_prediction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaroFcnnModel {
    pub net: StandardizedNetwork,
    pub window: usize,
    pub sigma_min: f64,
}

impl BaroFcnnModel {
    pub fn new(cfg: &FcnnConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let sizes = cfg.layer_sizes(cfg.window + 1, 2);
        let mut net = StandardizedNetwork::new(DenseNetwork::init(&sizes, seed)?);
        net.metadata
            .tags
            .insert("sensor".into(), SensorKind::Baro.name().into());
        net.metadata.tags.insert("window".into(), cfg.window.into());
        net.metadata
            .tags
            .insert("sigma_min".into(), cfg.sigma_min.into());
        Ok(Self {
            net,
            window: cfg.window,
            sigma_min: cfg.sigma_min,
        })
    }

    pub fn from_network(net: StandardizedNetwork) -> Result<Self> {
        let tags = &net.metadata.tags;
        if tags.get("sensor").and_then(|v| v.as_str()) != Some(SensorKind::Baro.name()) {
            return Err(Error::Config(
                "model file is not tagged as a baro model".into(),
            ));
        }
        let window =
            tags.get("window")
                .and_then(|v| v.as_u64())
                .ok_or_else(|| Error::Config("missing window tag".into()))? as usize;
        let sigma_min = tags
            .get("sigma_min")
            .and_then(|v| v.as_f64())
            .unwrap_or(DEFAULT_SIGMA_MIN);
        if net.network.input_size() != window + 1 || net.network.output_size() != 2 {
            return Err(Error::Dimension {
                expected: window + 1,
                got: net.network.input_size(),
            });
        }
        Ok(Self {
            net,
            window,
            sigma_min,
        })
    }

    pub fn features(&self, window: &SlidingWindow<BaroSample>) -> Result<Vec<f64>> {
        if window.len() < self.window {
            return Err(Error::NotReady {
                have: window.len(),
                need: self.window,
            });
        }
        let latest: Vec<&BaroSample> = window.iter().skip(window.len() - self.window).collect();
        Ok(baro_features(&latest))
    }

    pub fn infer(&self, window: &SlidingWindow<BaroSample>) -> Result<BaroInference> {
        let out = self.net.predict(&self.features(window)?)?;
        Ok(BaroInference {
            t: window.latest().map(|s| s.t).unwrap_or_default(),
            altitude: out[0],
            sigma_z: floored(out[1], self.sigma_min),
            error_prediction: out[1],
        })
    }

    pub fn fit(&mut self, data: &Dataset, cfg: &TrainConfig) -> Result<LossHistory> {
        self.net.fit(data, cfg)
    }
}

/// One example per full window: features as the models build them, targets
/// `(truth, truth − classical solution)` at the window's newest timestamp.
pub fn build_training_set(
    scenario: &ScenarioData,
    which: SensorKind,
    cfg: &FcnnConfig,
) -> Result<Dataset> {
    let k = cfg.window;
    let mut data = Dataset::default();
    match which {
        SensorKind::Uwb => {
            if scenario.uwb.len() < k {
                return Err(Error::InsufficientData(format!(
                    "{} uwb samples for window {k}",
                    scenario.uwb.len()
                )));
            }
            data.output_axes = vec![Axis::X, Axis::Y, Axis::Z, Axis::X, Axis::Y, Axis::Z];
            let mut w = SlidingWindow::new(k)?;
            for m in &scenario.uwb {
                w.push(*m)?;
                if !w.is_full() {
                    continue;
                }
                let truth = scenario
                    .truth_at(m.t)
                    .ok_or_else(|| Error::InsufficientData(format!("no truth at t={}", m.t)))?;
                let window: Vec<&UwbMeasurement> = w.iter().collect();
                let geo = uwb_geometric_solve(m, &scenario.anchor, &cfg.uwb_noise).position;
                let err = truth.position - geo;
                data.inputs.push(uwb_features(
                    &window,
                    &scenario.anchor,
                    cfg.include_geometric,
                    &cfg.uwb_noise,
                ));
                data.targets.push(vec![
                    truth.position.x,
                    truth.position.y,
                    truth.position.z,
                    err.x,
                    err.y,
                    err.z,
                ]);
            }
        }
        SensorKind::Baro => {
            if scenario.baro.len() < k {
                return Err(Error::InsufficientData(format!(
                    "{} baro samples for window {k}",
                    scenario.baro.len()
                )));
            }
            data.output_axes = vec![Axis::Z, Axis::Z];
            let mut w = SlidingWindow::new(k)?;
            for s in &scenario.baro {
                w.push(*s)?;
                if !w.is_full() {
                    continue;
                }
                let truth = scenario
                    .truth_at(s.t)
                    .ok_or_else(|| Error::InsufficientData(format!("no truth at t={}", s.t)))?;
                let window: Vec<&BaroSample> = w.iter().collect();
                data.inputs.push(baro_features(&window));
                data.targets.push(vec![
                    truth.position.z,
                    truth.position.z - s.internal_altitude,
                ]);
            }
        }
    }
    Ok(data)
}
