use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{AnchorPose, Geodetic, Rotation};
use crate::solvers::BaroReference;

/// Time interval `[start, end)` in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

impl Interval {
    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t < self.end
    }

    fn validate(&self, what: &str) -> Result<()> {
        if !(self.start.is_finite() && self.end.is_finite() && self.start < self.end) {
            return Err(Error::Config(format!(
                "{what}: interval [{}, {}) is empty",
                self.start, self.end
            )));
        }
        Ok(())
    }
}

/// Vertical sweep on a wall with short pauses at the turning points, plus a
/// slow horizontal drift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrajectoryProfile {
    /// Starting point of the climb, ENU meters.
    pub base: [f64; 3],
    pub vertical_amplitude: f64,
    /// Duration of one full up-and-down sweep, s.
    pub sweep_period: f64,
    /// Hold at each turning point, s.
    pub pause: f64,
    pub horizontal_amplitude: f64,
    pub horizontal_period: f64,
    /// Motion normal to the wall (north), m.
    pub normal_amplitude: f64,
    /// Body attitude oscillation amplitude (roll, pitch, yaw), rad.
    pub attitude_wobble: [f64; 3],
    pub base_yaw: f64,
    /// Relative jitter applied to the periods and phases per seed (0 = none).
    pub seed_jitter: f64,
}

impl Default for TrajectoryProfile {
    fn default() -> Self {
        Self {
            base: [0.0, 0.0, 2.0],
            vertical_amplitude: 18.0,
            sweep_period: 90.0,
            pause: 6.0,
            horizontal_amplitude: 1.5,
            horizontal_period: 140.0,
            normal_amplitude: 0.2,
            attitude_wobble: [0.03, 0.03, 0.1],
            base_yaw: 0.0,
            seed_jitter: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImuNoiseConfig {
    pub rate_hz: f64,
    pub accel_sigma: f64,
    pub gyro_sigma: f64,
    pub accel_bias: [f64; 3],
    pub gyro_bias: [f64; 3],
}

impl Default for ImuNoiseConfig {
    fn default() -> Self {
        Self {
            rate_hz: 100.0,
            accel_sigma: 0.03,
            gyro_sigma: 0.001,
            accel_bias: [0.02, -0.015, 0.01],
            gyro_bias: [2e-4, -1.5e-4, 1e-4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpsOcclusion {
    pub window: Interval,
    /// ENU bias added inside the window, m.
    pub bias: [f64; 3],
    pub hdop_inflation: f64,
    pub dropout_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpsNoiseConfig {
    pub rate_hz: f64,
    pub sigma_xy: f64,
    pub sigma_z: f64,
    pub hdop: f64,
    /// Relative jitter of the reported HDOP.
    pub hdop_jitter: f64,
    pub occlusions: Vec<GpsOcclusion>,
}

impl Default for GpsNoiseConfig {
    fn default() -> Self {
        Self {
            rate_hz: 10.0,
            sigma_xy: 0.4,
            sigma_z: 0.7,
            hdop: 0.9,
            hdop_jitter: 0.05,
            occlusions: vec![GpsOcclusion {
                window: Interval {
                    start: 150.0,
                    end: 310.0,
                },
                bias: [2.0, -1.5, 2.5],
                hdop_inflation: 4.0,
                dropout_probability: 0.5,
            }],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NlosWindow {
    pub window: Interval,
    /// Positive range excess, m.
    pub range_bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UwbNoiseConfig {
    pub rate_hz: f64,
    pub range_sigma: f64,
    pub angle_sigma: f64,
    pub nlos_windows: Vec<NlosWindow>,
    pub confidence_los: f64,
    pub confidence_nlos: f64,
    pub confidence_sigma: f64,
}

impl Default for UwbNoiseConfig {
    fn default() -> Self {
        Self {
            rate_hz: 10.0,
            range_sigma: 0.08,
            angle_sigma: 0.035,
            nlos_windows: vec![
                NlosWindow {
                    window: Interval {
                        start: 40.0,
                        end: 75.0,
                    },
                    range_bias: 1.5,
                },
                NlosWindow {
                    window: Interval {
                        start: 325.0,
                        end: 360.0,
                    },
                    range_bias: 1.5,
                },
            ],
            confidence_los: 0.05,
            confidence_nlos: 0.9,
            confidence_sigma: 0.03,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaroNoiseConfig {
    pub rate_hz: f64,
    pub pressure_sigma: f64,
    /// Linear pressure drift, Pa/s.
    pub drift_rate: f64,
    pub reference: BaroReference,
}

impl Default for BaroNoiseConfig {
    fn default() -> Self {
        Self {
            rate_hz: 10.0,
            pressure_sigma: 1.0,
            drift_rate: 0.06,
            reference: BaroReference::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnchorConfig {
    pub position: [f64; 3],
    /// Point on the wall the array boresight is aimed at.
    pub aim: [f64; 3],
}

impl Default for AnchorConfig {
    fn default() -> Self {
        Self {
            position: [0.0, -16.0, 0.5],
            aim: [0.0, 0.0, 11.0],
        }
    }
}

impl AnchorConfig {
    /// Local frame: +z along the boresight, +x toward east-ish, +y completing
    /// a right-handed frame.
    pub fn pose(&self) -> Result<AnchorPose> {
        let p = Vector3::from(self.position);
        let z = Vector3::from(self.aim) - p;
        if z.norm() == 0.0 {
            return Err(Error::Config(
                "anchor aim coincides with anchor position".into(),
            ));
        }
        let z = z.normalize();
        let mut x = Vector3::x() - z * z.x;
        if x.norm() < 1e-6 {
            x = Vector3::y() - z * z.y;
        }
        let x = x.normalize();
        let y = z.cross(&x);
        let m = nalgebra::Matrix3::from_columns(&[x, y, z]);
        Ok(AnchorPose {
            position: p,
            orientation: Rotation::new(m)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub duration: f64,
    pub dt: f64,
    pub seed: u64,
    pub origin: Geodetic,
    pub trajectory: TrajectoryProfile,
    pub imu: ImuNoiseConfig,
    pub gps: GpsNoiseConfig,
    pub uwb: UwbNoiseConfig,
    pub baro: BaroNoiseConfig,
    pub anchor: AnchorConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            duration: 400.0,
            dt: 0.01,
            seed: 1,
            origin: Geodetic {
                lat: 31.03_f64.to_radians(),
                lon: 121.44_f64.to_radians(),
                height: 12.0,
            },
            trajectory: TrajectoryProfile::default(),
            imu: ImuNoiseConfig::default(),
            gps: GpsNoiseConfig::default(),
            uwb: UwbNoiseConfig::default(),
            baro: BaroNoiseConfig::default(),
            anchor: AnchorConfig::default(),
        }
    }
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{name} must be finite and ≥ 0, got {v}"
        )))
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{name} must be finite and > 0, got {v}"
        )))
    }
}

impl ScenarioConfig {
    /// Default scenario with every noise source, bias and disturbance removed.
    pub fn noiseless() -> Self {
        let mut c = Self::default();
        c.imu.accel_sigma = 0.0;
        c.imu.gyro_sigma = 0.0;
        c.imu.accel_bias = [0.0; 3];
        c.imu.gyro_bias = [0.0; 3];
        c.gps.sigma_xy = 0.0;
        c.gps.sigma_z = 0.0;
        c.gps.hdop_jitter = 0.0;
        c.gps.occlusions.clear();
        c.uwb.range_sigma = 0.0;
        c.uwb.angle_sigma = 0.0;
        c.uwb.confidence_sigma = 0.0;
        c.uwb.nlos_windows.clear();
        c.baro.pressure_sigma = 0.0;
        c.baro.drift_rate = 0.0;
        c
    }

    pub fn validate(&self) -> Result<()> {
        positive("duration", self.duration)?;
        positive("dt", self.dt)?;
        if self.dt >= self.duration {
            return Err(Error::Config(format!(
                "dt {} must be smaller than duration {}",
                self.dt, self.duration
            )));
        }
        if !(self.origin.lat.abs() <= std::f64::consts::FRAC_PI_2) {
            return Err(Error::Config(format!(
                "origin latitude {} rad",
                self.origin.lat
            )));
        }
        let tr = &self.trajectory;
        non_negative("trajectory.vertical_amplitude", tr.vertical_amplitude)?;
        non_negative("trajectory.horizontal_amplitude", tr.horizontal_amplitude)?;
        non_negative("trajectory.normal_amplitude", tr.normal_amplitude)?;
        non_negative("trajectory.pause", tr.pause)?;
        non_negative("trajectory.seed_jitter", tr.seed_jitter)?;
        positive("trajectory.sweep_period", tr.sweep_period)?;
        positive("trajectory.horizontal_period", tr.horizontal_period)?;
        if 2.0 * tr.pause >= tr.sweep_period {
            return Err(Error::Config(
                "trajectory.pause must be shorter than half the sweep period".into(),
            ));
        }
        for r in [
            self.imu.rate_hz,
            self.gps.rate_hz,
            self.uwb.rate_hz,
            self.baro.rate_hz,
        ] {
            positive("sensor rate_hz", r)?;
        }
        non_negative("imu.accel_sigma", self.imu.accel_sigma)?;
        non_negative("imu.gyro_sigma", self.imu.gyro_sigma)?;
        non_negative("gps.sigma_xy", self.gps.sigma_xy)?;
        non_negative("gps.sigma_z", self.gps.sigma_z)?;
        non_negative("gps.hdop", self.gps.hdop)?;
        non_negative("gps.hdop_jitter", self.gps.hdop_jitter)?;
        for o in &self.gps.occlusions {
            o.window.validate("gps.occlusions")?;
            non_negative("gps.occlusions.hdop_inflation", o.hdop_inflation)?;
            if !(0.0..=1.0).contains(&o.dropout_probability) {
                return Err(Error::Config(format!(
                    "dropout probability {} outside [0, 1]",
                    o.dropout_probability
                )));
            }
        }
        non_negative("uwb.range_sigma", self.uwb.range_sigma)?;
        non_negative("uwb.angle_sigma", self.uwb.angle_sigma)?;
        non_negative("uwb.confidence_sigma", self.uwb.confidence_sigma)?;
        for w in &self.uwb.nlos_windows {
            w.window.validate("uwb.nlos_windows")?;
            non_negative("uwb.nlos_windows.range_bias", w.range_bias)?;
        }
        for c in [self.uwb.confidence_los, self.uwb.confidence_nlos] {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::Config(format!(
                    "nlos confidence level {c} outside [0, 1]"
                )));
            }
        }
        non_negative("baro.pressure_sigma", self.baro.pressure_sigma)?;
        if !self.baro.drift_rate.is_finite() {
            return Err(Error::Config("baro.drift_rate must be finite".into()));
        }
        self.baro.reference.validate()?;
        self.anchor.pose()?;
        Ok(())
    }

    /// Number of truth samples, `floor(duration/dt) + 1`.
    pub fn sample_count(&self) -> usize {
        (self.duration / self.dt + 1e-9).floor() as usize + 1
    }

    /// Truth-grid stride for a sensor running at `rate_hz`.
    pub fn stride(&self, rate_hz: f64) -> usize {
        ((1.0 / (rate_hz * self.dt)).round() as usize).max(1)
    }
}
