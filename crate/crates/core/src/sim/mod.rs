//! Synthetic climbing scenarios: ground truth plus raw IMU, GPS, UWB and
//! barometer streams with configurable error models.

mod config;
mod rng;
mod sensors;
mod truth;

use serde::{Deserialize, Serialize};

pub use config::{
    AnchorConfig, BaroNoiseConfig, GpsNoiseConfig, GpsOcclusion, ImuNoiseConfig, Interval,
    NlosWindow, ScenarioConfig, TrajectoryProfile, UwbNoiseConfig,
};
pub use rng::{substream, Stream};
pub use sensors::{simulate_baro, simulate_gps, simulate_imu, simulate_uwb};
pub use truth::generate_truth;

use crate::error::Result;
use crate::frame::{
    AnchorPose, BaroSample, Geodetic, GpsFix, GroundTruthPoint, ImuSample, UwbMeasurement,
};
use crate::geodesy::LocalFrame;
use crate::solvers::BaroReference;

/// Everything one simulated run produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioData {
    pub origin: Geodetic,
    pub anchor: AnchorPose,
    pub baro_reference: BaroReference,
    pub truth: Vec<GroundTruthPoint>,
    pub imu: Vec<ImuSample>,
    pub gps: Vec<GpsFix>,
    pub uwb: Vec<UwbMeasurement>,
    pub baro: Vec<BaroSample>,
}

impl ScenarioData {
    pub fn local_frame(&self) -> Result<LocalFrame> {
        LocalFrame::new(self.origin)
    }

    /// Truth point nearest to `t`, if one lies within half a truth step.
    pub fn truth_at(&self, t: f64) -> Option<&GroundTruthPoint> {
        truth_at(&self.truth, t)
    }
}

/// Nearest truth sample to `t` within half the local sample spacing.
pub fn truth_at(truth: &[GroundTruthPoint], t: f64) -> Option<&GroundTruthPoint> {
    if truth.is_empty() {
        return None;
    }
    let i = truth.partition_point(|p| p.t < t);
    let candidates = [i.checked_sub(1), (i < truth.len()).then_some(i)];
    let best = candidates
        .into_iter()
        .flatten()
        .min_by(|&a, &b| (truth[a].t - t).abs().total_cmp(&(truth[b].t - t).abs()))?;
    let spacing = if truth.len() > 1 {
        truth[1].t - truth[0].t
    } else {
        f64::INFINITY
    };
    ((truth[best].t - t).abs() <= spacing / 2.0).then(|| &truth[best])
}

pub fn simulate(cfg: &ScenarioConfig) -> Result<ScenarioData> {
    cfg.validate()?;
    let frame = LocalFrame::new(cfg.origin)?;
    let anchor = cfg.anchor.pose()?;
    let truth = generate_truth(cfg)?;
    Ok(ScenarioData {
        origin: cfg.origin,
        anchor,
        baro_reference: cfg.baro.reference,
        imu: simulate_imu(&truth, cfg)?,
        gps: simulate_gps(&truth, cfg, &frame)?,
        uwb: simulate_uwb(&truth, &anchor, cfg)?,
        baro: simulate_baro(&truth, cfg)?,
        truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_config_gives_identical_data() {
        let cfg = ScenarioConfig {
            duration: 40.0,
            ..ScenarioConfig::default()
        };
        assert_eq!(simulate(&cfg).unwrap(), simulate(&cfg).unwrap());
    }

    #[test]
    fn sensor_streams_are_independent() {
        let cfg = ScenarioConfig {
            duration: 40.0,
            ..ScenarioConfig::default()
        };
        let mut louder = cfg.clone();
        louder.gps.sigma_xy *= 3.0;
        let (a, b) = (simulate(&cfg).unwrap(), simulate(&louder).unwrap());
        assert_eq!(a.uwb, b.uwb);
        assert_eq!(a.imu, b.imu);
        assert_eq!(a.baro, b.baro);
        assert_ne!(a.gps, b.gps);
    }

    #[test]
    fn injected_noise_is_recoverable_by_differencing() {
        let cfg = ScenarioConfig {
            duration: 200.0,
            ..ScenarioConfig::default()
        };
        let mut clean = ScenarioConfig::noiseless();
        clean.duration = cfg.duration;
        let (noisy, quiet) = (simulate(&cfg).unwrap(), simulate(&clean).unwrap());

        let axis_std = |xs: &[f64]| {
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
        };
        let accel_x: Vec<f64> = noisy
            .imu
            .iter()
            .zip(&quiet.imu)
            .map(|(a, b)| a.specific_force_b.x - b.specific_force_b.x)
            .collect();
        let mean = accel_x.iter().sum::<f64>() / accel_x.len() as f64;
        assert!((mean - cfg.imu.accel_bias[0]).abs() < 3e-3);
        assert!((axis_std(&accel_x) / cfg.imu.accel_sigma - 1.0).abs() < 0.05);

        let los: Vec<f64> = noisy
            .uwb
            .iter()
            .zip(&quiet.uwb)
            .filter(|(a, _)| !cfg.uwb.nlos_windows.iter().any(|w| w.window.contains(a.t)))
            .map(|(a, b)| a.alpha - b.alpha)
            .collect();
        assert!((axis_std(&los) / cfg.uwb.angle_sigma - 1.0).abs() < 0.1);

        let baro: Vec<f64> = noisy
            .baro
            .iter()
            .zip(&quiet.baro)
            .map(|(a, b)| a.pressure - b.pressure - cfg.baro.drift_rate * a.t)
            .collect();
        assert!((axis_std(&baro) / cfg.baro.pressure_sigma - 1.0).abs() < 0.1);
    }

    #[test]
    fn truth_lookup_tolerance() {
        let data = simulate(&ScenarioConfig {
            duration: 5.0,
            ..ScenarioConfig::default()
        })
        .unwrap();
        assert_eq!(data.truth_at(1.0).unwrap().t, 1.0);
        assert_eq!(data.truth_at(1.004).unwrap().t, 1.0);
        assert_eq!(data.truth_at(1.006).unwrap().t, 1.01);
        assert!(data.truth_at(-0.5).is_none());
        assert!(data.truth_at(5.2).is_none());
    }

    #[test]
    fn streams_are_time_ordered() {
        let data = simulate(&ScenarioConfig {
            duration: 60.0,
            ..ScenarioConfig::default()
        })
        .unwrap();
        assert!(data.imu.windows(2).all(|w| w[0].t < w[1].t));
        assert!(data.gps.windows(2).all(|w| w[0].t < w[1].t));
        assert!(data.uwb.windows(2).all(|w| w[0].t < w[1].t));
        assert!(data.baro.windows(2).all(|w| w[0].t < w[1].t));
    }
}
