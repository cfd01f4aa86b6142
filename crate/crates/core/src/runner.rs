//! Runs the single-sensor algorithms over a recorded scenario on a common
//! epoch clock and assembles the per-epoch fusion frames.

use std::collections::BTreeMap;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fcnn::{BaroFcnnModel, UwbFcnnModel};
use crate::frame::{BaroSample, Rotation, UwbMeasurement};
use crate::fusion::{
    amfa_pipeline, build_fusion_inputs, train_fusion, FusionConfig, FusionExample, FusionFrame,
    FusionNetwork, ModalityObservation, UkfConfig, MODALITIES,
};
use crate::nnet::LossHistory;
use crate::pose::{Algorithm, PoseEstimate};
use crate::sim::ScenarioData;
use crate::solvers::{
    baro_altitude, uwb_geometric_solve, EkfConfig, GpsInsFilter, GpsObservation, InsState, UwbNoise,
};
use crate::window::SlidingWindow;

const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunnerConfig {
    /// Output and fusion epoch rate, Hz.
    pub rate_hz: f64,
    /// Samples older than this at an epoch count as absent, s.
    pub max_staleness: f64,
    pub ekf: EkfConfig,
    pub uwb_noise: UwbNoise,
    /// Pressure noise used for the σ of the pressure-formula altitude, Pa.
    pub baro_pressure_sigma: f64,
}

impl Default for RunnerConfig {
    fn default() -> Self {
        Self {
            rate_hz: 10.0,
            max_staleness: 0.5,
            ekf: EkfConfig::default(),
            uwb_noise: UwbNoise::default(),
            baro_pressure_sigma: 1.0,
        }
    }
}

impl RunnerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate_hz > 0.0 && self.rate_hz.is_finite()) || !(self.max_staleness > 0.0) {
            return Err(Error::Config(
                "runner rate and staleness must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SensorModels<'a> {
    pub uwb: Option<&'a UwbFcnnModel>,
    pub baro: Option<&'a BaroFcnnModel>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrontEndOutput {
    pub epochs: Vec<f64>,
    /// Per single-sensor algorithm, one entry per epoch.
    pub estimates: BTreeMap<Algorithm, Vec<Option<PoseEstimate>>>,
    pub frames: Vec<FusionFrame>,
}

fn z_only(t: f64, z: f64, sigma_z: f64, source: Algorithm) -> PoseEstimate {
    PoseEstimate {
        t,
        position: Vector3::new(f64::NAN, f64::NAN, z),
        sigma: Vector3::new(f64::NAN, f64::NAN, sigma_z),
        source,
    }
}

fn variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

#[derive(Default)]
struct Latest {
    uwb_geo: Option<PoseEstimate>,
    uwb_fcnn: Option<(PoseEstimate, Option<ModalityObservation>)>,
    baro: Option<PoseEstimate>,
    baro_fcnn: Option<(PoseEstimate, Option<ModalityObservation>)>,
}

fn fresh<T>(v: Option<T>, sample_t: impl Fn(&T) -> f64, epoch: f64, max: f64) -> Option<T> {
    v.filter(|x| epoch - sample_t(x) <= max + TIME_EPS)
}

/// Runs baro, baro-fcnn, uwb-geo, uwb-fcnn and gpsins-ekf and builds the
/// fusion frames. Epochs are taken on the IMU clock at `cfg.rate_hz`. The EKF
/// starts at the first valid GPS fix with the initial truth attitude.
pub fn run_front_end(
    data: &ScenarioData,
    models: SensorModels<'_>,
    cfg: &RunnerConfig,
) -> Result<FrontEndOutput> {
    cfg.validate()?;
    if data.imu.is_empty() {
        return Err(Error::InsufficientData("no imu samples".into()));
    }
    let frame = data.local_frame()?;
    let initial_attitude = data
        .truth
        .first()
        .map(|p| p.attitude)
        .unwrap_or_else(Rotation::identity);
    let period = 1.0 / cfg.rate_hz;

    let uwb_k = models.uwb.map(|m| m.window).unwrap_or(1);
    let baro_k = models.baro.map(|m| m.window).unwrap_or(1);
    let mut uwb_window: SlidingWindow<UwbMeasurement> = SlidingWindow::new(uwb_k)?;
    let mut baro_window: SlidingWindow<BaroSample> = SlidingWindow::new(baro_k)?;
    let (mut gi, mut ui, mut bi) = (0, 0, 0);
    let mut filter: Option<GpsInsFilter> = None;
    let mut last_hdop = f64::NAN;
    let mut latest = Latest::default();
    let ps = data.baro_reference;

    let mut out = FrontEndOutput::default();
    for a in [
        Algorithm::Baro,
        Algorithm::BaroFcnn,
        Algorithm::UwbGeo,
        Algorithm::UwbFcnn,
        Algorithm::GpsinsEkf,
    ] {
        out.estimates.insert(a, Vec::new());
    }
    let t0 = data.imu[0].t;
    let mut epoch_index = 0u64;

    for imu in &data.imu {
        let mut fix = None;
        while gi < data.gps.len() && data.gps[gi].t <= imu.t + TIME_EPS {
            let g = &data.gps[gi];
            last_hdop = g.hdop;
            if g.valid {
                fix = Some(GpsObservation {
                    t: g.t,
                    position: frame.to_enu(&g.geodetic())?,
                    hdop: g.hdop,
                });
            }
            gi += 1;
        }
        match (&mut filter, &fix) {
            (Some(f), _) => {
                f.advance(imu, fix.as_ref())?;
            }
            (None, Some(first)) => {
                let init = InsState {
                    position: first.position,
                    velocity: Vector3::zeros(),
                    attitude: initial_attitude,
                };
                let mut f = GpsInsFilter::new(cfg.ekf.clone(), init);
                f.advance(imu, None)?;
                filter = Some(f);
            }
            (None, None) => {}
        }

        while ui < data.uwb.len() && data.uwb[ui].t <= imu.t + TIME_EPS {
            let m = data.uwb[ui];
            m.validate()?;
            uwb_window.push(m)?;
            let geo = uwb_geometric_solve(&m, &data.anchor, &cfg.uwb_noise);
            latest.uwb_geo = Some(geo);
            latest.uwb_fcnn = Some(match models.uwb {
                Some(model) if uwb_window.len() >= model.window => {
                    let inf = model.infer(&uwb_window, &data.anchor)?;
                    let sigma_bar = inf.pose.sigma.mean();
                    let obs = ModalityObservation {
                        estimate: inf.pose.position,
                        sigma: inf.pose.sigma,
                        reliability: [1.0 - m.nlos_confidence, sigma_bar],
                    };
                    (inf.pose, Some(obs))
                }
                _ => (
                    PoseEstimate {
                        source: Algorithm::UwbFcnn,
                        ..geo
                    },
                    None,
                ),
            });
            ui += 1;
        }

        while bi < data.baro.len() && data.baro[bi].t <= imu.t + TIME_EPS {
            let s = data.baro[bi];
            baro_window.push(s)?;
            let h = baro_altitude(s.pressure, &ps)?;
            // |dh/dp| for the standard-atmosphere formula
            let dhdp = ps.t0 / ps.lapse_rate
                * ps.exponent()
                * (s.pressure / ps.p0).powf(ps.exponent() - 1.0)
                / ps.p0;
            let classical = z_only(
                s.t,
                h,
                (dhdp * cfg.baro_pressure_sigma).max(1e-6),
                Algorithm::Baro,
            );
            latest.baro = Some(classical);
            latest.baro_fcnn = Some(match models.baro {
                Some(model) if baro_window.len() >= model.window => {
                    let inf = model.infer(&baro_window)?;
                    let alts: Vec<f64> = baro_window
                        .iter()
                        .skip(baro_window.len() - model.window)
                        .map(|b| b.internal_altitude)
                        .collect();
                    let var = variance(&alts);
                    let obs = ModalityObservation {
                        estimate: Vector3::new(0.0, 0.0, inf.altitude),
                        sigma: Vector3::new(0.0, 0.0, inf.sigma_z),
                        reliability: [1.0 / (1.0 + var), inf.sigma_z],
                    };
                    (
                        z_only(s.t, inf.altitude, inf.sigma_z, Algorithm::BaroFcnn),
                        Some(obs),
                    )
                }
                _ => (
                    PoseEstimate {
                        source: Algorithm::BaroFcnn,
                        ..classical
                    },
                    None,
                ),
            });
            bi += 1;
        }

        if imu.t + TIME_EPS < t0 + epoch_index as f64 * period {
            continue;
        }
        epoch_index += 1;
        let t = imu.t;
        let stale = cfg.max_staleness;
        let uwb_geo = fresh(latest.uwb_geo, |p| p.t, t, stale);
        let uwb_fcnn = fresh(latest.uwb_fcnn, |p| p.0.t, t, stale);
        let baro = fresh(latest.baro, |p| p.t, t, stale);
        let baro_fcnn = fresh(latest.baro_fcnn, |p| p.0.t, t, stale);
        let ekf = filter.as_ref().map(|f| f.pose(t));

        let gps_obs = filter.as_ref().map(|f| ModalityObservation {
            estimate: f.nominal.position,
            sigma: f.model.position_sigma(),
            reliability: [
                if last_hdop.is_finite() {
                    1.0 / (1.0 + last_hdop)
                } else {
                    0.0
                },
                f.last_innovation_norm(),
            ],
        });
        let observations: [Option<ModalityObservation>; MODALITIES] = [
            uwb_fcnn.and_then(|u| u.1),
            gps_obs,
            baro_fcnn.and_then(|b| b.1),
        ];

        let at = |p: Option<PoseEstimate>| p.map(|p| PoseEstimate { t, ..p });
        out.epochs.push(t);
        out.estimates
            .get_mut(&Algorithm::Baro)
            .unwrap()
            .push(at(baro));
        out.estimates
            .get_mut(&Algorithm::BaroFcnn)
            .unwrap()
            .push(at(baro_fcnn.map(|b| b.0)));
        out.estimates
            .get_mut(&Algorithm::UwbGeo)
            .unwrap()
            .push(at(uwb_geo));
        out.estimates
            .get_mut(&Algorithm::UwbFcnn)
            .unwrap()
            .push(at(uwb_fcnn.map(|u| u.0)));
        out.estimates
            .get_mut(&Algorithm::GpsinsEkf)
            .unwrap()
            .push(ekf);
        out.frames.push(FusionFrame { t, observations });
    }
    Ok(out)
}

/// Fusion training examples: every frame with a complete input and a truth
/// sample at the same instant.
pub fn fusion_examples(
    data: &ScenarioData,
    frames: &[FusionFrame],
    window: usize,
) -> Vec<FusionExample> {
    build_fusion_inputs(frames, window)
        .into_iter()
        .flatten()
        .filter_map(|input| {
            data.truth_at(input.t).map(|p| FusionExample {
                truth: p.position,
                input,
            })
        })
        .collect()
}

/// Second training stage: fusion network on a scenario processed by the
/// already-trained sensor models.
pub fn train_fusion_stage(
    data: &ScenarioData,
    models: SensorModels<'_>,
    runner: &RunnerConfig,
    cfg: &FusionConfig,
    seed: u64,
) -> Result<(FusionNetwork, LossHistory)> {
    if models.uwb.is_none() || models.baro.is_none() {
        return Err(Error::Config(
            "fusion training needs trained uwb and baro models".into(),
        ));
    }
    let front = run_front_end(data, models, runner)?;
    let examples = fusion_examples(data, &front.frames, cfg.window);
    let mut net = FusionNetwork::init(cfg, seed)?;
    net.fit_standardizers(&examples)?;
    let train = crate::nnet::TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    let history = train_fusion(&mut net, &examples, &train)?;
    Ok((net, history))
}

/// Runs one algorithm end to end; `None` entries are epochs without output.
pub fn run_algorithm(
    algo: Algorithm,
    data: &ScenarioData,
    models: SensorModels<'_>,
    fusion: Option<(&FusionNetwork, &FusionConfig, &UkfConfig)>,
    runner: &RunnerConfig,
) -> Result<Vec<Option<PoseEstimate>>> {
    match algo {
        Algorithm::UwbFcnn if models.uwb.is_none() => {
            return Err(Error::Config("uwb-fcnn needs a uwb model".into()))
        }
        Algorithm::BaroFcnn if models.baro.is_none() => {
            return Err(Error::Config("baro-fcnn needs a baro model".into()))
        }
        Algorithm::Amfa if fusion.is_none() || models.uwb.is_none() || models.baro.is_none() => {
            return Err(Error::Config(
                "amfa needs uwb, baro and fusion models".into(),
            ))
        }
        _ => {}
    }
    let mut front = run_front_end(data, models, runner)?;
    if let Algorithm::Amfa = algo {
        let (net, cfg, ukf) = fusion.expect("checked above");
        return Ok(amfa_pipeline(&front.frames, net, cfg, ukf)?.estimates);
    }
    Ok(front.estimates.remove(&algo).unwrap_or_default())
}
