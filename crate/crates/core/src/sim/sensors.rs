use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::config::ScenarioConfig;
use super::rng::{substream, Stream};
use crate::error::{Error, Result};
use crate::frame::{
    gravity_enu, AnchorPose, BaroSample, GpsFix, GroundTruthPoint, ImuSample, UwbMeasurement,
};
use crate::geodesy::LocalFrame;
use crate::solvers::{baro_altitude, baro_inverse, log_so3, uwb_inverse};

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn gauss3(rng: &mut ChaCha8Rng, sigma: [f64; 3]) -> Vector3<f64> {
    Vector3::new(
        sigma[0] * gauss(rng),
        sigma[1] * gauss(rng),
        sigma[2] * gauss(rng),
    )
}

/// IMU samples on the truth grid. Specific force comes from velocity
/// differencing over the sample interval and rate from relative attitude, so
/// noiseless samples integrate back onto the truth velocity and attitude.
pub fn simulate_imu(truth: &[GroundTruthPoint], cfg: &ScenarioConfig) -> Result<Vec<ImuSample>> {
    if truth.len() < 2 {
        return Err(Error::InsufficientData(
            "IMU simulation needs at least two truth points".into(),
        ));
    }
    let c = &cfg.imu;
    let stride = cfg.stride(c.rate_hz);
    let mut rng = substream(cfg.seed, Stream::Imu);
    let (accel_bias, gyro_bias) = (Vector3::from(c.accel_bias), Vector3::from(c.gyro_bias));
    let mut out = Vec::with_capacity(truth.len() / stride);
    let mut i = 0;
    while i + stride < truth.len() {
        let (a, b) = (&truth[i], &truth[i + stride]);
        let dt = b.t - a.t;
        let accel = (b.velocity - a.velocity) / dt;
        let specific_force = a.attitude.apply_inverse(&(accel - gravity_enu()));
        let relative = a.attitude.matrix().transpose() * b.attitude.matrix();
        let rate = log_so3(&relative) / dt;
        out.push(ImuSample {
            t: a.t,
            specific_force_b: specific_force + accel_bias + gauss3(&mut rng, [c.accel_sigma; 3]),
            angular_rate_b: rate + gyro_bias + gauss3(&mut rng, [c.gyro_sigma; 3]),
        });
        i += stride;
    }
    Ok(out)
}

pub fn simulate_gps(
    truth: &[GroundTruthPoint],
    cfg: &ScenarioConfig,
    frame: &LocalFrame,
) -> Result<Vec<GpsFix>> {
    let c = &cfg.gps;
    let stride = cfg.stride(c.rate_hz);
    let mut rng = substream(cfg.seed, Stream::Gps);
    let mut out = Vec::with_capacity(truth.len() / stride + 1);
    for p in truth.iter().step_by(stride) {
        let noise = gauss3(&mut rng, [c.sigma_xy, c.sigma_xy, c.sigma_z]);
        let jitter = gauss(&mut rng);
        let dropout_draw: f64 = rng.random();

        let mut pos = p.position + noise;
        let mut hdop = (c.hdop * (1.0 + c.hdop_jitter * jitter)).max(0.0);
        let mut dropped = false;
        for occ in c.occlusions.iter().filter(|o| o.window.contains(p.t)) {
            pos += Vector3::from(occ.bias);
            hdop *= occ.hdop_inflation;
            dropped |= dropout_draw < occ.dropout_probability;
        }
        if dropped {
            continue;
        }
        let g = frame.to_geodetic(&pos);
        out.push(GpsFix {
            t: p.t,
            lat: g.lat,
            lon: g.lon,
            height: g.height,
            hdop,
            valid: true,
        });
    }
    Ok(out)
}

pub fn simulate_uwb(
    truth: &[GroundTruthPoint],
    anchor: &AnchorPose,
    cfg: &ScenarioConfig,
) -> Result<Vec<UwbMeasurement>> {
    let c = &cfg.uwb;
    let stride = cfg.stride(c.rate_hz);
    let mut rng = substream(cfg.seed, Stream::Uwb);
    let limit = std::f64::consts::FRAC_PI_2 - 1e-6;
    let mut out = Vec::with_capacity(truth.len() / stride + 1);
    for p in truth.iter().step_by(stride) {
        let (d, alpha, beta) = uwb_inverse(&p.position, anchor)?;
        let n = gauss3(&mut rng, [c.range_sigma, c.angle_sigma, c.angle_sigma]);
        let conf_noise = c.confidence_sigma * gauss(&mut rng);
        let bias: f64 = c
            .nlos_windows
            .iter()
            .filter(|w| w.window.contains(p.t))
            .map(|w| w.range_bias)
            .sum();
        let level = if bias > 0.0 {
            c.confidence_nlos
        } else {
            c.confidence_los
        };
        out.push(UwbMeasurement {
            t: p.t,
            range: (d + bias + n.x).max(0.0),
            alpha: (alpha + n.y).clamp(-limit, limit),
            beta: (beta + n.z).clamp(-limit, limit),
            nlos_confidence: (level + conf_noise).clamp(0.0, 1.0),
        });
    }
    Ok(out)
}

pub fn simulate_baro(truth: &[GroundTruthPoint], cfg: &ScenarioConfig) -> Result<Vec<BaroSample>> {
    let c = &cfg.baro;
    let stride = cfg.stride(c.rate_hz);
    let mut rng = substream(cfg.seed, Stream::Baro);
    let mut out = Vec::with_capacity(truth.len() / stride + 1);
    for p in truth.iter().step_by(stride) {
        let pressure = baro_inverse(p.position.z, &c.reference)?
            + c.drift_rate * p.t
            + c.pressure_sigma * gauss(&mut rng);
        if !(pressure > 0.0) {
            return Err(Error::Numerical(format!(
                "simulated pressure {pressure} Pa at t={}",
                p.t
            )));
        }
        out.push(BaroSample {
            t: p.t,
            pressure,
            internal_altitude: baro_altitude(pressure, &c.reference)?,
        });
    }
    Ok(out)
}
