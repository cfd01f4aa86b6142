use std::f64::consts::TAU;

use nalgebra::Vector3;
use rand::Rng;

use super::config::ScenarioConfig;
use super::rng::{substream, Stream};
use crate::error::Result;
use crate::frame::{GroundTruthPoint, Rotation};

/// Quintic smoothstep; value, first and second derivatives vanish-match at 0 and 1.
fn smootherstep(x: f64) -> (f64, f64) {
    let x = x.clamp(0.0, 1.0);
    let s = x * x * x * (x * (x * 6.0 - 15.0) + 10.0);
    let ds = 30.0 * x * x * (x - 1.0) * (x - 1.0);
    (s, ds)
}

/// Seed-dependent perturbations of the nominal profile.
struct ProfileDraw {
    sweep_period: f64,
    horizontal_period: f64,
    horizontal_phase: f64,
    normal_phase: f64,
    attitude_phase: [f64; 3],
}

impl ProfileDraw {
    fn draw(cfg: &ScenarioConfig) -> Self {
        let tr = &cfg.trajectory;
        let mut rng = substream(cfg.seed, Stream::Trajectory);
        let j = tr.seed_jitter;
        let mut u = || rng.random_range(-1.0..=1.0_f64);
        Self {
            sweep_period: tr.sweep_period * (1.0 + j * u()),
            horizontal_period: tr.horizontal_period * (1.0 + j * u()),
            horizontal_phase: TAU * j * u(),
            normal_phase: TAU * j * u(),
            attitude_phase: [TAU * j * u(), TAU * j * u(), TAU * j * u()],
        }
    }
}

/// Smooth climbing trajectory: repeated vertical sweeps with pauses at the
/// turning points, small horizontal drift along the wall and a slight motion
/// normal to it.
pub fn generate_truth(cfg: &ScenarioConfig) -> Result<Vec<GroundTruthPoint>> {
    cfg.validate()?;
    let tr = &cfg.trajectory;
    let draw = ProfileDraw::draw(cfg);
    let period = draw.sweep_period;
    let pause = tr.pause.min(0.45 * period);
    let climb = period / 2.0 - pause;

    let vertical = |t: f64| -> (f64, f64) {
        let tc = t.rem_euclid(period);
        let a = tr.vertical_amplitude;
        if tc < climb {
            let (s, ds) = smootherstep(tc / climb);
            (a * s, a * ds / climb)
        } else if tc < climb + pause {
            (a, 0.0)
        } else if tc < 2.0 * climb + pause {
            let (s, ds) = smootherstep((tc - climb - pause) / climb);
            (a * (1.0 - s), -a * ds / climb)
        } else {
            (0.0, 0.0)
        }
    };

    let wh = TAU / draw.horizontal_period;
    let wn = TAU / (1.7 * draw.horizontal_period);
    let base = Vector3::from(tr.base);
    let wobble_periods = [37.0, 53.0, 71.0];

    let n = cfg.sample_count();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 * cfg.dt;
        let (up, vup) = vertical(t);
        let ah = tr.horizontal_amplitude;
        let an = tr.normal_amplitude;
        let east = ah * (wh * t + draw.horizontal_phase).sin();
        let veast = ah * wh * (wh * t + draw.horizontal_phase).cos();
        let north = an * (wn * t + draw.normal_phase).sin();
        let vnorth = an * wn * (wn * t + draw.normal_phase).cos();

        let mut angles = [0.0; 3];
        for k in 0..3 {
            angles[k] = tr.attitude_wobble[k]
                * (TAU * t / wobble_periods[k] + draw.attitude_phase[k]).sin();
        }
        let attitude = Rotation::from_euler(angles[0], angles[1], tr.base_yaw + angles[2]);

        out.push(GroundTruthPoint {
            t,
            position: base + Vector3::new(east, north, up),
            velocity: Vector3::new(veast, vnorth, vup),
            attitude,
        });
    }
    Ok(out)
}
