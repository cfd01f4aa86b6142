//! Constant-velocity unscented Kalman filter over `[position, velocity]`.

use nalgebra::{SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

use super::FusedObservation;
use crate::error::{Error, Result};
use crate::pose::{Algorithm, PoseEstimate};
use crate::solvers::symmetrize;

pub type Vec6 = SVector<f64, 6>;
pub type Mat6 = SMatrix<f64, 6, 6>;
const N: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UkfConfig {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
    /// White-acceleration intensity, m²/s³.
    pub process_noise: f64,
    pub initial_velocity_sigma: f64,
}

impl Default for UkfConfig {
    fn default() -> Self {
        Self {
            alpha: 1e-3,
            beta: 2.0,
            kappa: 0.0,
            process_noise: 0.5,
            initial_velocity_sigma: 0.5,
        }
    }
}

impl UkfConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0)
            || !(self.process_noise >= 0.0)
            || !(self.initial_velocity_sigma >= 0.0)
        {
            return Err(Error::Config(
                "ukf alpha must be positive and noise levels non-negative".into(),
            ));
        }
        if !(N as f64 + self.kappa > 0.0) {
            return Err(Error::Config(format!(
                "ukf kappa {} leaves n + κ ≤ 0",
                self.kappa
            )));
        }
        Ok(())
    }
}

/// Merwe scaled sigma-point weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaWeights {
    pub lambda: f64,
    pub mean0: f64,
    pub cov0: f64,
    pub rest: f64,
}

impl SigmaWeights {
    pub fn new(cfg: &UkfConfig) -> Self {
        let n = N as f64;
        let lambda = cfg.alpha * cfg.alpha * (n + cfg.kappa) - n;
        let mean0 = lambda / (n + lambda);
        Self {
            lambda,
            mean0,
            cov0: mean0 + 1.0 - cfg.alpha * cfg.alpha + cfg.beta,
            rest: 1.0 / (2.0 * (n + lambda)),
        }
    }

    pub fn mean_sum(&self) -> f64 {
        self.mean0 + 2.0 * N as f64 * self.rest
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UkfState {
    pub mean: Vec6,
    pub covariance: Mat6,
    pub config: UkfConfig,
}

fn transition(dt: f64) -> Mat6 {
    let mut f = Mat6::identity();
    for i in 0..3 {
        f[(i, i + 3)] = dt;
    }
    f
}

/// Discrete white-acceleration process noise.
pub fn process_noise(q: f64, dt: f64) -> Mat6 {
    let mut m = Mat6::zeros();
    for i in 0..3 {
        m[(i, i)] = q * dt.powi(3) / 3.0;
        m[(i, i + 3)] = q * dt * dt / 2.0;
        m[(i + 3, i)] = q * dt * dt / 2.0;
        m[(i + 3, i + 3)] = q * dt;
    }
    m
}

fn cholesky(p: &Mat6) -> Result<Mat6> {
    if let Some(c) = p.cholesky() {
        return Ok(c.l());
    }
    let bump = 1e-9 * p.trace().abs().max(1.0);
    (p + Mat6::identity() * bump)
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| {
            Error::Numerical(format!(
                "ukf covariance not positive definite after inflation: diag {:?}",
                p.diagonal()
            ))
        })
}

impl UkfState {
    pub fn new(
        position: Vector3<f64>,
        position_variance: Vector3<f64>,
        config: UkfConfig,
    ) -> Result<Self> {
        config.validate()?;
        let mut mean = Vec6::zeros();
        mean.fixed_rows_mut::<3>(0).copy_from(&position);
        let mut covariance = Mat6::zeros();
        for i in 0..3 {
            covariance[(i, i)] = position_variance[i];
            covariance[(i + 3, i + 3)] = config.initial_velocity_sigma.powi(2);
        }
        Ok(Self {
            mean,
            covariance,
            config,
        })
    }

    pub fn position(&self) -> Vector3<f64> {
        self.mean.fixed_rows::<3>(0).into_owned()
    }

    /// Sigma points as offsets from the mean (the central offset is zero).
    /// Both models are affine, so offsets propagate without the mean and the
    /// tiny spread at small α is not swamped by rounding of large positions.
    fn sigma_offsets(&self) -> Result<[Vec6; 2 * N + 1]> {
        let w = SigmaWeights::new(&self.config);
        let l = cholesky(&(self.covariance * (N as f64 + w.lambda)))?;
        let mut pts = [Vec6::zeros(); 2 * N + 1];
        for i in 0..N {
            let c = l.column(i);
            pts[1 + i] = c.into_owned();
            pts[1 + N + i] = -c;
        }
        Ok(pts)
    }

    /// Weighted mean offset and deviations from it. The central offset is
    /// zero, which also avoids the cancellation of the large negative central weight.
    fn moments<const M: usize>(
        offsets: &[SVector<f64, M>],
        w: &SigmaWeights,
    ) -> (SVector<f64, M>, Vec<SVector<f64, M>>) {
        let mut mean = SVector::<f64, M>::zeros();
        for p in &offsets[1..] {
            mean += p * w.rest;
        }
        let dev = offsets.iter().map(|p| p - mean).collect();
        (mean, dev)
    }

    pub fn predict(&mut self, dt: f64) -> Result<()> {
        if dt < 0.0 || !dt.is_finite() {
            return Err(Error::Domain(format!("ukf dt {dt}")));
        }
        if dt == 0.0 {
            return Ok(());
        }
        let w = SigmaWeights::new(&self.config);
        let f = transition(dt);
        let offsets: Vec<Vec6> = self.sigma_offsets()?.iter().map(|p| f * p).collect();
        let (mean, dev) = Self::moments(&offsets, &w);
        let mut cov = process_noise(self.config.process_noise, dt);
        for (i, d) in dev.iter().enumerate() {
            cov += d * d.transpose() * if i == 0 { w.cov0 } else { w.rest };
        }
        symmetrize(&mut cov);
        self.mean = f * self.mean + mean;
        self.covariance = cov;
        Ok(())
    }

    /// Position update with diagonal measurement variance `r`.
    pub fn update(&mut self, z: &Vector3<f64>, r: &Vector3<f64>) -> Result<()> {
        if r.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Domain(format!(
                "measurement variance must be positive, got {r:?}"
            )));
        }
        let w = SigmaWeights::new(&self.config);
        let offsets = self.sigma_offsets()?;
        let zs: Vec<Vector3<f64>> = offsets
            .iter()
            .map(|p| p.fixed_rows::<3>(0).into_owned())
            .collect();
        let (z_off, z_dev) = Self::moments(&zs, &w);
        let (x_off, x_dev) = Self::moments(&offsets, &w);
        let mut pzz = SMatrix::<f64, 3, 3>::from_diagonal(r);
        let mut pxz = SMatrix::<f64, 6, 3>::zeros();
        for i in 0..offsets.len() {
            let wc = if i == 0 { w.cov0 } else { w.rest };
            pzz += z_dev[i] * z_dev[i].transpose() * wc;
            pxz += x_dev[i] * z_dev[i].transpose() * wc;
        }
        let pzz_inv = pzz
            .try_inverse()
            .ok_or_else(|| Error::Numerical("ukf innovation covariance is singular".into()))?;
        let gain = pxz * pzz_inv;
        let z_mean = self.position() + z_off;
        self.mean += x_off + gain * (z - z_mean);
        let mut cov = self.covariance - gain * pzz * gain.transpose();
        symmetrize(&mut cov);
        self.covariance = cov;
        Ok(())
    }

    pub fn pose(&self, t: f64) -> PoseEstimate {
        PoseEstimate {
            t,
            position: self.position(),
            sigma: Vector3::new(
                self.covariance[(0, 0)],
                self.covariance[(1, 1)],
                self.covariance[(2, 2)],
            )
            .map(|v| v.max(0.0).sqrt()),
            source: Algorithm::Amfa,
        }
    }
}

/// Predict over `dt`, then update with the fused observation (`R = diag Σ`).
pub fn ukf_step(
    state: &UkfState,
    obs: &FusedObservation,
    dt: f64,
) -> Result<(UkfState, PoseEstimate)> {
    let mut next = *state;
    next.predict(dt)?;
    next.update(&obs.position, &obs.covariance)?;
    Ok((next, next.pose(obs.t)))
}
