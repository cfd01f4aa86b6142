//! Loosely coupled GPS/INS error-state EKF.
//!
//! Error state `x = [δr, δv, ε]` with `r̂ = r + δr`, `v̂ = v + δv` and
//! `Ĉ = (I − [ε×]) C`. Continuous dynamics:
//!
//! ```text
//! δṙ = F_rr δr + F_rv δv
//! δv̇ = −(2ω_ie + ω_en) × δv + fⁿ × ε + C δf
//! ε̇  = F_er δr + F_ev δv + [(ω_ie + ω_en)×] ε − C δω
//! ```
//!
//! GPS fixes observe `δr` directly. After each update the error is folded into
//! the nominal state and reset to zero.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

use super::ins::{exp_so3, ins_mechanize, skew, InsState};
use crate::error::{Error, Result};
use crate::frame::{ImuSample, Rotation, Timestamp, Vec3Enu};
use crate::pose::{Algorithm, PoseEstimate};

pub type Mat9 = SMatrix<f64, 9, 9>;
pub type Vec9 = SVector<f64, 9>;

/// Error-model coefficients and noise levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EkfConfig {
    pub f_rr: Matrix3<f64>,
    pub f_rv: Matrix3<f64>,
    pub f_er: Matrix3<f64>,
    pub f_ev: Matrix3<f64>,
    /// Earth rotation rate in the navigation frame, rad/s.
    pub omega_ie: Vector3<f64>,
    /// Transport rate, rad/s.
    pub omega_en: Vector3<f64>,
    /// Accelerometer white noise, m/s/√s.
    pub accel_noise: f64,
    /// Gyro white noise, rad/√s.
    pub gyro_noise: f64,
    /// Additional position random walk, m/√s.
    pub position_noise: f64,
    pub gps_sigma_h: f64,
    pub gps_sigma_v: f64,
    /// Scale the GPS measurement noise by the reported HDOP.
    pub scale_with_hdop: bool,
    pub init_position_sigma: f64,
    pub init_velocity_sigma: f64,
    pub init_attitude_sigma: f64,
}

impl Default for EkfConfig {
    fn default() -> Self {
        Self {
            f_rr: Matrix3::zeros(),
            f_rv: Matrix3::identity(),
            f_er: Matrix3::zeros(),
            f_ev: Matrix3::zeros(),
            omega_ie: Vector3::zeros(),
            omega_en: Vector3::zeros(),
            accel_noise: 0.05,
            gyro_noise: 0.002,
            position_noise: 0.0,
            gps_sigma_h: 0.5,
            gps_sigma_v: 0.8,
            scale_with_hdop: true,
            init_position_sigma: 1.0,
            init_velocity_sigma: 0.2,
            init_attitude_sigma: 0.01,
        }
    }
}

/// Error covariance plus the model it is propagated under.
#[derive(Debug, Clone, PartialEq)]
pub struct InsErrorModel {
    pub config: EkfConfig,
    pub error: Vec9,
    pub covariance: Mat9,
    /// Position innovation `r̂ − r_gps` of the most recent update.
    pub last_innovation: Option<Vector3<f64>>,
}

impl InsErrorModel {
    pub fn new(config: EkfConfig) -> Self {
        let mut diag = Vec9::zeros();
        for i in 0..3 {
            diag[i] = config.init_position_sigma.powi(2);
            diag[3 + i] = config.init_velocity_sigma.powi(2);
            diag[6 + i] = config.init_attitude_sigma.powi(2);
        }
        Self {
            config,
            error: Vec9::zeros(),
            covariance: Mat9::from_diagonal(&diag),
            last_innovation: None,
        }
    }

    /// Continuous-time system matrix at the given nominal state and specific force.
    pub fn system_matrix(&self, specific_force_n: &Vector3<f64>) -> Mat9 {
        let c = &self.config;
        let mut f = Mat9::zeros();
        f.fixed_view_mut::<3, 3>(0, 0).copy_from(&c.f_rr);
        f.fixed_view_mut::<3, 3>(0, 3).copy_from(&c.f_rv);
        f.fixed_view_mut::<3, 3>(3, 3)
            .copy_from(&-skew(&(2.0 * c.omega_ie + c.omega_en)));
        f.fixed_view_mut::<3, 3>(3, 6)
            .copy_from(&skew(specific_force_n));
        f.fixed_view_mut::<3, 3>(6, 0).copy_from(&c.f_er);
        f.fixed_view_mut::<3, 3>(6, 3).copy_from(&c.f_ev);
        f.fixed_view_mut::<3, 3>(6, 6)
            .copy_from(&skew(&(c.omega_ie + c.omega_en)));
        f
    }

    fn process_noise(&self, nominal: &InsState, dt: f64) -> Mat9 {
        let c = &self.config;
        let cbn = nominal.attitude.matrix();
        let mut q = Mat9::zeros();
        let iso = |s: f64| Matrix3::<f64>::identity() * (s * s);
        q.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&iso(c.position_noise));
        q.fixed_view_mut::<3, 3>(3, 3)
            .copy_from(&(cbn * iso(c.accel_noise) * cbn.transpose()));
        q.fixed_view_mut::<3, 3>(6, 6)
            .copy_from(&(cbn * iso(c.gyro_noise) * cbn.transpose()));
        q * dt
    }

    /// Propagates the error covariance over one IMU interval.
    pub fn predict(&mut self, nominal: &InsState, imu: &ImuSample, dt: f64) {
        let fn_ = nominal.attitude.apply(&imu.specific_force_b);
        let phi = Mat9::identity() + self.system_matrix(&fn_) * dt;
        self.error = phi * self.error;
        self.covariance = phi * self.covariance * phi.transpose() + self.process_noise(nominal, dt);
        symmetrize(&mut self.covariance);
    }

    pub fn gps_noise(&self, hdop: f64) -> Matrix3<f64> {
        let c = &self.config;
        let scale = if c.scale_with_hdop {
            hdop.max(1e-3).powi(2)
        } else {
            1.0
        };
        Matrix3::from_diagonal(&Vector3::new(
            c.gps_sigma_h.powi(2),
            c.gps_sigma_h.powi(2),
            c.gps_sigma_v.powi(2),
        )) * scale
    }

    /// Position update with a GPS fix already expressed in ENU, followed by
    /// error injection into `nominal` and reset.
    pub fn update_position(
        &mut self,
        nominal: &mut InsState,
        gps_enu: &Vec3Enu,
        noise: &Matrix3<f64>,
    ) -> Result<()> {
        let mut h = SMatrix::<f64, 3, 9>::zeros();
        h.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&Matrix3::identity());
        let measured_error = nominal.position - gps_enu;
        let innovation = measured_error - h * self.error;
        let s = h * self.covariance * h.transpose() + noise;
        let s_inv = s
            .try_inverse()
            .ok_or_else(|| Error::Numerical("singular GPS innovation covariance".into()))?;
        let k = self.covariance * h.transpose() * s_inv;
        self.error += k * innovation;
        // Joseph form keeps P symmetric positive semi-definite.
        let i_kh = Mat9::identity() - k * h;
        self.covariance = i_kh * self.covariance * i_kh.transpose() + k * noise * k.transpose();
        symmetrize(&mut self.covariance);
        self.check_covariance()?;
        self.last_innovation = Some(innovation);
        self.inject(nominal);
        Ok(())
    }

    fn inject(&mut self, nominal: &mut InsState) {
        let dr = self.error.fixed_rows::<3>(0).into_owned();
        let dv = self.error.fixed_rows::<3>(3).into_owned();
        let eps = self.error.fixed_rows::<3>(6).into_owned();
        nominal.position -= dr;
        nominal.velocity -= dv;
        nominal.attitude = Rotation::orthonormalize(&(exp_so3(&eps) * nominal.attitude.matrix()));
        self.error = Vec9::zeros();
    }

    pub fn check_covariance(&self) -> Result<()> {
        let p = &self.covariance;
        if !p.iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical("non-finite EKF covariance".into()));
        }
        let asym = (p - p.transpose()).abs().max();
        if asym > 1e-12 * (1.0 + p.abs().max()) {
            return Err(Error::Numerical(format!(
                "EKF covariance asymmetry {asym:e}"
            )));
        }
        let min_eig = p.symmetric_eigenvalues().min();
        if min_eig < -1e-12 {
            return Err(Error::Numerical(format!(
                "EKF covariance eigenvalue {min_eig:e}"
            )));
        }
        Ok(())
    }

    pub fn position_sigma(&self) -> Vector3<f64> {
        Vector3::new(
            self.covariance[(0, 0)],
            self.covariance[(1, 1)],
            self.covariance[(2, 2)],
        )
        .map(|v| v.max(0.0).sqrt())
    }
}

pub fn symmetrize<const N: usize>(m: &mut SMatrix<f64, N, N>) {
    let t = m.transpose();
    *m = (*m + t) * 0.5;
}

/// GPS fix in the local frame, paired with its reported quality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpsObservation {
    pub t: Timestamp,
    pub position: Vec3Enu,
    pub hdop: f64,
}

/// One EKF cycle: mechanize and propagate with `imu` over `dt`, then apply the
/// GPS fix if one arrived at the end of the interval.
pub fn gpsins_ekf_step(
    model: &mut InsErrorModel,
    nominal: &mut InsState,
    gps: Option<&GpsObservation>,
    imu: &ImuSample,
    dt: f64,
) -> Result<PoseEstimate> {
    model.predict(nominal, imu, dt);
    *nominal = ins_mechanize(nominal, imu, dt)?;
    if let Some(fix) = gps {
        let r = model.gps_noise(fix.hdop);
        model.update_position(nominal, &fix.position, &r)?;
    }
    Ok(PoseEstimate {
        t: imu.t + dt,
        position: nominal.position,
        sigma: model.position_sigma(),
        source: Algorithm::GpsinsEkf,
    })
}

/// Stateful wrapper running the EKF over time-ordered IMU and GPS streams.
#[derive(Debug, Clone)]
pub struct GpsInsFilter {
    pub model: InsErrorModel,
    pub nominal: InsState,
    last_imu: Option<ImuSample>,
}

impl GpsInsFilter {
    pub fn new(config: EkfConfig, initial: InsState) -> Self {
        Self {
            model: InsErrorModel::new(config),
            nominal: initial,
            last_imu: None,
        }
    }

    /// Consumes the IMU sample at time `imu.t`, optionally followed by a GPS
    /// fix taken at the same instant, and returns the pose at `imu.t`.
    pub fn advance(
        &mut self,
        imu: &ImuSample,
        gps: Option<&GpsObservation>,
    ) -> Result<PoseEstimate> {
        if let Some(prev) = self.last_imu {
            let dt = imu.t - prev.t;
            if dt > 0.0 {
                self.model.predict(&self.nominal, &prev, dt);
                self.nominal = ins_mechanize(&self.nominal, &prev, dt)?;
            }
        }
        self.last_imu = Some(*imu);
        if let Some(fix) = gps {
            let r = self.model.gps_noise(fix.hdop);
            self.model
                .update_position(&mut self.nominal, &fix.position, &r)?;
        }
        Ok(self.pose(imu.t))
    }

    pub fn pose(&self, t: Timestamp) -> PoseEstimate {
        PoseEstimate {
            t,
            position: self.nominal.position,
            sigma: self.model.position_sigma(),
            source: Algorithm::GpsinsEkf,
        }
    }

    pub fn last_innovation_norm(&self) -> f64 {
        self.model.last_innovation.map(|v| v.norm()).unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::STANDARD_GRAVITY;

    fn static_imu(t: f64) -> ImuSample {
        ImuSample {
            t,
            specific_force_b: Vector3::new(0.0, 0.0, STANDARD_GRAVITY),
            angular_rate_b: Vector3::zeros(),
        }
    }

    fn rest_at(p: Vec3Enu) -> InsState {
        InsState {
            position: p,
            velocity: Vector3::zeros(),
            attitude: Rotation::identity(),
        }
    }

    #[test]
    fn zero_innovation_leaves_state_and_shrinks_trace() {
        let mut model = InsErrorModel::new(EkfConfig::default());
        let mut nominal = rest_at(Vector3::new(1.0, 2.0, 3.0));
        let imu = static_imu(0.0);
        model.predict(&nominal, &imu, 0.01);
        nominal = ins_mechanize(&nominal, &imu, 0.01).unwrap();
        let before = nominal;
        let trace_before = model.covariance.trace();
        let r = model.gps_noise(1.0);
        model
            .update_position(&mut nominal, &before.position.clone(), &r)
            .unwrap();
        assert_eq!(nominal.position, before.position);
        assert_eq!(nominal.velocity, before.velocity);
        assert!(
            (nominal.attitude.matrix() - before.attitude.matrix())
                .abs()
                .max()
                < 1e-15
        );
        assert!(model.covariance.trace() <= trace_before);
        assert_eq!(model.last_innovation, Some(Vector3::zeros()));
    }

    // With F_rv = 0 and only position random walk, each position axis is an
    // independent scalar random-walk Kalman filter.
    #[test]
    fn one_dimensional_reduction_matches_scalar_kf() {
        let q = 0.3_f64;
        let r_sigma = 0.7_f64;
        let p0 = 2.0_f64;
        let cfg = EkfConfig {
            f_rv: Matrix3::zeros(),
            accel_noise: 0.0,
            gyro_noise: 0.0,
            position_noise: q,
            gps_sigma_h: r_sigma,
            gps_sigma_v: r_sigma,
            scale_with_hdop: false,
            init_position_sigma: p0,
            ..EkfConfig::default()
        };
        let dt = 0.1;
        let mut filter = GpsInsFilter::new(cfg, rest_at(Vector3::zeros()));

        let (mut x, mut p) = (0.0_f64, p0 * p0);
        for i in 0..200 {
            let t = i as f64 * dt;
            let z = (0.37 * t).sin() * 3.0 + ((i * 7919) % 13) as f64 * 0.05;
            let fix = GpsObservation {
                t,
                position: Vector3::new(z, -z, 0.5 * z),
                hdop: 1.0,
            };
            let pose = filter.advance(&static_imu(t), Some(&fix)).unwrap();

            if i > 0 {
                p += q * q * dt;
            }
            let k = p / (p + r_sigma * r_sigma);
            x += k * (z - x);
            p *= 1.0 - k;

            assert!((pose.position.x - x).abs() < 1e-9, "step {i}");
            assert!((pose.position.y + x).abs() < 1e-9);
            assert!((pose.sigma.x - p.sqrt()).abs() < 1e-9);
        }
    }

    #[test]
    fn gps_denied_drift_grows_superlinearly() {
        let bias = 0.01;
        let mut filter = GpsInsFilter::new(EkfConfig::default(), rest_at(Vector3::zeros()));
        let dt = 0.01;
        let mut err_at = Vec::new();
        for i in 0..=2000 {
            let t = i as f64 * dt;
            let imu = ImuSample {
                angular_rate_b: Vector3::new(bias, 0.0, 0.0),
                ..static_imu(t)
            };
            let pose = filter.advance(&imu, None).unwrap();
            if i == 500 || i == 1000 || i == 2000 {
                err_at.push(pose.position.norm());
            }
        }
        // truth is at rest at the origin
        assert!(err_at[1] > 2.0 * err_at[0]);
        assert!(err_at[2] > 2.0 * err_at[1]);
        assert!(err_at[2] > 10.0, "{err_at:?}");
    }

    #[test]
    fn covariance_stays_psd_with_updates() {
        let mut filter = GpsInsFilter::new(EkfConfig::default(), rest_at(Vector3::zeros()));
        for i in 0..1000 {
            let t = i as f64 * 0.01;
            let gps = (i % 10 == 0).then(|| GpsObservation {
                t,
                position: Vector3::new(0.1, -0.2, 0.05),
                hdop: 1.2,
            });
            filter.advance(&static_imu(t), gps.as_ref()).unwrap();
            filter.model.check_covariance().unwrap();
        }
    }
}
