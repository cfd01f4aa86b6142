//! Strapdown mechanization in the local ENU frame.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{gravity_enu, ImuSample, Rotation, Vec3Enu};

/// Nominal navigation state: position, velocity and body→ENU attitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InsState {
    pub position: Vec3Enu,
    pub velocity: Vector3<f64>,
    pub attitude: Rotation,
}

/// Exponential map of a rotation vector.
pub fn exp_so3(theta: &Vector3<f64>) -> Matrix3<f64> {
    Rotation3::new(*theta).into_inner()
}

/// Rotation vector of a rotation matrix, accurate for small angles.
pub fn log_so3(r: &Matrix3<f64>) -> Vector3<f64> {
    let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*r));
    let (w, v) = (q.scalar(), q.vector().into_owned());
    let (w, v) = if w < 0.0 { (-w, -v) } else { (w, v) };
    let s = v.norm();
    if s < 1e-300 {
        return Vector3::zeros();
    }
    v * (2.0 * s.atan2(w) / s)
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    v.cross_matrix()
}

/// Advances `state` by `dt` seconds using one IMU sample held constant over
/// the step (first-order Euler for velocity and position).
pub fn ins_mechanize(state: &InsState, imu: &ImuSample, dt: f64) -> Result<InsState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Domain(format!("mechanization step dt = {dt}")));
    }
    let c = state.attitude.matrix();
    let accel = c * imu.specific_force_b + gravity_enu();
    let attitude = Rotation::orthonormalize(&(c * exp_so3(&(imu.angular_rate_b * dt))));
    Ok(InsState {
        position: state.position + state.velocity * dt,
        velocity: state.velocity + accel * dt,
        attitude,
    })
}
