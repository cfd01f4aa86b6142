//! Single-anchor planar-array UWB geometry.
//!
//! The array reports a range `d` and two bearing angles measured from the
//! boresight (local +z) axis. The classical solution maps them to the local
//! vector `(d sin α, d sin β, d cos α cos β)` and rotates it into the
//! navigation frame. That parametrization is not norm-consistent: its length is
//! `d·sqrt(1 + sin²α sin²β)`, so it is exact only when one angle is zero.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{AnchorPose, UwbMeasurement, Vec3Enu};
use crate::pose::{Algorithm, PoseEstimate};

/// Measurement noise assumed when propagating uncertainty through the geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UwbNoise {
    pub range_sigma: f64,
    pub angle_sigma: f64,
}

impl Default for UwbNoise {
    fn default() -> Self {
        Self {
            range_sigma: 0.1,
            angle_sigma: 0.02,
        }
    }
}

/// Local-frame offset `(d sin α, d sin β, d cos α cos β)`.
pub fn local_offset(range: f64, alpha: f64, beta: f64) -> Vector3<f64> {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    Vector3::new(range * sa, range * sb, range * ca * cb)
}

fn local_jacobian(range: f64, alpha: f64, beta: f64) -> Matrix3<f64> {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    // columns: ∂/∂d, ∂/∂α, ∂/∂β
    #[rustfmt::skip]
    let j = Matrix3::new(
        sa, range * ca, 0.0,
        sb, 0.0, range * cb,
        ca * cb, -range * sa * cb, -range * ca * sb,
    );
    j
}

/// Classical geometric position from one UWB measurement.
pub fn uwb_geometric_solve(
    m: &UwbMeasurement,
    anchor: &AnchorPose,
    noise: &UwbNoise,
) -> PoseEstimate {
    let local = local_offset(m.range, m.alpha, m.beta);
    let position = anchor.position + anchor.orientation.apply(&local);

    let j = local_jacobian(m.range, m.alpha, m.beta);
    let meas_cov = Matrix3::from_diagonal(&Vector3::new(
        noise.range_sigma.powi(2),
        noise.angle_sigma.powi(2),
        noise.angle_sigma.powi(2),
    ));
    let r = anchor.orientation.matrix();
    let cov = r * j * meas_cov * j.transpose() * r.transpose();
    let sigma = cov.diagonal().map(|v| v.max(0.0).sqrt());

    PoseEstimate {
        t: m.t,
        position,
        sigma,
        source: Algorithm::UwbGeo,
    }
}

/// Ideal `(d, α, β)` that an anchor would report for `target`.
pub fn uwb_inverse(target: &Vec3Enu, anchor: &AnchorPose) -> Result<(f64, f64, f64)> {
    let v = anchor
        .orientation
        .apply_inverse(&(target - anchor.position));
    let d = v.norm();
    if d == 0.0 {
        return Err(Error::Domain("target coincides with the anchor".into()));
    }
    if v.z <= 0.0 {
        return Err(Error::Domain(format!(
            "target behind array plane (local z = {})",
            v.z
        )));
    }
    Ok((d, (v.x / d).asin(), (v.y / d).asin()))
}
