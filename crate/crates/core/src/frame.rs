//! Shared measurement and frame types.
//!
//! Navigation-frame quantities are expressed in a local East-North-Up (ENU)
//! tangent plane; every `Vec3Enu` is ordered `[east, north, up]` in meters.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Seconds since the start of a log.
pub type Timestamp = f64;

/// ENU position or displacement, `[east, north, up]` in meters.
pub type Vec3Enu = Vector3<f64>;

/// Standard gravity magnitude, m/s².
pub const STANDARD_GRAVITY: f64 = 9.80665;

/// Gravity vector in the ENU navigation frame.
pub fn gravity_enu() -> Vec3Enu {
    Vector3::new(0.0, 0.0, -STANDARD_GRAVITY)
}

const ROTATION_TOL: f64 = 1e-9;

/// Proper 3×3 rotation matrix, validated on construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Matrix3<f64>", into = "Matrix3<f64>")]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(Error::NotRotation("non-finite entry".into()));
        }
        let ortho = (m.transpose() * m - Matrix3::identity()).abs().max();
        if ortho > ROTATION_TOL {
            return Err(Error::NotRotation(format!("|RᵀR − I| = {ortho:e}")));
        }
        let det = m.determinant();
        if (det - 1.0).abs() > ROTATION_TOL {
            return Err(Error::NotRotation(format!("det = {det}")));
        }
        Ok(Self(m))
    }

    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Rotation of `angle` radians about the ENU up axis (counter-clockwise seen from above).
    pub fn yaw(angle: f64) -> Self {
        Self::from_quaternion(&UnitQuaternion::from_euler_angles(0.0, 0.0, angle))
    }

    pub fn from_euler(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self::from_quaternion(&UnitQuaternion::from_euler_angles(roll, pitch, yaw))
    }

    pub fn from_quaternion(q: &UnitQuaternion<f64>) -> Self {
        Self(q.to_rotation_matrix().into_inner())
    }

    /// Builds a rotation from an arbitrary near-orthonormal matrix by polar
    /// projection (SVD), which is how integrated attitudes are re-orthonormalized.
    pub fn orthonormalize(m: &Matrix3<f64>) -> Self {
        let svd = m.svd(true, true);
        let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut r = u * v_t;
        if r.determinant() < 0.0 {
            let mut u = u;
            u.column_mut(2).neg_mut();
            r = u * v_t;
        }
        Self(r)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn to_quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_matrix(&self.0)
    }

    pub fn apply(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }

    pub fn apply_inverse(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0.transpose() * v
    }

    pub fn compose(&self, other: &Rotation) -> Rotation {
        Rotation(self.0 * other.0)
    }

    pub fn inverse(&self) -> Rotation {
        Rotation(self.0.transpose())
    }
}

impl TryFrom<Matrix3<f64>> for Rotation {
    type Error = Error;
    fn try_from(m: Matrix3<f64>) -> Result<Self> {
        Rotation::new(m)
    }
}

impl From<Rotation> for Matrix3<f64> {
    fn from(r: Rotation) -> Self {
        r.0
    }
}

/// Anything carrying a measurement timestamp.
pub trait Timestamped {
    fn timestamp(&self) -> Timestamp;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuSample {
    pub t: Timestamp,
    /// Specific force in the body frame, m/s².
    pub specific_force_b: Vector3<f64>,
    /// Body angular rate relative to inertial space, rad/s.
    pub angular_rate_b: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpsFix {
    pub t: Timestamp,
    /// Geodetic latitude, radians.
    pub lat: f64,
    /// Geodetic longitude, radians.
    pub lon: f64,
    /// Ellipsoidal height, meters.
    pub height: f64,
    pub hdop: f64,
    pub valid: bool,
}

impl GpsFix {
    pub fn geodetic(&self) -> Geodetic {
        Geodetic {
            lat: self.lat,
            lon: self.lon,
            height: self.height,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UwbMeasurement {
    pub t: Timestamp,
    /// Range to the anchor's array center, meters.
    pub range: f64,
    /// Angle off boresight in the array's local x-z plane, radians.
    pub alpha: f64,
    /// Angle off boresight in the array's local y-z plane, radians.
    pub beta: f64,
    /// Probability-like NLOS indicator in `[0, 1]`.
    pub nlos_confidence: f64,
}

impl UwbMeasurement {
    pub fn validate(&self) -> Result<()> {
        let half_pi = std::f64::consts::FRAC_PI_2;
        if !(self.range >= 0.0 && self.range.is_finite()) {
            return Err(Error::Domain(format!("uwb range {}", self.range)));
        }
        if !(self.alpha.abs() < half_pi && self.beta.abs() < half_pi) {
            return Err(Error::Domain(format!(
                "uwb angles ({}, {})",
                self.alpha, self.beta
            )));
        }
        if !(0.0..=1.0).contains(&self.nlos_confidence) {
            return Err(Error::Domain(format!(
                "nlos confidence {}",
                self.nlos_confidence
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaroSample {
    pub t: Timestamp,
    /// Static pressure, Pa.
    pub pressure: f64,
    /// Altitude produced by the sensor's built-in pressure model, meters.
    pub internal_altitude: f64,
}

/// Pose of a planar-array UWB anchor: mean antenna position and local→navigation rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorPose {
    pub position: Vec3Enu,
    pub orientation: Rotation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthPoint {
    pub t: Timestamp,
    pub position: Vec3Enu,
    pub velocity: Vector3<f64>,
    /// Body→navigation attitude.
    pub attitude: Rotation,
}

macro_rules! impl_timestamped {
    ($($ty:ty),*) => {
        $(impl Timestamped for $ty {
            fn timestamp(&self) -> Timestamp { self.t }
        })*
    };
}

impl_timestamped!(
    ImuSample,
    GpsFix,
    UwbMeasurement,
    BaroSample,
    GroundTruthPoint
);

/// Geodetic coordinates on the WGS-84 ellipsoid (radians, meters).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geodetic {
    pub lat: f64,
    pub lon: f64,
    pub height: f64,
}
