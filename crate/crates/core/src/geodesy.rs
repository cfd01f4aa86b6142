//! WGS-84 geodetic ↔ local ENU conversion through Earth-centered coordinates.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{Geodetic, Vec3Enu};

pub const WGS84_A: f64 = 6_378_137.0;
pub const WGS84_F: f64 = 1.0 / 298.257_223_563;
pub const WGS84_E2: f64 = WGS84_F * (2.0 - WGS84_F);

fn check_lat(lat: f64) -> Result<()> {
    if lat.is_finite() && lat.abs() <= std::f64::consts::FRAC_PI_2 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "latitude {lat} rad outside [-π/2, π/2]"
        )))
    }
}

pub fn geodetic_to_ecef(g: &Geodetic) -> Result<Vector3<f64>> {
    check_lat(g.lat)?;
    let (sl, cl) = g.lat.sin_cos();
    let (so, co) = g.lon.sin_cos();
    let n = WGS84_A / (1.0 - WGS84_E2 * sl * sl).sqrt();
    Ok(Vector3::new(
        (n + g.height) * cl * co,
        (n + g.height) * cl * so,
        (n * (1.0 - WGS84_E2) + g.height) * sl,
    ))
}

pub fn ecef_to_geodetic(p: &Vector3<f64>) -> Geodetic {
    let lon = p.y.atan2(p.x);
    let rho = p.x.hypot(p.y);
    let mut lat = p.z.atan2(rho * (1.0 - WGS84_E2));
    for _ in 0..30 {
        let sl = lat.sin();
        let n = WGS84_A / (1.0 - WGS84_E2 * sl * sl).sqrt();
        let h = rho * lat.cos() + p.z * sl - WGS84_A * (1.0 - WGS84_E2 * sl * sl).sqrt();
        let next = p.z.atan2(rho * (1.0 - WGS84_E2 * n / (n + h)));
        let done = (next - lat).abs() < 1e-15;
        lat = next;
        if done {
            break;
        }
    }
    let sl = lat.sin();
    let height = rho * lat.cos() + p.z * sl - WGS84_A * (1.0 - WGS84_E2 * sl * sl).sqrt();
    Geodetic { lat, lon, height }
}

/// Local tangent plane anchored at a fixed geodetic origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalFrame {
    origin: Geodetic,
    origin_ecef: Vector3<f64>,
    /// ECEF → ENU rotation.
    ecef_to_enu: Matrix3<f64>,
}

impl LocalFrame {
    pub fn new(origin: Geodetic) -> Result<Self> {
        let origin_ecef = geodetic_to_ecef(&origin)?;
        let (sl, cl) = origin.lat.sin_cos();
        let (so, co) = origin.lon.sin_cos();
        #[rustfmt::skip]
        let ecef_to_enu = Matrix3::new(
            -so,       co,      0.0,
            -sl * co, -sl * so, cl,
             cl * co,  cl * so, sl,
        );
        Ok(Self {
            origin,
            origin_ecef,
            ecef_to_enu,
        })
    }

    pub fn origin(&self) -> Geodetic {
        self.origin
    }

    pub fn to_enu(&self, g: &Geodetic) -> Result<Vec3Enu> {
        let p = geodetic_to_ecef(g)?;
        Ok(self.ecef_to_enu * (p - self.origin_ecef))
    }

    pub fn to_geodetic(&self, enu: &Vec3Enu) -> Geodetic {
        ecef_to_geodetic(&(self.origin_ecef + self.ecef_to_enu.transpose() * enu))
    }
}

/// One-shot conversion of `fix` into the ENU frame anchored at `origin`.
pub fn geodetic_to_enu(fix: &Geodetic, origin: &Geodetic) -> Result<Vec3Enu> {
    LocalFrame::new(*origin)?.to_enu(fix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn g(lat_deg: f64, lon_deg: f64, h: f64) -> Geodetic {
        Geodetic {
            lat: lat_deg.to_radians(),
            lon: lon_deg.to_radians(),
            height: h,
        }
    }

    #[test]
    fn origin_maps_to_zero() {
        let o = g(31.2, 121.5, 12.0);
        assert!(geodetic_to_enu(&o, &o).unwrap().norm() < 1e-12);
    }

    #[test]
    fn equator_latitude_step_matches_meridian_radius() {
        // meridian radius of curvature at φ = 0: M = a(1 − e²)
        let dphi = 1e-5_f64.to_radians();
        let expected_north = WGS84_A * (1.0 - WGS84_E2) * dphi;
        assert!((expected_north - 1.10574).abs() < 1e-5);
        let enu = geodetic_to_enu(&g(1e-5, 0.0, 0.0), &g(0.0, 0.0, 0.0)).unwrap();
        assert!((enu.y - expected_north).abs() < 1e-6, "{}", enu.y);
        assert!(enu.x.abs() < 1e-9);
        assert!(enu.z.abs() < 1e-6);
    }

    #[test]
    fn pure_height_offset() {
        let o = g(45.0, 9.0, 100.0);
        let enu = geodetic_to_enu(&g(45.0, 9.0, 105.0), &o).unwrap();
        assert!((enu - Vector3::new(0.0, 0.0, 5.0)).norm() < 1e-9);
    }

    #[test]
    fn invalid_latitude_is_domain_error() {
        let o = g(0.0, 0.0, 0.0);
        let bad = Geodetic {
            lat: 1.6,
            lon: 0.0,
            height: 0.0,
        };
        assert!(matches!(geodetic_to_enu(&bad, &o), Err(Error::Domain(_))));
        assert!(LocalFrame::new(bad).is_err());
    }

    proptest! {
        #[test]
        fn enu_round_trip_within_10km(
            lat in -80.0f64..80.0, lon in -179.0f64..179.0, h in -100.0f64..3000.0,
            e in -7000.0f64..7000.0, n in -7000.0f64..7000.0, u in -500.0f64..500.0,
        ) {
            let frame = LocalFrame::new(g(lat, lon, h)).unwrap();
            let enu = Vector3::new(e, n, u);
            let geo = frame.to_geodetic(&enu);
            let back = frame.to_enu(&geo).unwrap();
            prop_assert!((back - enu).norm() < 1e-6);
            let geo2 = frame.to_geodetic(&back);
            prop_assert!((geo2.lat - geo.lat).abs() < 1e-9);
            prop_assert!((geo2.lon - geo.lon).abs() < 1e-9);
            prop_assert!((geo2.height - geo.height).abs() < 1e-6);
        }
    }
}
