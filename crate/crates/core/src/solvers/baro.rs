//! Barometric altitude from the standard-atmosphere pressure model
//! `h = (T₀/V)·(1 − (P/P₀)^(R·V/(g·M)))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reference conditions for the pressure–altitude model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaroReference {
    /// Pressure at the reference altitude, Pa.
    pub p0: f64,
    /// Temperature at the reference altitude, K.
    pub t0: f64,
    /// Temperature lapse rate, K/m.
    pub lapse_rate: f64,
    pub gravity: f64,
    /// Molar mass of dry air, kg/mol.
    pub molar_mass: f64,
    /// Universal gas constant, J/(mol·K).
    pub gas_constant: f64,
}

impl Default for BaroReference {
    fn default() -> Self {
        Self {
            p0: 101_325.0,
            t0: 288.15,
            lapse_rate: 0.0065,
            gravity: 9.80665,
            molar_mass: 0.028_964_4,
            gas_constant: 8.314_46,
        }
    }
}

impl BaroReference {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("p0", self.p0),
            ("t0", self.t0),
            ("lapse_rate", self.lapse_rate),
            ("gravity", self.gravity),
            ("molar_mass", self.molar_mass),
            ("gas_constant", self.gas_constant),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!(
                    "baro reference {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn exponent(&self) -> f64 {
        self.gas_constant * self.lapse_rate / (self.gravity * self.molar_mass)
    }

    /// Altitude at which the model's pressure reaches zero.
    pub fn ceiling(&self) -> f64 {
        self.t0 / self.lapse_rate
    }
}

pub fn baro_altitude(pressure: f64, r: &BaroReference) -> Result<f64> {
    if !(pressure.is_finite() && pressure > 0.0) {
        return Err(Error::Domain(format!(
            "pressure must be positive, got {pressure}"
        )));
    }
    Ok(r.ceiling() * (1.0 - (pressure / r.p0).powf(r.exponent())))
}

pub fn baro_inverse(altitude: f64, r: &BaroReference) -> Result<f64> {
    if !(altitude.is_finite() && altitude < r.ceiling()) {
        return Err(Error::Domain(format!(
            "altitude {altitude} m at or above model ceiling {} m",
            r.ceiling()
        )));
    }
    Ok(r.p0 * (1.0 - altitude / r.ceiling()).powf(1.0 / r.exponent()))
}
