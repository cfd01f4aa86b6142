use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::frame::{Timestamp, Vec3Enu};

/// The six compared localization algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Baro,
    BaroFcnn,
    UwbGeo,
    UwbFcnn,
    GpsinsEkf,
    Amfa,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Baro,
        Algorithm::BaroFcnn,
        Algorithm::UwbGeo,
        Algorithm::UwbFcnn,
        Algorithm::GpsinsEkf,
        Algorithm::Amfa,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Baro => "baro",
            Algorithm::BaroFcnn => "baro-fcnn",
            Algorithm::UwbGeo => "uwb-geo",
            Algorithm::UwbFcnn => "uwb-fcnn",
            Algorithm::GpsinsEkf => "gpsins-ekf",
            Algorithm::Amfa => "amfa",
        }
    }

    /// Axes the algorithm estimates; barometric algorithms only observe `up`.
    pub fn observed_axes(self) -> [bool; 3] {
        match self {
            Algorithm::Baro | Algorithm::BaroFcnn => [false, false, true],
            _ => [true; 3],
        }
    }

    /// Whether the algorithm fuses several sensors.
    pub fn is_fusion(self) -> bool {
        matches!(self, Algorithm::Amfa)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm '{s}'")))
    }
}

/// A position estimate with per-axis one-sigma uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseEstimate {
    pub t: Timestamp,
    pub position: Vec3Enu,
    pub sigma: Vector3<f64>,
    pub source: Algorithm,
}
