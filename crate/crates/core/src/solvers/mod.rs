//! Classical per-sensor estimators.

pub mod baro;
pub mod ekf;
pub mod ins;
pub mod uwb;

pub use baro::{baro_altitude, baro_inverse, BaroReference};
pub use ekf::{
    gpsins_ekf_step, symmetrize, EkfConfig, GpsInsFilter, GpsObservation, InsErrorModel,
};
pub use ins::{exp_so3, ins_mechanize, log_so3, InsState};
pub use uwb::{uwb_geometric_solve, uwb_inverse, UwbNoise};
