//! Multi-sensor localization for climbing robots.
//!
//! A planar-array UWB anchor, a barometer and a GPS/IMU pair each feed a
//! per-sensor estimator (classical or learned). A per-axis attention block
//! turns those estimates into one fused observation with an adaptive
//! covariance, and an unscented Kalman filter smooths the result.

pub mod error;
pub mod eval;
pub mod fcnn;
pub mod frame;
pub mod fusion;
pub mod geodesy;
pub mod nnet;
pub mod pose;
pub mod runner;
pub mod sim;
pub mod solvers;
pub mod window;

pub use error::{Error, Result};
pub use frame::*;
pub use pose::{Algorithm, PoseEstimate};
pub use window::SlidingWindow;
