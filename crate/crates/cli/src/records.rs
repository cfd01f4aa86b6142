//! JSONL record schemas (SI units, radians) and their conversions.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use climbloc::frame::{
    AnchorPose, BaroSample, Geodetic, GpsFix, GroundTruthPoint, ImuSample, Rotation, UwbMeasurement,
};
use climbloc::fusion::FusedObservation;
use climbloc::solvers::BaroReference;
use climbloc::{Algorithm, PoseEstimate};
use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuRecord {
    pub t: f64,
    pub fx: f64,
    pub fy: f64,
    pub fz: f64,
    pub wx: f64,
    pub wy: f64,
    pub wz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpsRecord {
    pub t: f64,
    pub lat: f64,
    pub lon: f64,
    pub h: f64,
    pub hdop: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UwbRecord {
    pub t: f64,
    pub d: f64,
    pub alpha: f64,
    pub beta: f64,
    pub nlos: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaroRecord {
    pub t: f64,
    pub p: f64,
    pub h_int: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
    pub qw: f64,
    pub qx: f64,
    pub qy: f64,
    pub qz: f64,
}

/// One estimated epoch. Axes an algorithm does not estimate are `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub t: f64,
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub z: Option<f64>,
    pub sx: Option<f64>,
    pub sy: Option<f64>,
    pub sz: Option<f64>,
    pub algo: String,
}

/// Fusion ratios of one fused epoch, each `[east, north, up]`. Modalities
/// that do not observe an axis carry 0 there.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioRecord {
    pub t: f64,
    pub uwb: [f64; 3],
    pub gps: [f64; 3],
    pub baro: [f64; 3],
}

impl From<&FusedObservation> for RatioRecord {
    fn from(f: &FusedObservation) -> Self {
        let m = |i: usize| std::array::from_fn(|s| f.ratios[s][i]);
        Self {
            t: f.t,
            uwb: m(0),
            gps: m(1),
            baro: m(2),
        }
    }
}

const RATIO_HEADER: &str = "t,uwb_e,uwb_n,uwb_u,gps_e,gps_n,gps_u,baro_e,baro_n,baro_u";

pub fn ratios_csv(records: &[RatioRecord]) -> String {
    let mut out = format!("{RATIO_HEADER}\n");
    for r in records {
        out.push_str(&format!("{:?}", r.t));
        for v in r.uwb.iter().chain(&r.gps).chain(&r.baro) {
            out.push(',');
            out.push_str(&format!("{v:?}"));
        }
        out.push('\n');
    }
    out
}

pub fn parse_ratios_csv(text: &str) -> CliResult<Vec<RatioRecord>> {
    let mut lines = text.lines();
    if lines.next() != Some(RATIO_HEADER) {
        return Err(CliError::Config(
            "ratios file has an unexpected header".into(),
        ));
    }
    lines
        .enumerate()
        .map(|(i, l)| {
            let v: Vec<f64> = l
                .split(',')
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|e| CliError::Config(format!("ratios line {}: {e}", i + 2)))?;
            if v.len() != 10 {
                return Err(CliError::Config(format!(
                    "ratios line {}: expected 10 columns",
                    i + 2
                )));
            }
            Ok(RatioRecord {
                t: v[0],
                uwb: [v[1], v[2], v[3]],
                gps: [v[4], v[5], v[6]],
                baro: [v[7], v[8], v[9]],
            })
        })
        .collect()
}

/// Scene constants shared by every stream of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorFile {
    pub origin: Geodetic,
    pub anchor: AnchorPose,
    pub baro_reference: BaroReference,
}

impl From<&ImuSample> for ImuRecord {
    fn from(s: &ImuSample) -> Self {
        let (f, w) = (s.specific_force_b, s.angular_rate_b);
        Self {
            t: s.t,
            fx: f.x,
            fy: f.y,
            fz: f.z,
            wx: w.x,
            wy: w.y,
            wz: w.z,
        }
    }
}

impl From<&ImuRecord> for ImuSample {
    fn from(r: &ImuRecord) -> Self {
        Self {
            t: r.t,
            specific_force_b: Vector3::new(r.fx, r.fy, r.fz),
            angular_rate_b: Vector3::new(r.wx, r.wy, r.wz),
        }
    }
}

impl From<&GpsFix> for GpsRecord {
    fn from(g: &GpsFix) -> Self {
        Self {
            t: g.t,
            lat: g.lat,
            lon: g.lon,
            h: g.height,
            hdop: g.hdop,
            valid: g.valid,
        }
    }
}

impl From<&GpsRecord> for GpsFix {
    fn from(r: &GpsRecord) -> Self {
        Self {
            t: r.t,
            lat: r.lat,
            lon: r.lon,
            height: r.h,
            hdop: r.hdop,
            valid: r.valid,
        }
    }
}

impl From<&UwbMeasurement> for UwbRecord {
    fn from(m: &UwbMeasurement) -> Self {
        Self {
            t: m.t,
            d: m.range,
            alpha: m.alpha,
            beta: m.beta,
            nlos: m.nlos_confidence,
        }
    }
}

impl From<&UwbRecord> for UwbMeasurement {
    fn from(r: &UwbRecord) -> Self {
        Self {
            t: r.t,
            range: r.d,
            alpha: r.alpha,
            beta: r.beta,
            nlos_confidence: r.nlos,
        }
    }
}

impl From<&BaroSample> for BaroRecord {
    fn from(s: &BaroSample) -> Self {
        Self {
            t: s.t,
            p: s.pressure,
            h_int: s.internal_altitude,
        }
    }
}

impl From<&BaroRecord> for BaroSample {
    fn from(r: &BaroRecord) -> Self {
        Self {
            t: r.t,
            pressure: r.p,
            internal_altitude: r.h_int,
        }
    }
}

impl From<&GroundTruthPoint> for TruthRecord {
    fn from(p: &GroundTruthPoint) -> Self {
        let q = p.attitude.to_quaternion();
        Self {
            t: p.t,
            x: p.position.x,
            y: p.position.y,
            z: p.position.z,
            vx: p.velocity.x,
            vy: p.velocity.y,
            vz: p.velocity.z,
            qw: q.w,
            qx: q.i,
            qy: q.j,
            qz: q.k,
        }
    }
}

impl From<&TruthRecord> for GroundTruthPoint {
    fn from(r: &TruthRecord) -> Self {
        let q = UnitQuaternion::from_quaternion(Quaternion::new(r.qw, r.qx, r.qy, r.qz));
        Self {
            t: r.t,
            position: Vector3::new(r.x, r.y, r.z),
            velocity: Vector3::new(r.vx, r.vy, r.vz),
            attitude: Rotation::from_quaternion(&q),
        }
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl TrajectoryRecord {
    pub fn from_estimate(p: &PoseEstimate, algo: Algorithm) -> Self {
        Self {
            t: p.t,
            x: finite(p.position.x),
            y: finite(p.position.y),
            z: finite(p.position.z),
            sx: finite(p.sigma.x),
            sy: finite(p.sigma.y),
            sz: finite(p.sigma.z),
            algo: algo.name().into(),
        }
    }

    pub fn to_estimate(&self) -> CliResult<PoseEstimate> {
        let nan = f64::NAN;
        Ok(PoseEstimate {
            t: self.t,
            position: Vector3::new(
                self.x.unwrap_or(nan),
                self.y.unwrap_or(nan),
                self.z.unwrap_or(nan),
            ),
            sigma: Vector3::new(
                self.sx.unwrap_or(nan),
                self.sy.unwrap_or(nan),
                self.sz.unwrap_or(nan),
            ),
            source: self.algo.parse()?,
        })
    }
}

pub fn write_jsonl<T: Serialize>(
    path: &Path,
    records: impl IntoIterator<Item = T>,
) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, &r).map_err(|e| CliError::Config(e.to_string()))?;
        w.write_all(b"\n").map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Reads one record per line; blank lines are skipped.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| CliError::Config(format!("{}:{}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
    s.push('\n');
    write_text(path, &s)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let s = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&s).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn write_text(path: &Path, s: &str) -> CliResult<()> {
    std::fs::write(path, s).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratios_csv_round_trip() {
        let r = RatioRecord {
            t: 0.1,
            uwb: [0.25, 1.0 / 3.0, 0.0],
            gps: [0.75, 2.0 / 3.0, 0.4],
            baro: [0.0, 0.0, 0.6],
        };
        let text = ratios_csv(std::slice::from_ref(&r));
        assert_eq!(parse_ratios_csv(&text).unwrap(), vec![r]);
        assert!(parse_ratios_csv("t,x\n").is_err());
    }

    #[test]
    fn trajectory_nulls_round_trip() {
        let p = PoseEstimate {
            t: 1.5,
            position: Vector3::new(f64::NAN, f64::NAN, 3.25),
            sigma: Vector3::new(f64::NAN, f64::NAN, 0.1),
            source: Algorithm::Baro,
        };
        let r = TrajectoryRecord::from_estimate(&p, Algorithm::Baro);
        let line = serde_json::to_string(&r).unwrap();
        assert_eq!(
            line,
            r#"{"t":1.5,"x":null,"y":null,"z":3.25,"sx":null,"sy":null,"sz":0.1,"algo":"baro"}"#
        );
        let back: TrajectoryRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(back.to_estimate().unwrap().position.z, 3.25);
    }

    #[test]
    fn stream_records_use_schema_names() {
        let u = UwbRecord::from(&UwbMeasurement {
            t: 0.1,
            range: 10.0,
            alpha: 0.2,
            beta: -0.1,
            nlos_confidence: 0.05,
        });
        assert_eq!(
            serde_json::to_string(&u).unwrap(),
            r#"{"t":0.1,"d":10.0,"alpha":0.2,"beta":-0.1,"nlos":0.05}"#
        );
        let b = BaroRecord::from(&BaroSample {
            t: 0.0,
            pressure: 101325.0,
            internal_altitude: 0.0,
        });
        assert_eq!(
            serde_json::to_string(&b).unwrap(),
            r#"{"t":0.0,"p":101325.0,"h_int":0.0}"#
        );
    }

    #[test]
    fn truth_attitude_round_trips() {
        let p = GroundTruthPoint {
            t: 0.0,
            position: Vector3::new(1.0, 2.0, 3.0),
            velocity: Vector3::zeros(),
            attitude: Rotation::from_euler(0.1, -0.2, 0.3),
        };
        let back = GroundTruthPoint::from(&TruthRecord::from(&p));
        assert!((back.attitude.matrix() - p.attitude.matrix()).abs().max() < 1e-12);
        assert_eq!(back.position, p.position);
    }
}
