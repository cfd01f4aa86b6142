//! Trajectory error metrics, CDF tables and boxplot summaries.
//!
//! "STD" everywhere is the population standard deviation of the per-epoch
//! Euclidean error magnitudes within one run.

use std::fmt::Write as _;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::GroundTruthPoint;
use crate::pose::PoseEstimate;
use crate::sim::truth_at;

/// Hardware reference row (RMSE, STD, MAX in meters) shown under reports.
pub const HARDWARE_REFERENCE: (f64, f64, f64) = (0.48, 0.43, 1.50);
pub const HARDWARE_REFERENCE_LABEL: &str = "[paper, hardware]";

/// Per-epoch errors against truth. Axes not estimated are left out of the
/// magnitudes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErrorSeries {
    pub t: Vec<f64>,
    pub errors: Vec<Vector3<f64>>,
    pub magnitudes: Vec<f64>,
    /// Reported covariance trace per matched epoch (observed axes only).
    pub traces: Vec<f64>,
    pub axes: [bool; 3],
    pub excluded: usize,
}

/// Nearest-neighbour matching with truth within half the truth step;
/// unmatched epochs are counted and dropped.
pub fn match_errors(
    est: &[PoseEstimate],
    truth: &[GroundTruthPoint],
    axes: [bool; 3],
) -> ErrorSeries {
    let mut s = ErrorSeries {
        axes,
        ..ErrorSeries::default()
    };
    for e in est {
        let Some(p) = truth_at(truth, e.t) else {
            s.excluded += 1;
            continue;
        };
        let mut err = Vector3::zeros();
        let mut trace = 0.0;
        for a in 0..3 {
            if axes[a] {
                err[a] = e.position[a] - p.position[a];
                trace += e.sigma[a] * e.sigma[a];
            }
        }
        s.t.push(e.t);
        s.errors.push(err);
        s.magnitudes.push(err.norm());
        s.traces.push(trace);
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub algorithm: String,
    pub rmse: f64,
    pub std: f64,
    pub max: f64,
    /// Mean absolute error per axis; NaN for axes the algorithm does not estimate.
    pub mae: [f64; 3],
    pub matched_epochs: usize,
    pub excluded_epochs: usize,
}

pub fn metrics_from_series(algorithm: &str, s: &ErrorSeries) -> Result<MetricsRow> {
    let n = s.magnitudes.len();
    if n == 0 {
        return Err(Error::InsufficientData(format!(
            "{algorithm}: no epoch matched truth"
        )));
    }
    let nf = n as f64;
    let rmse = (s.magnitudes.iter().map(|m| m * m).sum::<f64>() / nf).sqrt();
    let mean = s.magnitudes.iter().sum::<f64>() / nf;
    let std = (s.magnitudes.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / nf).sqrt();
    let max = s.magnitudes.iter().copied().fold(0.0, f64::max);
    let mae = std::array::from_fn(|a| {
        if s.axes[a] {
            s.errors.iter().map(|e| e[a].abs()).sum::<f64>() / nf
        } else {
            f64::NAN
        }
    });
    Ok(MetricsRow {
        algorithm: algorithm.into(),
        rmse,
        std,
        max,
        mae,
        matched_epochs: n,
        excluded_epochs: s.excluded,
    })
}

pub fn compute_metrics(
    algorithm: &str,
    est: &[PoseEstimate],
    truth: &[GroundTruthPoint],
    axes: [bool; 3],
) -> Result<MetricsRow> {
    metrics_from_series(algorithm, &match_errors(est, truth, axes))
}

/// Fraction of magnitudes `≤` each threshold.
pub fn compute_cdf(magnitudes: &[f64], thresholds: &[f64]) -> Result<Vec<f64>> {
    if thresholds.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("cdf thresholds must be ascending".into()));
    }
    if magnitudes.is_empty() {
        return Ok(vec![0.0; thresholds.len()]);
    }
    let mut sorted = magnitudes.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(thresholds
        .iter()
        .map(|&t| sorted.partition_point(|&m| m <= t) as f64 / n)
        .collect())
}

/// `k1 · mean ‖e‖ + k2 · mean tr Σ`; diagnostic only.
pub fn composite_objective(s: &ErrorSeries, k1: f64, k2: f64) -> Result<f64> {
    if k1 < 0.0 || k2 < 0.0 {
        return Err(Error::Config(
            "composite weights must be non-negative".into(),
        ));
    }
    let n = s.magnitudes.len().max(1) as f64;
    let mean_err = s.magnitudes.iter().sum::<f64>() / n;
    let mean_trace = s.traces.iter().sum::<f64>() / n;
    Ok(k1 * mean_err + k2 * mean_trace)
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxplotSummary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    /// Values outside `[Q1 − 1.5 IQR, Q3 + 1.5 IQR]`.
    pub outliers: Vec<f64>,
}

pub fn boxplot_summary(magnitudes: &[f64]) -> Result<BoxplotSummary> {
    if magnitudes.is_empty() {
        return Err(Error::InsufficientData("boxplot of empty series".into()));
    }
    let mut sorted = magnitudes.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    Ok(BoxplotSummary {
        min: sorted[0],
        q1,
        median: quantile_sorted(&sorted, 0.5),
        q3,
        max: *sorted.last().unwrap(),
        outliers: sorted
            .iter()
            .copied()
            .filter(|&v| v < lo || v > hi)
            .collect(),
    })
}

fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:.6}")
    }
}

/// `algorithm,rmse,std,max,mae_x,mae_y,mae_z,matched_epochs`, optionally
/// followed by the hardware reference row.
pub fn metrics_csv(rows: &[MetricsRow], with_reference: bool) -> String {
    let mut out = String::from("algorithm,rmse,std,max,mae_x,mae_y,mae_z,matched_epochs\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.algorithm,
            num(r.rmse),
            num(r.std),
            num(r.max),
            num(r.mae[0]),
            num(r.mae[1]),
            num(r.mae[2]),
            r.matched_epochs
        );
    }
    if with_reference {
        let (a, b, c) = HARDWARE_REFERENCE;
        let _ = writeln!(out, "{HARDWARE_REFERENCE_LABEL},{a:.2},{b:.2},{c:.2},,,,");
    }
    out
}

/// `threshold,<algo>...`, one row per threshold.
pub fn cdf_csv(thresholds: &[f64], columns: &[(String, Vec<f64>)]) -> String {
    let mut out = String::from("threshold");
    for (name, _) in columns {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (i, t) in thresholds.iter().enumerate() {
        out.push_str(&format!("{t:.3}"));
        for (_, v) in columns {
            out.push_str(&format!(",{:.6}", v[i]));
        }
        out.push('\n');
    }
    out
}

/// `algorithm,min,q1,median,q3,max,outliers` with outliers counted.
pub fn boxplot_csv(rows: &[(String, BoxplotSummary)]) -> String {
    let mut out = String::from("algorithm,min,q1,median,q3,max,outliers\n");
    for (name, b) in rows {
        let _ = writeln!(
            out,
            "{name},{},{},{},{},{},{}",
            num(b.min),
            num(b.q1),
            num(b.median),
            num(b.q3),
            num(b.max),
            b.outliers.len()
        );
    }
    out
}

/// Evenly spaced thresholds `0, step, …, max`.
pub fn default_thresholds(max: f64, step: f64) -> Vec<f64> {
    let n = (max / step).round() as usize;
    (0..=n).map(|i| i as f64 * step).collect()
}
