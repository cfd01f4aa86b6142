use nalgebra::Vector3;

use super::{
    fusion_input, FusedObservation, FusionConfig, FusionFrame, FusionNetwork, Modality, UkfConfig,
    UkfState,
};
use crate::error::Result;
use crate::pose::PoseEstimate;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AmfaOutput {
    /// Smoothed estimate per frame; `None` until the first observation.
    pub estimates: Vec<Option<PoseEstimate>>,
    /// Attention output per frame; `None` on warm-up or fallback frames.
    pub fused: Vec<Option<FusedObservation>>,
    /// Modalities never observed in the run.
    pub absent: Vec<Modality>,
}

/// Runs fusion and the UKF over time-ordered frames. Until the encoder
/// windows fill, the GPS/INS estimate is fed to the filter with its σ
/// inflated by `cfg.warmup_inflation`.
pub fn amfa_pipeline(
    frames: &[FusionFrame],
    net: &FusionNetwork,
    cfg: &FusionConfig,
    ukf: &UkfConfig,
) -> Result<AmfaOutput> {
    net.validate()?;
    let window = net.window();
    let floor = cfg.sigma_min * cfg.sigma_min;
    let mut out = AmfaOutput {
        absent: Modality::ALL
            .into_iter()
            .filter(|m| frames.iter().all(|f| f.observations[m.index()].is_none()))
            .collect(),
        ..AmfaOutput::default()
    };
    let mut state: Option<(UkfState, f64)> = None;
    let lo = window.saturating_sub(1);

    for i in 0..frames.len() {
        let frame = &frames[i];
        let fused = fusion_input(&frames[i.saturating_sub(lo)..=i], window)
            .ok()
            .filter(|inp| inp.covers_all_axes())
            .map(|inp| net.fuse(&inp))
            .transpose()?;
        let measurement = match &fused {
            Some(f) => Some((f.position, f.covariance)),
            None => frame.observations[Modality::GpsIns.index()]
                .map(|o| (o.estimate, (o.sigma * cfg.warmup_inflation).map(|s| s * s))),
        }
        .map(|(z, r): (Vector3<f64>, Vector3<f64>)| (z, r.map(|v| v.max(floor))));

        state = match (state, measurement) {
            (None, None) => None,
            (None, Some((z, r))) => Some((UkfState::new(z, r, *ukf)?, frame.t)),
            (Some((mut s, t_prev)), m) => {
                s.predict(frame.t - t_prev)?;
                if let Some((z, r)) = m {
                    s.update(&z, &r)?;
                }
                Some((s, frame.t))
            }
        };
        out.estimates.push(state.map(|(s, _)| s.pose(frame.t)));
        out.fused.push(fused);
    }
    Ok(out)
}
