//! Fusion-stage inputs and training against ground truth.

use nalgebra::Vector3;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    FusionFrame, FusionInput, FusionNetwork, Modality, ModalityObservation, AXES, MODALITIES,
};
use crate::error::{Error, Result};
use crate::nnet::{LossHistory, OptimizerState, Standardizer, TrainConfig};

/// Builds the network input from the last `window` frames of `history`.
/// Availability follows the newest frame; gaps earlier in the window are
/// filled with the nearest preceding observation (or the newest one).
pub fn fusion_input(history: &[FusionFrame], window: usize) -> Result<FusionInput> {
    if window == 0 || history.len() < window {
        return Err(Error::NotReady {
            have: history.len(),
            need: window,
        });
    }
    let frames = &history[history.len() - window..];
    let newest = frames[window - 1];

    let mut reference = Vector3::zeros();
    for s in 0..AXES {
        let vals: Vec<f64> = Modality::ALL
            .iter()
            .filter(|m| m.observes(s))
            .filter_map(|m| newest.observations[m.index()].map(|o| o.estimate[s]))
            .collect();
        if !vals.is_empty() {
            reference[s] = vals.iter().sum::<f64>() / vals.len() as f64;
        }
    }

    let mut windows: [Option<Vec<f64>>; MODALITIES] = [None, None, None];
    let mut reliability = [[0.0; 2]; MODALITIES];
    let mut estimates = [Vector3::zeros(); MODALITIES];
    let mut sigmas = [Vector3::zeros(); MODALITIES];
    for m in Modality::ALL {
        let Some(latest) = newest.observations[m.index()] else {
            continue;
        };
        let mut held: Option<ModalityObservation> = None;
        let mut feats = Vec::with_capacity(m.feature_width() * window);
        for f in frames {
            if let Some(o) = f.observations[m.index()] {
                held = Some(o);
            }
            let o = held.unwrap_or(latest);
            let rel = o.estimate - reference;
            match m {
                Modality::Baro => feats.extend_from_slice(&[rel.z, o.sigma.z]),
                _ => {
                    feats.extend_from_slice(rel.as_slice());
                    feats.extend_from_slice(o.sigma.as_slice());
                }
            }
        }
        windows[m.index()] = Some(feats);
        reliability[m.index()] = latest.reliability;
        estimates[m.index()] = latest.estimate;
        sigmas[m.index()] = latest.sigma;
    }
    Ok(FusionInput {
        t: newest.t,
        windows,
        reliability,
        estimates,
        sigmas,
    })
}

/// Inputs for every frame; `None` during warm-up or when some axis has no
/// participating modality.
pub fn build_fusion_inputs(frames: &[FusionFrame], window: usize) -> Vec<Option<FusionInput>> {
    (0..frames.len())
        .map(|i| {
            fusion_input(&frames[..=i], window)
                .ok()
                .filter(|inp| inp.covers_all_axes())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionExample {
    pub input: FusionInput,
    pub truth: Vector3<f64>,
}

impl FusionNetwork {
    /// Fits each encoder's input standardizer on the given examples.
    pub fn fit_standardizers(&mut self, examples: &[FusionExample]) -> Result<()> {
        for m in 0..MODALITIES {
            let rows: Vec<Vec<f64>> = examples
                .iter()
                .filter_map(|e| e.input.windows[m].clone())
                .collect();
            if !rows.is_empty() {
                self.encoders[m].input = Standardizer::fit(&rows)?;
            }
        }
        Ok(())
    }

    pub fn mean_loss(&self, examples: &[FusionExample], axis_weights: &[f64; AXES]) -> Result<f64> {
        if examples.is_empty() {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for e in examples {
            total += self.loss(&e.input, &e.truth, axis_weights)?;
        }
        Ok(total / examples.len() as f64)
    }
}

/// Mini-batch training of encoders and attention on the fused-position loss.
/// The chronological head (`cfg.split`) trains; the tail validates. On
/// divergence the last finite parameters are restored before returning.
pub fn train_fusion(
    net: &mut FusionNetwork,
    examples: &[FusionExample],
    cfg: &TrainConfig,
) -> Result<LossHistory> {
    cfg.validate()?;
    if examples.is_empty() {
        return Err(Error::InsufficientData(
            "no fusion training examples".into(),
        ));
    }
    let cut = ((examples.len() as f64 * cfg.split).round() as usize).clamp(1, examples.len());
    let (train_set, val_set) = examples.split_at(cut);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = net.parameters();
    let mut opt = OptimizerState::new(cfg.optimizer, cfg.learning_rate, params.len());
    let mut history = LossHistory::default();

    for epoch in 0..cfg.epochs {
        let good = params.clone();
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let mut grad = vec![0.0; params.len()];
            for &i in batch {
                let e = &train_set[i];
                net.accumulate_loss_gradient(&e.input, &e.truth, &cfg.axis_weights, &mut grad)?;
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            opt.apply(&mut params, &grad);
            net.set_parameters(&params)?;
        }
        let tl = net.mean_loss(train_set, &cfg.axis_weights)?;
        if !tl.is_finite() || !params.iter().all(|p| p.is_finite()) {
            net.set_parameters(&good)?;
            return Err(Error::Diverged {
                epoch,
                reason: format!("fusion training loss {tl}"),
            });
        }
        history.train.push(tl);
        history
            .validation
            .push(net.mean_loss(val_set, &cfg.axis_weights)?);
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::FusionConfig;
    use crate::nnet::Optimizer;

    fn obs(e: [f64; 3], s: f64, r: [f64; 2]) -> Option<ModalityObservation> {
        Some(ModalityObservation {
            estimate: Vector3::from(e),
            sigma: Vector3::repeat(s),
            reliability: r,
        })
    }

    fn small() -> FusionConfig {
        FusionConfig {
            window: 3,
            hidden: 8,
            embedding_dim: 4,
            key_dim: 3,
            ..FusionConfig::default()
        }
    }

    #[test]
    fn short_history_is_not_ready() {
        let f = FusionFrame {
            t: 0.0,
            observations: [obs([0.0; 3], 0.1, [1.0, 0.0]), None, None],
        };
        assert!(matches!(
            fusion_input(&[f, f], 3),
            Err(Error::NotReady { have: 2, need: 3 })
        ));
    }

    #[test]
    fn features_are_relative_to_reference() {
        let frames: Vec<FusionFrame> = (0..3)
            .map(|i| FusionFrame {
                t: i as f64,
                observations: [
                    obs([1.0, 2.0, 3.0], 0.1, [1.0, 0.0]),
                    obs([3.0, 2.0, 3.0], 0.2, [0.5, 0.1]),
                    obs([9.0, 9.0, 6.0], 0.3, [1.0, 0.2]),
                ],
            })
            .collect();
        let inp = fusion_input(&frames, 3).unwrap();
        // reference: x from uwb/gps only, z from all three
        let uwb = inp.windows[0].as_ref().unwrap();
        assert_eq!(&uwb[..6], &[-1.0, 0.0, -1.0, 0.1, 0.1, 0.1]);
        let baro = inp.windows[2].as_ref().unwrap();
        assert_eq!(baro.len(), 6);
        assert_eq!(&baro[..2], &[2.0, 0.3]);
    }

    #[test]
    fn missing_uwb_degrades_to_gps_on_xy() {
        let frames: Vec<FusionFrame> = (0..3)
            .map(|i| FusionFrame {
                t: i as f64,
                observations: [
                    None,
                    obs([3.0, 2.0, 1.0], 0.2, [0.5, 0.1]),
                    obs([0.0, 0.0, 5.0], 0.3, [1.0, 0.2]),
                ],
            })
            .collect();
        let net = FusionNetwork::init(&small(), 1).unwrap();
        let inp = fusion_input(&frames, 3).unwrap();
        let f = net.fuse(&inp).unwrap();
        assert_eq!(f.ratios[0], [0.0, 1.0, 0.0]);
        assert_eq!(f.position.x, 3.0);
        assert!(f.position.z > 1.0 && f.position.z < 5.0);
    }

    #[test]
    fn zero_epochs_leave_parameters_unchanged() {
        let frames: Vec<FusionFrame> = (0..5)
            .map(|i| FusionFrame {
                t: i as f64,
                observations: [
                    obs([1.0, 2.0, 3.0], 0.1, [1.0, 0.0]),
                    obs([3.0, 2.0, 3.0], 0.2, [0.5, 0.1]),
                    None,
                ],
            })
            .collect();
        let ex: Vec<FusionExample> = build_fusion_inputs(&frames, 3)
            .into_iter()
            .flatten()
            .map(|input| FusionExample {
                input,
                truth: Vector3::new(1.0, 2.0, 3.0),
            })
            .collect();
        let mut net = FusionNetwork::init(&small(), 1).unwrap();
        let before = net.clone();
        let cfg = TrainConfig {
            epochs: 0,
            ..small().train
        };
        train_fusion(&mut net, &ex, &cfg).unwrap();
        assert_eq!(net, before);
    }

    // With one exact modality and one garbage modality on x/y, the trained
    // ratios should favour the exact one.
    #[test]
    fn learns_to_trust_the_good_modality() {
        let mut ex_frames = Vec::new();
        let mut truths = Vec::new();
        for i in 0..400 {
            let t = i as f64 * 0.1;
            let truth = Vector3::new((0.3 * t).sin() * 3.0, (0.2 * t).cos(), 0.1 * t);
            let junk = Vector3::new(
                ((i * 7919) % 23) as f64 - 11.0,
                ((i * 104_729) % 17) as f64 - 8.0,
                ((i * 31) % 13) as f64 - 6.0,
            );
            ex_frames.push(FusionFrame {
                t,
                observations: [
                    Some(ModalityObservation {
                        estimate: truth,
                        sigma: Vector3::repeat(0.1),
                        reliability: [0.5, 0.1],
                    }),
                    Some(ModalityObservation {
                        estimate: truth + junk,
                        sigma: Vector3::repeat(0.1),
                        reliability: [0.5, 0.1],
                    }),
                    None,
                ],
            });
            truths.push(truth);
        }
        let ex: Vec<FusionExample> = build_fusion_inputs(&ex_frames, 3)
            .into_iter()
            .zip(truths)
            .filter_map(|(i, truth)| i.map(|input| FusionExample { input, truth }))
            .collect();
        let cfg = small();
        let mut net = FusionNetwork::init(&cfg, 4).unwrap();
        net.fit_standardizers(&ex).unwrap();
        let tc = TrainConfig {
            epochs: 30,
            learning_rate: 3e-3,
            optimizer: Optimizer::adam(),
            ..cfg.train
        };
        train_fusion(&mut net, &ex, &tc).unwrap();
        let mean_gamma: f64 = ex
            .iter()
            .map(|e| net.fuse(&e.input).unwrap().ratios[0][0])
            .sum::<f64>()
            / ex.len() as f64;
        assert!(mean_gamma > 0.9, "{mean_gamma}");
    }
}
