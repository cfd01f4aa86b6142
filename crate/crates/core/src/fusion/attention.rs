//! Per-axis attention over modality embeddings and the convex fusion rule.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{FusedObservation, FusionConfig, Modality, AXES, MODALITIES};
use crate::error::{Error, Result};
use crate::nnet::{DenseNetwork, Gradients, StandardizedNetwork, Trace};

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = e.iter().sum();
    e.into_iter().map(|v| v / sum).collect()
}

/// Softmax over the present entries; absent entries get weight 0.
pub fn fusion_ratios(logits: &[Option<f64>]) -> Vec<f64> {
    let present: Vec<f64> = logits.iter().flatten().copied().collect();
    let mut soft = softmax(&present).into_iter();
    logits
        .iter()
        .map(|l| {
            if l.is_some() {
                soft.next().unwrap_or(0.0)
            } else {
                0.0
            }
        })
        .collect()
}

/// Convex combination of one axis: `(z̃, Σ)` with
/// `z̃ = Σ γ x̂` and `Σ = Σ γ σ² + λ Σ γ (x̂ − z̃)²`.
pub fn fuse_axis(gamma: &[f64], estimates: &[f64], sigmas: &[f64], lambda: f64) -> (f64, f64) {
    let z: f64 = gamma.iter().zip(estimates).map(|(g, x)| g * x).sum();
    let intrinsic: f64 = gamma.iter().zip(sigmas).map(|(g, s)| g * s * s).sum();
    let divergence: f64 = gamma
        .iter()
        .zip(estimates)
        .map(|(g, x)| g * (x - z) * (x - z))
        .sum();
    (z, intrinsic + lambda * divergence)
}

/// Fuses all three axes from per-axis ratios (`ratios[axis][modality]`).
/// Entries with zero weight on an axis never touch that axis' estimate.
pub fn fuse(
    t: f64,
    ratios: &[[f64; MODALITIES]; AXES],
    estimates: &[Vector3<f64>; MODALITIES],
    sigmas: &[Vector3<f64>; MODALITIES],
    lambda: f64,
) -> FusedObservation {
    let mut position = Vector3::zeros();
    let mut covariance = Vector3::zeros();
    for s in 0..AXES {
        let (mut g, mut x, mut sg) = (Vec::new(), Vec::new(), Vec::new());
        for m in 0..MODALITIES {
            if ratios[s][m] > 0.0 {
                g.push(ratios[s][m]);
                x.push(estimates[m][s]);
                sg.push(sigmas[m][s]);
            }
        }
        let (z, c) = fuse_axis(&g, &x, &sg, lambda);
        position[s] = z;
        covariance[s] = c;
    }
    FusedObservation {
        t,
        position,
        covariance,
        ratios: *ratios,
    }
}

/// Learned attention parameters. Matrices are row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionParams {
    pub embedding_dim: usize,
    pub key_dim: usize,
    /// Per-axis query maps, each `key_dim × 3·embedding_dim`.
    pub w_q: [Vec<f64>; AXES],
    /// Shared key map, `key_dim × embedding_dim`.
    pub w_k: Vec<f64>,
    pub beta: [f64; AXES],
    pub w: [[f64; 2]; AXES],
    /// `b_prior[modality][axis]`.
    pub b_prior: [[f64; AXES]; MODALITIES],
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let scale = (1.0 / cols as f64).sqrt();
    (0..rows * cols)
        .map(|_| scale * Distribution::<f64>::sample(&StandardNormal, rng))
        .collect()
}

fn matvec(m: &[f64], rows: usize, x: &[f64]) -> Vec<f64> {
    let cols = x.len();
    (0..rows)
        .map(|r| {
            m[r * cols..(r + 1) * cols]
                .iter()
                .zip(x)
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl AttentionParams {
    pub fn init(cfg: &FusionConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (de, dk) = (cfg.embedding_dim, cfg.key_dim);
        let w_q = std::array::from_fn(|_| gaussian_matrix(dk, MODALITIES * de, &mut rng));
        let w_k = gaussian_matrix(dk, de, &mut rng);
        let mut b_prior = [[0.0; AXES]; MODALITIES];
        b_prior[Modality::Baro.index()][2] = cfg.baro_prior;
        Self {
            embedding_dim: de,
            key_dim: dk,
            w_q,
            w_k,
            beta: [1.0; AXES],
            w: [[0.0; 2]; AXES],
            b_prior,
        }
    }

    pub fn zeros(embedding_dim: usize, key_dim: usize) -> Self {
        Self {
            embedding_dim,
            key_dim,
            w_q: std::array::from_fn(|_| vec![0.0; key_dim * MODALITIES * embedding_dim]),
            w_k: vec![0.0; key_dim * embedding_dim],
            beta: [0.0; AXES],
            w: [[0.0; 2]; AXES],
            b_prior: [[0.0; AXES]; MODALITIES],
        }
    }

    pub fn parameter_count(&self) -> usize {
        let (de, dk) = (self.embedding_dim, self.key_dim);
        AXES * dk * MODALITIES * de + dk * de + AXES + 2 * AXES + AXES * MODALITIES
    }

    fn write(&self, out: &mut Vec<f64>) {
        self.w_q.iter().for_each(|m| out.extend_from_slice(m));
        out.extend_from_slice(&self.w_k);
        out.extend_from_slice(&self.beta);
        self.w.iter().for_each(|w| out.extend_from_slice(w));
        self.b_prior.iter().for_each(|b| out.extend_from_slice(b));
    }

    fn read(&mut self, p: &[f64]) {
        let mut i = 0;
        let mut take = |dst: &mut [f64]| {
            dst.copy_from_slice(&p[i..i + dst.len()]);
            i += dst.len();
        };
        self.w_q.iter_mut().for_each(|m| take(m));
        take(&mut self.w_k);
        take(&mut self.beta);
        self.w.iter_mut().for_each(|w| take(w));
        self.b_prior.iter_mut().for_each(|b| take(b));
    }

    pub fn validate(&self) -> Result<()> {
        let (de, dk) = (self.embedding_dim, self.key_dim);
        if self.w_q.iter().any(|m| m.len() != dk * MODALITIES * de) {
            return Err(Error::Dimension {
                expected: dk * MODALITIES * de,
                got: self.w_q[0].len(),
            });
        }
        if self.w_k.len() != dk * de {
            return Err(Error::Dimension {
                expected: dk * de,
                got: self.w_k.len(),
            });
        }
        let mut all = Vec::new();
        self.write(&mut all);
        if !all.iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical("non-finite attention parameter".into()));
        }
        Ok(())
    }
}

/// Per-axis attention logits, `logits[axis][modality]`; `None` where the
/// modality is absent or does not observe the axis.
pub fn attention_logits(
    params: &AttentionParams,
    embeddings: &[Vec<f64>; MODALITIES],
    reliability: &[[f64; 2]; MODALITIES],
    available: &[bool; MODALITIES],
) -> [[Option<f64>; MODALITIES]; AXES] {
    attention_intermediates(params, embeddings, reliability, available).logits
}

struct Intermediates {
    concat: Vec<f64>,
    q: [Vec<f64>; AXES],
    k: [Vec<f64>; MODALITIES],
    logits: [[Option<f64>; MODALITIES]; AXES],
}

fn attention_intermediates(
    params: &AttentionParams,
    embeddings: &[Vec<f64>; MODALITIES],
    reliability: &[[f64; 2]; MODALITIES],
    available: &[bool; MODALITIES],
) -> Intermediates {
    let dk = params.key_dim;
    let concat: Vec<f64> = embeddings.iter().flatten().copied().collect();
    let q: [Vec<f64>; AXES] = std::array::from_fn(|s| matvec(&params.w_q[s], dk, &concat));
    let k: [Vec<f64>; MODALITIES] =
        std::array::from_fn(|m| matvec(&params.w_k, dk, &embeddings[m]));
    let scale = 1.0 / (dk as f64).sqrt();
    let logits = std::array::from_fn(|s| {
        std::array::from_fn(|m| {
            (available[m] && Modality::ALL[m].observes(s)).then(|| {
                dot(&q[s], &k[m]) * scale
                    + params.beta[s] * dot(&params.w[s], &reliability[m])
                    + params.b_prior[m][s]
            })
        })
    });
    Intermediates {
        concat,
        q,
        k,
        logits,
    }
}

/// One fusion epoch's network inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionInput {
    pub t: f64,
    /// Flattened estimate windows; `None` marks an absent modality.
    pub windows: [Option<Vec<f64>>; MODALITIES],
    pub reliability: [[f64; 2]; MODALITIES],
    pub estimates: [Vector3<f64>; MODALITIES],
    pub sigmas: [Vector3<f64>; MODALITIES],
}

impl FusionInput {
    pub fn available(&self) -> [bool; MODALITIES] {
        std::array::from_fn(|m| self.windows[m].is_some())
    }

    /// Whether every axis has at least one participating modality.
    pub fn covers_all_axes(&self) -> bool {
        let a = self.available();
        (0..AXES).all(|s| (0..MODALITIES).any(|m| a[m] && Modality::ALL[m].observes(s)))
    }
}

/// Encoders plus attention: the trainable part of the fusion stage.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionNetwork {
    pub encoders: [StandardizedNetwork; MODALITIES],
    pub attention: AttentionParams,
    pub lambda: f64,
}

/// Cached forward pass of [`FusionNetwork`].
pub struct FusionTrace {
    traces: [Option<Trace>; MODALITIES],
    inter: Intermediates,
    embeddings: [Vec<f64>; MODALITIES],
    pub observation: FusedObservation,
}

impl FusionNetwork {
    pub fn init(cfg: &FusionConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let encoders = [Modality::Uwb, Modality::GpsIns, Modality::Baro].map(|m| {
            let sizes = [
                m.feature_width() * cfg.window,
                cfg.hidden,
                cfg.embedding_dim,
            ];
            DenseNetwork::init(&sizes, seed.wrapping_add(1 + m.index() as u64))
                .map(StandardizedNetwork::new)
        });
        let [a, b, c] = encoders;
        Ok(Self {
            encoders: [a?, b?, c?],
            attention: AttentionParams::init(cfg, seed),
            lambda: cfg.lambda,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.attention.validate()?;
        for (m, e) in self.encoders.iter().enumerate() {
            if e.network.output_size() != self.attention.embedding_dim {
                return Err(Error::Dimension {
                    expected: self.attention.embedding_dim,
                    got: e.network.output_size(),
                });
            }
            if e.network.input_size() % Modality::ALL[m].feature_width() != 0 {
                return Err(Error::Config(format!(
                    "encoder {m} input size is not a whole window"
                )));
            }
        }
        Ok(())
    }

    /// Encoder window length.
    pub fn window(&self) -> usize {
        self.encoders[0].network.input_size() / Modality::Uwb.feature_width()
    }

    /// Embeddings; absent modalities get the zero embedding.
    pub fn encode(&self, input: &FusionInput) -> Result<[Vec<f64>; MODALITIES]> {
        Ok(self.encode_traced(input)?.0)
    }

    fn encode_traced(
        &self,
        input: &FusionInput,
    ) -> Result<([Vec<f64>; MODALITIES], [Option<Trace>; MODALITIES])> {
        let de = self.attention.embedding_dim;
        let mut embeddings: [Vec<f64>; MODALITIES] = std::array::from_fn(|_| vec![0.0; de]);
        let mut traces: [Option<Trace>; MODALITIES] = [None, None, None];
        for m in 0..MODALITIES {
            if let Some(w) = &input.windows[m] {
                let enc = &self.encoders[m];
                if w.len() != enc.network.input_size() {
                    return Err(Error::Dimension {
                        expected: enc.network.input_size(),
                        got: w.len(),
                    });
                }
                let trace = enc.network.forward_trace(&enc.input.apply(w))?;
                embeddings[m] = trace.output().to_vec();
                traces[m] = Some(trace);
            }
        }
        Ok((embeddings, traces))
    }

    pub fn forward(&self, input: &FusionInput) -> Result<FusionTrace> {
        if !input.covers_all_axes() {
            return Err(Error::InsufficientData(format!(
                "no modality covers every axis at t={}",
                input.t
            )));
        }
        let (embeddings, traces) = self.encode_traced(input)?;
        let inter = attention_intermediates(
            &self.attention,
            &embeddings,
            &input.reliability,
            &input.available(),
        );
        let ratios: [[f64; MODALITIES]; AXES] = std::array::from_fn(|s| {
            let r = fusion_ratios(&inter.logits[s]);
            [r[0], r[1], r[2]]
        });
        let observation = fuse(
            input.t,
            &ratios,
            &input.estimates,
            &input.sigmas,
            self.lambda,
        );
        Ok(FusionTrace {
            traces,
            inter,
            embeddings,
            observation,
        })
    }

    pub fn fuse(&self, input: &FusionInput) -> Result<FusedObservation> {
        Ok(self.forward(input)?.observation)
    }

    pub fn parameter_count(&self) -> usize {
        self.encoders
            .iter()
            .map(|e| e.network.parameter_count())
            .sum::<usize>()
            + self.attention.parameter_count()
    }

    /// Flattened as: encoders (UWB, GPS/INS, baro), then attention.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        self.encoders
            .iter()
            .for_each(|e| out.extend(e.network.parameters()));
        self.attention.write(&mut out);
        out
    }

    pub fn set_parameters(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.parameter_count() {
            return Err(Error::Dimension {
                expected: self.parameter_count(),
                got: p.len(),
            });
        }
        let mut i = 0;
        for e in &mut self.encoders {
            let n = e.network.parameter_count();
            e.network.set_parameters(&p[i..i + n])?;
            i += n;
        }
        self.attention.read(&p[i..]);
        Ok(())
    }

    /// Loss `Σ_s w_s (z̃_s − truth_s)²`.
    pub fn loss(
        &self,
        input: &FusionInput,
        truth: &Vector3<f64>,
        axis_weights: &[f64; AXES],
    ) -> Result<f64> {
        let z = self.fuse(input)?.position;
        Ok((0..AXES)
            .map(|s| axis_weights[s] * (z[s] - truth[s]).powi(2))
            .sum())
    }

    /// Loss and its gradient with respect to [`Self::parameters`], accumulated into `grad`.
    pub fn accumulate_loss_gradient(
        &self,
        input: &FusionInput,
        truth: &Vector3<f64>,
        axis_weights: &[f64; AXES],
        grad: &mut [f64],
    ) -> Result<f64> {
        let fwd = self.forward(input)?;
        let z = fwd.observation.position;
        let mut loss = 0.0;
        let mut dz = [0.0; AXES];
        for s in 0..AXES {
            let e = z[s] - truth[s];
            loss += axis_weights[s] * e * e;
            dz[s] = 2.0 * axis_weights[s] * e;
        }
        self.backward(&fwd, input, &dz, grad);
        Ok(loss)
    }

    fn backward(&self, fwd: &FusionTrace, input: &FusionInput, dz: &[f64; AXES], grad: &mut [f64]) {
        let att = &self.attention;
        let (de, dk) = (att.embedding_dim, att.key_dim);
        let scale = 1.0 / (dk as f64).sqrt();
        let gamma = &fwd.observation.ratios;
        let z = fwd.observation.position;

        let mut d_q: [Vec<f64>; AXES] = std::array::from_fn(|_| vec![0.0; dk]);
        let mut d_k: [Vec<f64>; MODALITIES] = std::array::from_fn(|_| vec![0.0; dk]);
        let mut d_beta = [0.0; AXES];
        let mut d_w = [[0.0; 2]; AXES];
        let mut d_b = [[0.0; AXES]; MODALITIES];
        for s in 0..AXES {
            for m in 0..MODALITIES {
                if fwd.inter.logits[s][m].is_none() {
                    continue;
                }
                let delta = dz[s] * gamma[s][m] * (input.estimates[m][s] - z[s]);
                let r = &input.reliability[m];
                for j in 0..dk {
                    d_q[s][j] += delta * fwd.inter.k[m][j] * scale;
                    d_k[m][j] += delta * fwd.inter.q[s][j] * scale;
                }
                d_beta[s] += delta * dot(&att.w[s], r);
                d_w[s][0] += delta * att.beta[s] * r[0];
                d_w[s][1] += delta * att.beta[s] * r[1];
                d_b[m][s] += delta;
            }
        }

        let enc_total: usize = self
            .encoders
            .iter()
            .map(|e| e.network.parameter_count())
            .sum();
        let mut off = enc_total;
        let cat = MODALITIES * de;
        let mut d_concat = vec![0.0; cat];
        for s in 0..AXES {
            let g = &mut grad[off..off + dk * cat];
            for r in 0..dk {
                let d = d_q[s][r];
                if d == 0.0 {
                    continue;
                }
                let row = &att.w_q[s][r * cat..(r + 1) * cat];
                for c in 0..cat {
                    g[r * cat + c] += d * fwd.inter.concat[c];
                    d_concat[c] += d * row[c];
                }
            }
            off += dk * cat;
        }
        let mut d_emb: [Vec<f64>; MODALITIES] =
            std::array::from_fn(|m| d_concat[m * de..(m + 1) * de].to_vec());
        {
            let g = &mut grad[off..off + dk * de];
            for m in 0..MODALITIES {
                for r in 0..dk {
                    let d = d_k[m][r];
                    if d == 0.0 {
                        continue;
                    }
                    let row = &att.w_k[r * de..(r + 1) * de];
                    for c in 0..de {
                        g[r * de + c] += d * fwd.embeddings[m][c];
                        d_emb[m][c] += d * row[c];
                    }
                }
            }
            off += dk * de;
        }
        for s in 0..AXES {
            grad[off + s] += d_beta[s];
        }
        off += AXES;
        for s in 0..AXES {
            grad[off + 2 * s] += d_w[s][0];
            grad[off + 2 * s + 1] += d_w[s][1];
        }
        off += 2 * AXES;
        for m in 0..MODALITIES {
            for s in 0..AXES {
                grad[off + m * AXES + s] += d_b[m][s];
            }
        }

        let mut eoff = 0;
        for m in 0..MODALITIES {
            let net = &self.encoders[m].network;
            let n = net.parameter_count();
            if let Some(trace) = &fwd.traces[m] {
                let mut g = Gradients::zeros_like(net);
                net.backward(trace, &d_emb[m], &mut g);
                grad[eoff..eoff + n]
                    .iter_mut()
                    .zip(g.flatten())
                    .for_each(|(a, b)| *a += b);
            }
            eoff += n;
        }
    }
}
