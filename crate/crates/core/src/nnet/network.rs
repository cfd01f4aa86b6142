use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Fully connected layer; `weights` is row-major `outputs × inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    fn forward_into(&self, x: &[f64], pre: &mut Vec<f64>, post: &mut Vec<f64>) {
        pre.clear();
        post.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let z = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.biases[o];
            pre.push(z);
            post.push(self.activation.apply(z));
        }
    }
}

/// Stack of dense layers: ReLU on hidden layers, identity on the output.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNetwork {
    pub layers: Vec<Layer>,
}

/// Same shape as the network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &DenseNetwork) -> Self {
        Self {
            weights: net
                .layers
                .iter()
                .map(|l| vec![0.0; l.weights.len()])
                .collect(),
            biases: net
                .layers
                .iter()
                .map(|l| vec![0.0; l.biases.len()])
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.weights
            .iter_mut()
            .chain(self.biases.iter_mut())
            .flatten()
            .for_each(|x| *x *= s);
    }

    /// Flattened in the same order as [`DenseNetwork::parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }
}

/// Cached activations of one forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    /// `inputs[i]` is the input to layer `i`; the last entry is the network output.
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.inputs.last().map(|v| v.as_slice()).unwrap_or(&[])
    }
}

impl DenseNetwork {
    /// He-initialized network (`N(0, 2/fan_in)` weights, zero biases).
    pub fn init(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::Config(format!(
                "need at least 2 layer sizes, got {}",
                layer_sizes.len()
            )));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::Config("layer sizes must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = layer_sizes.len() - 1;
        let layers = layer_sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (inputs, outputs) = (w[0], w[1]);
                let scale = (2.0 / inputs as f64).sqrt();
                let weights = (0..inputs * outputs)
                    .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let activation = if i + 1 == n {
                    Activation::Identity
                } else {
                    Activation::Relu
                };
                Layer {
                    inputs,
                    outputs,
                    weights,
                    biases: vec![0.0; outputs],
                    activation,
                }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.weights.len() != l.inputs * l.outputs || l.biases.len() != l.outputs {
                return Err(Error::Config(format!(
                    "layer {i} parameter shapes do not match {}×{}",
                    l.outputs, l.inputs
                )));
            }
            if i > 0 && layers[i - 1].outputs != l.inputs {
                return Err(Error::Dimension {
                    expected: layers[i - 1].outputs,
                    got: l.inputs,
                });
            }
            if !l.weights.iter().chain(&l.biases).all(|v| v.is_finite()) {
                return Err(Error::Config(format!(
                    "layer {i} has non-finite parameters"
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().map(|l| l.outputs).unwrap_or(0)
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_size())
            .chain(self.layers.iter().map(|l| l.outputs))
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return Err(Error::Dimension {
                expected: self.parameter_count(),
                got: params.len(),
            });
        }
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[off..off + nw]);
            off += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&params[off..off + nb]);
            off += nb;
        }
        Ok(())
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_size() {
            return Err(Error::Dimension {
                expected: self.input_size(),
                got: input.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut x = input.to_vec();
        let (mut pre, mut post) = (Vec::new(), Vec::new());
        for l in &self.layers {
            l.forward_into(&x, &mut pre, &mut post);
            std::mem::swap(&mut x, &mut post);
        }
        Ok(x)
    }

    pub fn forward_trace(&self, input: &[f64]) -> Result<Trace> {
        self.check_input(input)?;
        let mut inputs = vec![input.to_vec()];
        let mut pres = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let (mut pre, mut post) = (Vec::new(), Vec::new());
            l.forward_into(inputs.last().unwrap(), &mut pre, &mut post);
            pres.push(pre);
            inputs.push(post);
        }
        Ok(Trace { inputs, pre: pres })
    }

    /// Reverse-mode pass: given `∂L/∂output`, accumulates parameter gradients
    /// into `grads` and returns `∂L/∂input`.
    pub fn backward(&self, trace: &Trace, d_output: &[f64], grads: &mut Gradients) -> Vec<f64> {
        let mut delta: Vec<f64> = d_output.to_vec();
        for (i, l) in self.layers.iter().enumerate().rev() {
            for (d, z) in delta.iter_mut().zip(&trace.pre[i]) {
                *d *= l.activation.derivative(*z);
            }
            let x = &trace.inputs[i];
            let gw = &mut grads.weights[i];
            for o in 0..l.outputs {
                let d = delta[o];
                if d != 0.0 {
                    let row = &mut gw[o * l.inputs..(o + 1) * l.inputs];
                    row.iter_mut().zip(x).for_each(|(g, v)| *g += d * v);
                }
                grads.biases[i][o] += d;
            }
            let mut prev = vec![0.0; l.inputs];
            for o in 0..l.outputs {
                let d = delta[o];
                if d != 0.0 {
                    let row = &l.weights[o * l.inputs..(o + 1) * l.inputs];
                    prev.iter_mut().zip(row).for_each(|(p, w)| *p += d * w);
                }
            }
            delta = prev;
        }
        delta
    }

    /// Loss `Σ_s w_s (out_s − target_s)²` and its exact parameter gradient.
    pub fn weighted_loss_gradient(
        &self,
        input: &[f64],
        target: &[f64],
        weights: &[f64],
    ) -> Result<(f64, Gradients)> {
        let mut grads = Gradients::zeros_like(self);
        let loss = self.accumulate_weighted_loss(input, target, weights, &mut grads)?;
        Ok((loss, grads))
    }

    pub(crate) fn accumulate_weighted_loss(
        &self,
        input: &[f64],
        target: &[f64],
        weights: &[f64],
        grads: &mut Gradients,
    ) -> Result<f64> {
        let n = self.output_size();
        if target.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: target.len(),
            });
        }
        if weights.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: weights.len(),
            });
        }
        let trace = self.forward_trace(input)?;
        let out = trace.output();
        let mut loss = 0.0;
        let mut d_out = vec![0.0; n];
        for s in 0..n {
            let e = out[s] - target[s];
            loss += weights[s] * e * e;
            d_out[s] = 2.0 * weights[s] * e;
        }
        self.backward(&trace, &d_out, grads);
        Ok(loss)
    }

    pub fn weighted_loss(&self, input: &[f64], target: &[f64], weights: &[f64]) -> Result<f64> {
        let out = self.forward(input)?;
        Ok(out
            .iter()
            .zip(target)
            .zip(weights)
            .map(|((o, t), w)| w * (o - t).powi(2))
            .sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn identity_net(n: usize) -> DenseNetwork {
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            w[i * n + i] = 1.0;
        }
        DenseNetwork::from_layers(vec![Layer {
            inputs: n,
            outputs: n,
            weights: w,
            biases: vec![0.0; n],
            activation: Activation::Identity,
        }])
        .unwrap()
    }

    #[test]
    fn init_is_deterministic() {
        assert_eq!(
            DenseNetwork::init(&[4, 8, 3], 7).unwrap(),
            DenseNetwork::init(&[4, 8, 3], 7).unwrap()
        );
        assert_ne!(
            DenseNetwork::init(&[4, 8, 3], 7).unwrap(),
            DenseNetwork::init(&[4, 8, 3], 8).unwrap()
        );
    }

    #[test]
    fn init_rejects_degenerate_specs() {
        assert!(DenseNetwork::init(&[], 0).is_err());
        assert!(DenseNetwork::init(&[3], 0).is_err());
        assert!(DenseNetwork::init(&[3, 0, 2], 0).is_err());
    }

    #[test]
    fn init_variance_is_two_over_fan_in() {
        let net = DenseNetwork::init(&[50, 200], 11).unwrap();
        let w = &net.layers[0].weights;
        assert_eq!(w.len(), 10_000);
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (w.len() - 1) as f64;
        let expect = 2.0 / 50.0;
        assert!((var / expect - 1.0).abs() < 0.2, "{var}");
        assert!(net.layers[0].biases.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn activations_by_position() {
        let net = DenseNetwork::init(&[3, 5, 5, 2], 1).unwrap();
        assert_eq!(net.layers[0].activation, Activation::Relu);
        assert_eq!(net.layers[1].activation, Activation::Relu);
        assert_eq!(net.layers[2].activation, Activation::Identity);
        assert_eq!(net.layer_sizes(), vec![3, 5, 5, 2]);
    }

    #[test]
    fn identity_layer_passes_input() {
        let net = identity_net(3);
        assert_eq!(
            net.forward(&[1.0, -2.0, 3.5]).unwrap(),
            vec![1.0, -2.0, 3.5]
        );
    }

    #[test]
    fn zero_output_layer_gives_zero() {
        let mut net = DenseNetwork::init(&[4, 6, 2], 3).unwrap();
        let last = net.layers.last_mut().unwrap();
        last.weights.iter_mut().for_each(|w| *w = 0.0);
        last.biases.iter_mut().for_each(|b| *b = 0.0);
        assert_eq!(net.forward(&[1.0, 2.0, -3.0, 4.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn negative_preactivations_zero_the_hidden_layer() {
        let mut net = DenseNetwork::init(&[2, 3, 1], 3).unwrap();
        net.layers[0].weights.iter_mut().for_each(|w| *w = 1.0);
        net.layers[0].biases.iter_mut().for_each(|b| *b = -100.0);
        let trace = net.forward_trace(&[1.0, 2.0]).unwrap();
        assert!(trace.inputs[1].iter().all(|&h| h == 0.0));
        assert_eq!(trace.output(), &[0.0]);
    }

    #[test]
    fn dimension_mismatch() {
        let net = DenseNetwork::init(&[3, 2], 0).unwrap();
        assert_eq!(
            net.forward(&[1.0]).unwrap_err(),
            Error::Dimension {
                expected: 3,
                got: 1
            }
        );
    }

    #[test]
    fn gradient_zero_at_target() {
        let net = DenseNetwork::init(&[3, 4, 2], 5).unwrap();
        let x = [0.3, -0.1, 0.8];
        let y = net.forward(&x).unwrap();
        let (loss, g) = net.weighted_loss_gradient(&x, &y, &[1.0, 2.0]).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.flatten().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn doubling_an_output_weight_doubles_its_gradient() {
        let net = DenseNetwork::init(&[3, 4, 3], 5).unwrap();
        let x = [0.3, -0.1, 0.8];
        let target = [1.0, -1.0, 0.5];
        let (_, g1) = net
            .weighted_loss_gradient(&x, &target, &[0.0, 0.0, 1.0])
            .unwrap();
        let (_, g2) = net
            .weighted_loss_gradient(&x, &target, &[0.0, 0.0, 2.0])
            .unwrap();
        let last = net.layers.len() - 1;
        for (a, b) in g1.weights[last].iter().zip(&g2.weights[last]) {
            assert!((2.0 * a - b).abs() < 1e-15);
        }
        assert!((2.0 * g1.biases[last][2] - g2.biases[last][2]).abs() < 1e-15);
    }

    #[test]
    fn set_parameters_round_trip() {
        let mut net = DenseNetwork::init(&[3, 4, 2], 5).unwrap();
        let p: Vec<f64> = (0..net.parameter_count())
            .map(|i| i as f64 * 0.01)
            .collect();
        net.set_parameters(&p).unwrap();
        assert_eq!(net.parameters(), p);
        assert!(net.set_parameters(&p[1..]).is_err());
    }

    proptest! {
        #[test]
        fn finite_inputs_give_finite_outputs(
            seed in 0u64..1000,
            x in prop::collection::vec(-1e3f64..1e3, 6),
        ) {
            let net = DenseNetwork::init(&[6, 16, 16, 4], seed).unwrap();
            prop_assert!(net.forward(&x).unwrap().iter().all(|v| v.is_finite()));
        }
    }
}
