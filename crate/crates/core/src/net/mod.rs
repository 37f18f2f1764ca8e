//! The two-layer color network shared by the speaker and the listener.
//!
//! The first layer maps `[color, modifier]` to a hidden state, the second maps
//! `[hidden, color]` to an output color:
//!
//! ```text
//! h   = act(W1 [c, m] + b1)
//! out = W2 [h, c] + b2
//! ```
//!
//! All parameters live in one flat buffer laid out as `W1 | b1 | W2 | b2`,
//! matrices row-major. Colors enter and leave the network in unit scale
//! (`[0, 1]` per channel); [`SpeakerNet::predict`] handles the conversion
//! from and to 0-255 sRGB.

mod artifact;
mod loss;
mod train;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::colorspace::Rgb;
use crate::embeddings::EmbeddedModifier;
use crate::error::{Error, Result};

pub use artifact::{ModelArtifact, ARTIFACT_VERSION};
pub use loss::{dual_loss, LossWeights};
pub use train::{train, Direction, Optimizer, TrainConfig, TrainOutcome, TrainingView};

pub const DEFAULT_HIDDEN: usize = 30;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Identity,
    Relu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Number of trainable scalars for a net with the given embedding width and
/// hidden size.
pub const fn param_count(embed_dim: usize, hidden: usize) -> usize {
    let input = 3 + 2 * embed_dim;
    hidden * input + hidden + 3 * (hidden + 3) + 3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerNet {
    embed_dim: usize,
    hidden: usize,
    activation: Activation,
    params: Vec<f64>,
}

/// Intermediate values of one forward pass, kept for backprop.
#[derive(Debug, Clone)]
pub(crate) struct ForwardTrace {
    input: Vec<f64>,
    pre_activation: Vec<f64>,
    hidden: Vec<f64>,
    output: [f64; 3],
}

impl SpeakerNet {
    pub fn zeros(embed_dim: usize, hidden: usize, activation: Activation) -> Result<Self> {
        if embed_dim == 0 || hidden == 0 {
            return Err(Error::input("embedding width and hidden size must be positive"));
        }
        Ok(SpeakerNet {
            embed_dim,
            hidden,
            activation,
            params: vec![0.0; param_count(embed_dim, hidden)],
        })
    }

    /// Glorot-uniform weights and zero biases.
    pub fn glorot<R: rand::Rng>(
        embed_dim: usize,
        hidden: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = SpeakerNet::zeros(embed_dim, hidden, activation)?;
        let input = net.input_width();
        let limit1 = (6.0 / (input + hidden) as f64).sqrt();
        let limit2 = (6.0 / (hidden + 3 + 3) as f64).sqrt();
        let (w1, rest) = net.params.split_at_mut(hidden * input);
        for w in w1 {
            *w = rng.gen_range(-limit1..=limit1);
        }
        let w2 = &mut rest[hidden..hidden + 3 * (hidden + 3)];
        for w in w2 {
            *w = rng.gen_range(-limit2..=limit2);
        }
        Ok(net)
    }

    /// Rebuilds a net from a flat parameter buffer.
    pub fn from_params(
        embed_dim: usize,
        hidden: usize,
        activation: Activation,
        params: Vec<f64>,
    ) -> Result<Self> {
        let mut net = SpeakerNet::zeros(embed_dim, hidden, activation)?;
        net.set_params(&params)?;
        Ok(net)
    }

    pub fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Width of the first layer's input: three color channels plus two
    /// embedding slots.
    pub fn input_width(&self) -> usize {
        3 + 2 * self.embed_dim
    }

    pub fn count_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::Shape {
                what: "parameter buffer",
                expected: self.params.len(),
                found: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::input("parameters must be finite"));
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    pub(crate) fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let w1_len = self.hidden * self.input_width();
        let b1 = w1_len;
        let w2 = b1 + self.hidden;
        let b2 = w2 + 3 * (self.hidden + 3);
        (b1, w2, b2)
    }

    pub fn w1(&self) -> &[f64] {
        let (b1, _, _) = self.offsets();
        &self.params[..b1]
    }

    pub fn b1(&self) -> &[f64] {
        let (b1, w2, _) = self.offsets();
        &self.params[b1..w2]
    }

    pub fn w2(&self) -> &[f64] {
        let (_, w2, b2) = self.offsets();
        &self.params[w2..b2]
    }

    pub fn b2(&self) -> &[f64] {
        let (_, _, b2) = self.offsets();
        &self.params[b2..]
    }

    fn check_modifier(&self, m: &EmbeddedModifier) -> Result<()> {
        if m.len() != 2 * self.embed_dim {
            return Err(Error::Shape {
                what: "embedded modifier",
                expected: 2 * self.embed_dim,
                found: m.len(),
            });
        }
        Ok(())
    }

    /// Raw forward pass. The output is not clamped.
    pub fn forward(&self, color: [f64; 3], m: &EmbeddedModifier) -> Result<[f64; 3]> {
        self.check_modifier(m)?;
        Ok(self.forward_trace(color, m.values()).output)
    }

    pub(crate) fn forward_trace(&self, color: [f64; 3], m: &[f64]) -> ForwardTrace {
        let width = self.input_width();
        let mut input = Vec::with_capacity(width);
        input.extend_from_slice(&color);
        input.extend_from_slice(m);

        let (w1, b1, w2, b2) = (self.w1(), self.b1(), self.w2(), self.b2());
        let pre_activation: Vec<f64> = w1
            .chunks_exact(width)
            .zip(b1)
            .map(|(row, b)| row.iter().zip(&input).map(|(w, x)| w * x).sum::<f64>() + b)
            .collect();
        let hidden: Vec<f64> = pre_activation
            .iter()
            .map(|&z| self.activation.apply(z))
            .collect();

        let mut output = [0.0; 3];
        for (k, (row, b)) in w2.chunks_exact(self.hidden + 3).zip(b2).enumerate() {
            let (wh, wc) = row.split_at(self.hidden);
            output[k] = wh.iter().zip(&hidden).map(|(w, h)| w * h).sum::<f64>()
                + wc.iter().zip(&color).map(|(w, c)| w * c).sum::<f64>()
                + b;
        }
        ForwardTrace {
            input,
            pre_activation,
            hidden,
            output,
        }
    }

    /// Accumulates `scale * dLoss/dparams` into `grad`, given `d_output` =
    /// dLoss/d(output) for the traced pass.
    pub(crate) fn backward(
        &self,
        trace: &ForwardTrace,
        d_output: [f64; 3],
        scale: f64,
        grad: &mut [f64],
    ) {
        let width = self.input_width();
        let hidden = self.hidden;
        let (b1_off, w2_off, b2_off) = self.offsets();
        let w2 = self.w2();

        let mut d_hidden = vec![0.0; hidden];
        for k in 0..3 {
            let g = d_output[k] * scale;
            if g == 0.0 {
                continue;
            }
            let row = &w2[k * (hidden + 3)..(k + 1) * (hidden + 3)];
            let grad_row = &mut grad[w2_off + k * (hidden + 3)..w2_off + (k + 1) * (hidden + 3)];
            for j in 0..hidden {
                grad_row[j] += g * trace.hidden[j];
                d_hidden[j] += g * row[j];
            }
            for c in 0..3 {
                grad_row[hidden + c] += g * trace.input[c];
            }
            grad[b2_off + k] += g;
        }

        for j in 0..hidden {
            let dz = d_hidden[j] * self.activation.derivative(trace.pre_activation[j]);
            if dz == 0.0 {
                continue;
            }
            let grad_row = &mut grad[j * width..(j + 1) * width];
            for (g, x) in grad_row.iter_mut().zip(&trace.input) {
                *g += dz * x;
            }
            grad[b1_off + j] += dz;
        }
    }

    /// Maps a 0-255 color through the net and clamps the result into gamut.
    pub fn predict(&self, color: Rgb, m: &EmbeddedModifier) -> Result<Rgb> {
        let out = self.forward(color.to_unit(), m)?;
        Ok(Rgb::from_unit(out))
    }

    /// Training loss of one example and its gradient with respect to every
    /// parameter. Colors are in unit scale.
    pub fn loss_gradient(
        &self,
        color: [f64; 3],
        m: &EmbeddedModifier,
        target: [f64; 3],
        anchor: [f64; 3],
        weights: LossWeights,
    ) -> Result<(f64, Vec<f64>)> {
        self.check_modifier(m)?;
        let trace = self.forward_trace(color, m.values());
        let (loss, d_output) = dual_loss(target, anchor, trace.output, weights);
        let mut grad = vec![0.0; self.params.len()];
        self.backward(&trace, d_output, 1.0, &mut grad);
        Ok((loss, grad))
    }
}

/// Cheap deterministic fill used by tests and tools that need a non-trivial
/// net without training.
pub fn random_net(
    embed_dim: usize,
    hidden: usize,
    activation: Activation,
    seed: u64,
) -> Result<SpeakerNet> {
    let mut rng = crate::seeds::rng(seed);
    let mut net = SpeakerNet::glorot(embed_dim, hidden, activation, &mut rng)?;
    for p in net.params_mut() {
        // Glorot leaves biases at zero; perturb everything so bias paths are exercised.
        *p += rng.gen_range(-0.1..0.1);
    }
    Ok(net)
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;

    fn modifier(dim: usize, seed: u64) -> EmbeddedModifier {
        let mut rng = crate::seeds::rng(seed);
        EmbeddedModifier::from_values((0..2 * dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }

    // Scratch implementation with explicit matrix indexing.
    fn naive_forward(net: &SpeakerNet, c: [f64; 3], m: &[f64]) -> [f64; 3] {
        let width = net.input_width();
        let x: Vec<f64> = c.iter().chain(m).copied().collect();
        let mut h = vec![0.0; net.hidden()];
        for i in 0..net.hidden() {
            let mut z = net.b1()[i];
            for j in 0..width {
                z += net.w1()[i * width + j] * x[j];
            }
            h[i] = match net.activation() {
                Activation::Identity => z,
                Activation::Relu => z.max(0.0),
            };
        }
        let mut out = [0.0; 3];
        for k in 0..3 {
            let mut z = net.b2()[k];
            for j in 0..net.hidden() {
                z += net.w2()[k * (net.hidden() + 3) + j] * h[j];
            }
            for j in 0..3 {
                z += net.w2()[k * (net.hidden() + 3) + net.hidden() + j] * c[j];
            }
            out[k] = z;
        }
        out
    }

    #[test]
    fn parameter_counts() {
        assert_eq!(param_count(300, 30), 18_222);
        assert_eq!(param_count(2, 30), 342);
        let net = SpeakerNet::zeros(300, 30, Activation::Identity).unwrap();
        assert_eq!(net.count_params(), 18_222);
        for dim in 1..50 {
            for hidden in [1, 7, 30] {
                assert_eq!(
                    param_count(dim, hidden),
                    hidden * (3 + 2 * dim) + hidden + 3 * (hidden + 3) + 3
                );
            }
        }
    }

    #[test]
    fn zero_net_outputs_zero() {
        let net = SpeakerNet::zeros(4, 30, Activation::Identity).unwrap();
        let out = net.forward([0.3, 0.9, 0.1], &modifier(4, 1)).unwrap();
        assert_eq!(out, [0.0; 3]);
    }

    #[test]
    fn identity_net_is_affine() {
        let net = random_net(3, 30, Activation::Identity, 11).unwrap();
        let c = [0.2, 0.5, 0.7];
        let m = modifier(3, 2);
        let zero = net
            .forward([0.0; 3], &EmbeddedModifier::zeros(3))
            .unwrap();
        let base = net.forward(c, &m).unwrap();
        for alpha in [0.5, 2.0, -1.25] {
            let scaled_m =
                EmbeddedModifier::from_values(m.values().iter().map(|v| v * alpha).collect());
            let scaled = net.forward(c.map(|v| v * alpha), &scaled_m).unwrap();
            for k in 0..3 {
                let lhs = scaled[k] - zero[k];
                let rhs = alpha * (base[k] - zero[k]);
                assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn forward_matches_scratch_implementation() {
        for act in [Activation::Identity, Activation::Relu] {
            for seed in 0..10 {
                let net = random_net(5, 30, act, seed).unwrap();
                let m = modifier(5, seed + 100);
                let c = [0.1, 0.4, 0.8];
                let fast = net.forward(c, &m).unwrap();
                let slow = naive_forward(&net, c, m.values());
                for k in 0..3 {
                    assert!((fast[k] - slow[k]).abs() < 1e-12);
                }
            }
        }
    }

    // Recorded from the first run and cross-checked with the scratch
    // implementation above.
    #[test]
    fn seeded_forward_golden_vector() {
        let net = random_net(4, 30, Activation::Identity, 2024).unwrap();
        let m = EmbeddedModifier::from_values(vec![0.5, -0.25, 1.0, 0.0, 0.1, 0.2, 0.3, 0.4]);
        let out = net.forward([0.25, 0.5, 0.75], &m).unwrap();
        let scratch = naive_forward(&net, [0.25, 0.5, 0.75], m.values());
        let golden = GOLDEN_FORWARD;
        for k in 0..3 {
            assert!((out[k] - scratch[k]).abs() < 1e-12);
            assert!((out[k] - golden[k]).abs() < 1e-12, "{out:?}");
        }
    }

    const GOLDEN_FORWARD: [f64; 3] = [-0.127_040_462_930_420_65, -0.478_720_557_395_306_06, 0.168_173_621_082_818_28];

    #[test]
    fn wrong_modifier_width_is_rejected() {
        let net = SpeakerNet::zeros(4, 30, Activation::Identity).unwrap();
        let err = net.forward([0.0; 3], &EmbeddedModifier::zeros(3)).unwrap_err();
        assert!(matches!(err, Error::Shape { expected: 8, found: 6, .. }));
    }

    #[test]
    fn backprop_matches_finite_differences() {
        for act in [Activation::Identity, Activation::Relu] {
            let net = random_net(3, 8, act, 5).unwrap();
            let m = modifier(3, 9);
            let c = [0.3, 0.6, 0.2];
            let target = [0.9, 0.1, 0.4];
            let weights = LossWeights::default();
            let objective = |n: &SpeakerNet| {
                let out = n.forward(c, &m).unwrap();
                dual_loss(target, c, out, weights).0
            };
            let trace = net.forward_trace(c, m.values());
            let (_, d_out) = dual_loss(target, c, trace.output, weights);
            let mut grad = vec![0.0; net.count_params()];
            net.backward(&trace, d_out, 1.0, &mut grad);

            let h = 1e-5;
            let mut probe = net.clone();
            for i in 0..net.count_params() {
                let orig = net.params()[i];
                probe.params_mut()[i] = orig + h;
                let up = objective(&probe);
                probe.params_mut()[i] = orig - h;
                let down = objective(&probe);
                probe.params_mut()[i] = orig;
                let numeric = (up - down) / (2.0 * h);
                let denom = grad[i].abs().max(numeric.abs()).max(1e-8);
                assert!(
                    (grad[i] - numeric).abs() / denom < 1e-4 || (grad[i] - numeric).abs() < 1e-9,
                    "param {i}: {} vs {numeric}",
                    grad[i]
                );
            }
        }
    }

    #[test]
    fn predict_clamps_into_gamut() {
        let mut net = SpeakerNet::zeros(1, 2, Activation::Identity).unwrap();
        let n = net.count_params();
        let mut params = vec![0.0; n];
        params[n - 3] = 2.0;
        params[n - 2] = -1.0;
        params[n - 1] = 0.5;
        net.set_params(&params).unwrap();
        let out = net.predict(Rgb::BLACK, &EmbeddedModifier::zeros(1)).unwrap();
        assert_eq!(out, Rgb::new(255.0, 0.0, 127.5));
    }
}
