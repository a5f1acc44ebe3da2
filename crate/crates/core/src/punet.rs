//! Predictor/update sub-networks: K layers of (conv, per-channel
//! soft-threshold) followed by a final conv, all bias-free.
//!
//! Thresholds are stored as raw values theta with effective lambda = |theta|,
//! which keeps lambda >= 0 without constrained optimization. The final conv
//! of a freshly built network is zero so a new lifting pair starts as the
//! identity transform; `random` initialization (used by invertibility and
//! gradient tests) fills it like the interior layers instead.

use crate::conv::{conv2d, conv2d_backward, ConvSpec};
use crate::error::{Error, Result};
use crate::shrink::{soft_threshold, soft_threshold_backward};
use crate::tensor::Tensor;
use crate::{cast, Scalar};
use rand::Rng;

/// d|theta|/dtheta with the subgradient at 0 taken as 0.
#[inline]
fn sign0<F: Scalar>(v: F) -> F {
    if v == F::zero() {
        F::zero()
    } else {
        v.signum()
    }
}

/// How to fill the final conv of each sub-network at construction time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    /// Final convs zero: the whole lifting stack starts as the identity.
    Identity,
    /// Final convs random like the interior ones.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PUNet<F> {
    /// K + 1 kernels; convs[k] has shape [out_k, in_k, f, f].
    pub convs: Vec<Tensor<F>>,
    /// K raw threshold vectors, each of length `hidden`.
    pub thetas: Vec<Tensor<F>>,
    in_channels: usize,
    hidden: usize,
    out_channels: usize,
    kernel: usize,
}

/// Saved forward intermediates: the input of every conv layer plus each
/// soft-threshold pre-activation.
#[derive(Debug, Clone)]
pub struct PUNetTrace<F> {
    pub conv_inputs: Vec<Tensor<F>>,
    pub pre_activations: Vec<Tensor<F>>,
}

/// Parameter gradients mirroring [`PUNet`] shapes.
#[derive(Debug, Clone)]
pub struct PUNetGrads<F> {
    pub convs: Vec<Tensor<F>>,
    pub thetas: Vec<Tensor<F>>,
}

impl<F: Scalar> PUNetGrads<F> {
    pub fn zeros_like(net: &PUNet<F>) -> Self {
        PUNetGrads {
            convs: net.convs.iter().map(|t| Tensor::zeros(t.shape())).collect(),
            thetas: net.thetas.iter().map(|t| Tensor::zeros(t.shape())).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        for (a, b) in self.convs.iter_mut().zip(&other.convs) {
            a.add_assign(b)?;
        }
        for (a, b) in self.thetas.iter_mut().zip(&other.thetas) {
            a.add_assign(b)?;
        }
        Ok(())
    }
}

impl<F: Scalar> PUNet<F> {
    /// Builds a network with fan-in-scaled Gaussian interior convs,
    /// constant thresholds theta = 1e-3 and the requested final-conv fill.
    pub fn new<R: Rng + ?Sized>(
        in_channels: usize,
        out_channels: usize,
        hidden: usize,
        layers: usize,
        kernel: usize,
        init: InitKind,
        rng: &mut R,
    ) -> Result<Self> {
        if layers == 0 {
            return Err(Error::invalid("PUNet", "need at least one conv+threshold layer"));
        }
        let mut convs = Vec::with_capacity(layers + 1);
        for k in 0..=layers {
            let (ci, co) = Self::layer_channels(in_channels, out_channels, hidden, layers, k);
            let fan_in = ci * kernel * kernel;
            let std = cast::<F>((2.0 / fan_in as f64).sqrt());
            let shape = [co, ci, kernel, kernel];
            let t = if k == layers && init == InitKind::Identity {
                Tensor::zeros(&shape)
            } else {
                Tensor::randn(&shape, std, rng)
            };
            convs.push(t);
        }
        let thetas = (0..layers).map(|_| Tensor::filled(&[hidden], cast(1e-3))).collect();
        Ok(PUNet { convs, thetas, in_channels, hidden, out_channels, kernel })
    }

    fn layer_channels(
        in_channels: usize,
        out_channels: usize,
        hidden: usize,
        layers: usize,
        k: usize,
    ) -> (usize, usize) {
        let ci = if k == 0 { in_channels } else { hidden };
        let co = if k == layers { out_channels } else { hidden };
        (ci, co)
    }

    pub fn layers(&self) -> usize {
        self.thetas.len()
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn spec(&self, k: usize) -> ConvSpec {
        let (ci, co) = Self::layer_channels(
            self.in_channels,
            self.out_channels,
            self.hidden,
            self.layers(),
            k,
        );
        ConvSpec { in_channels: ci, out_channels: co, kernel: self.kernel, bias: false }
    }

    /// Effective soft-threshold vector of layer k.
    pub fn lambda(&self, k: usize) -> Tensor<F> {
        self.thetas[k].map(|v| v.abs())
    }

    /// (weight count, threshold count)
    pub fn param_count(&self) -> (usize, usize) {
        let w = (0..=self.layers()).map(|k| self.spec(k).weight_count()).sum();
        (w, self.layers() * self.hidden)
    }

    pub fn apply(&self, input: &Tensor<F>) -> Result<Tensor<F>> {
        let mut h = input.clone();
        for k in 0..self.layers() {
            let c = conv2d(&h, &self.spec(k), &self.convs[k], None)?;
            h = soft_threshold(&c, &self.lambda(k))?;
        }
        conv2d(&h, &self.spec(self.layers()), &self.convs[self.layers()], None)
    }

    /// Forward pass retaining everything the backward pass needs.
    pub fn forward_trace(&self, input: &Tensor<F>) -> Result<(Tensor<F>, PUNetTrace<F>)> {
        let layers = self.layers();
        let mut conv_inputs = Vec::with_capacity(layers + 1);
        let mut pre_activations = Vec::with_capacity(layers);
        let mut h = input.clone();
        for k in 0..layers {
            let c = conv2d(&h, &self.spec(k), &self.convs[k], None)?;
            conv_inputs.push(h);
            let s = soft_threshold(&c, &self.lambda(k))?;
            pre_activations.push(c);
            h = s;
        }
        let out = conv2d(&h, &self.spec(layers), &self.convs[layers], None)?;
        conv_inputs.push(h);
        Ok((out, PUNetTrace { conv_inputs, pre_activations }))
    }

    /// Reverse-mode pass. Returns the gradient w.r.t. the input and the
    /// parameter gradients accumulated into `grads`.
    pub fn backward(
        &self,
        trace: &PUNetTrace<F>,
        grad_out: &Tensor<F>,
        grads: &mut PUNetGrads<F>,
    ) -> Result<Tensor<F>> {
        let layers = self.layers();
        let last = conv2d_backward(grad_out, &trace.conv_inputs[layers], &self.spec(layers), &self.convs[layers])?;
        grads.convs[layers].add_assign(&last.weights)?;
        let mut g = last.input;
        for k in (0..layers).rev() {
            let (gi, glambda) = soft_threshold_backward(&g, &trace.pre_activations[k], &self.lambda(k))?;
            let gtheta = glambda.zip_with(&self.thetas[k], |gl, th| gl * sign0(th));
            grads.thetas[k].add_assign(&gtheta)?;
            let back = conv2d_backward(&gi, &trace.conv_inputs[k], &self.spec(k), &self.convs[k])?;
            grads.convs[k].add_assign(&back.weights)?;
            g = back.input;
        }
        Ok(g)
    }

    /// Smallest ||a| - lambda| over all soft-threshold pre-activations in the
    /// trace; gradient checks require this margin to stay away from the kink.
    pub fn min_kink_margin(&self, trace: &PUNetTrace<F>) -> F {
        let mut margin = F::infinity();
        for (k, pre) in trace.pre_activations.iter().enumerate() {
            let lam = self.lambda(k);
            let (n, c, h, w) = pre.dims4().expect("trace tensors are NCHW");
            let plane = h * w;
            for s in 0..n {
                for ch in 0..c {
                    let l = lam.data()[ch];
                    let off = (s * c + ch) * plane;
                    for &a in &pre.data()[off..off + plane] {
                        margin = margin.min((a.abs() - l).abs());
                    }
                }
            }
        }
        margin
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weights_give_zero_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mut net = PUNet::<f32>::new(1, 3, 4, 2, 3, InitKind::Random, &mut rng).unwrap();
        for w in &mut net.convs {
            w.fill(0.0);
        }
        let input = Tensor::randn(&[1, 1, 8, 8], 1.0, &mut rng);
        let out = net.apply(&input).unwrap();
        assert_eq!(out.max_abs(), 0.0);
        assert_eq!(out.shape(), [1, 3, 8, 8]);
    }

    #[test]
    fn identity_stack_is_identity() {
        // K=1, M=1, center-tap kernels, lambda = 0, final conv identity.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut net = PUNet::<f64>::new(1, 1, 1, 1, 3, InitKind::Random, &mut rng).unwrap();
        for w in &mut net.convs {
            w.fill(0.0);
            *w.at4_mut(0, 0, 1, 1) = 1.0;
        }
        net.thetas[0].fill(0.0);
        let input = Tensor::randn(&[2, 1, 6, 6], 1.0, &mut rng);
        let out = net.apply(&input).unwrap();
        assert_eq!(out, input);
    }

    #[test]
    fn matches_manual_composition_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let net = PUNet::<f32>::new(3, 1, 5, 3, 3, InitKind::Random, &mut rng).unwrap();
        let input = Tensor::randn(&[1, 3, 9, 9], 1.0, &mut rng);
        let out = net.apply(&input).unwrap();

        let mut h = input;
        for k in 0..3 {
            let c = conv2d(&h, &net.spec(k), &net.convs[k], None).unwrap();
            h = soft_threshold(&c, &net.lambda(k)).unwrap();
        }
        let manual = conv2d(&h, &net.spec(3), &net.convs[3], None).unwrap();
        assert_eq!(out, manual);
    }

    #[test]
    fn default_sizes_match_the_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        // P-Net: 1 -> 3 with K=8, M=16, f=3.
        let p = PUNet::<f32>::new(1, 3, 16, 8, 3, InitKind::Identity, &mut rng).unwrap();
        assert_eq!(p.param_count(), (16_704, 128));
        // U-Net: 3 -> 1.
        let u = PUNet::<f32>::new(3, 1, 16, 8, 3, InitKind::Identity, &mut rng).unwrap();
        assert_eq!(u.param_count(), (16_704, 128));
    }

    #[test]
    fn identity_init_outputs_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let net = PUNet::<f32>::new(1, 3, 8, 4, 3, InitKind::Identity, &mut rng).unwrap();
        let input = Tensor::randn(&[1, 1, 8, 8], 1.0, &mut rng);
        assert_eq!(net.apply(&input).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(46);
        let net = PUNet::<f64>::new(2, 1, 3, 2, 3, InitKind::Random, &mut rng).unwrap();
        let input = Tensor::randn(&[1, 2, 5, 5], 1.0, &mut rng);
        let probe = Tensor::randn(&[1, 1, 5, 5], 1.0, &mut rng);

        let loss = |net: &PUNet<f64>, input: &Tensor<f64>| -> f64 {
            net.apply(input).unwrap().mul_elem(&probe).unwrap().sum()
        };

        let (_, trace) = net.forward_trace(&input).unwrap();
        assert!(net.min_kink_margin(&trace) > 1e-3, "unlucky seed: kink too close");
        let mut grads = PUNetGrads::zeros_like(&net);
        let gin = net.backward(&trace, &probe, &mut grads).unwrap();

        let h = 1e-6;
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-10);

        for idx in (0..input.len()).step_by(9) {
            let mut p = input.clone();
            p.data_mut()[idx] += h;
            let mut m = input.clone();
            m.data_mut()[idx] -= h;
            let fd = (loss(&net, &p) - loss(&net, &m)) / (2.0 * h);
            assert!(rel(gin.data()[idx], fd) <= 1e-5, "input {idx}");
        }
        for layer in 0..net.convs.len() {
            for idx in (0..net.convs[layer].len()).step_by(11) {
                let mut np = net.clone();
                np.convs[layer].data_mut()[idx] += h;
                let mut nm = net.clone();
                nm.convs[layer].data_mut()[idx] -= h;
                let fd = (loss(&np, &input) - loss(&nm, &input)) / (2.0 * h);
                assert!(rel(grads.convs[layer].data()[idx], fd) <= 1e-5, "conv {layer}/{idx}");
            }
        }
        for layer in 0..net.thetas.len() {
            for idx in 0..net.thetas[layer].len() {
                let mut np = net.clone();
                np.thetas[layer].data_mut()[idx] += h;
                let mut nm = net.clone();
                nm.thetas[layer].data_mut()[idx] -= h;
                let fd = (loss(&np, &input) - loss(&nm, &input)) / (2.0 * h);
                assert!(rel(grads.thetas[layer].data()[idx], fd) <= 1e-5, "theta {layer}/{idx}");
            }
        }
    }

    #[test]
    fn channel_mismatch_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let net = PUNet::<f32>::new(1, 3, 4, 2, 3, InitKind::Random, &mut rng).unwrap();
        let bad = Tensor::zeros(&[1, 3, 8, 8]);
        assert!(net.apply(&bad).is_err());
    }
}
