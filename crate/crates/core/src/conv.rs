//! 2D convolution (cross-correlation) with stride 1 and "same" zero padding,
//! plus its exact reverse-mode gradients.
//!
//! The forward pass lowers each batch sample to an im2col matrix and runs a
//! single GEMM per sample; the input gradient reuses the forward path with a
//! spatially flipped, channel-transposed kernel, and the weight gradient is a
//! GEMM against the im2col buffer. Single-threaded and deterministic.

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::Scalar;

/// Shape contract of one convolution layer. Kernels are square with odd side
/// `kernel`, stride is fixed at 1 and the symmetric zero padding of
/// (kernel-1)/2 keeps the spatial size unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub bias: bool,
}

impl ConvSpec {
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize, bias: bool) -> Result<Self> {
        if kernel % 2 == 0 || kernel == 0 {
            return Err(Error::invalid("ConvSpec", format!("kernel size {kernel} must be odd")));
        }
        if in_channels == 0 || out_channels == 0 {
            return Err(Error::invalid("ConvSpec", "channel counts must be positive"));
        }
        Ok(ConvSpec { in_channels, out_channels, kernel, bias })
    }

    pub fn weight_shape(&self) -> [usize; 4] {
        [self.out_channels, self.in_channels, self.kernel, self.kernel]
    }

    pub fn weight_count(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel * self.kernel
    }
}

fn check_weights<F: Scalar>(op: &'static str, spec: &ConvSpec, weights: &Tensor<F>) -> Result<()> {
    if weights.shape() != spec.weight_shape() {
        return Err(Error::shape(op, format!("{:?}", spec.weight_shape()), weights.shape_str()));
    }
    Ok(())
}

/// Writes the im2col lowering of one batch sample into `col`, laid out as a
/// row-major [cin*k*k, h*w] matrix. Out-of-image taps are zero.
fn im2col<F: Scalar>(input: &[F], cin: usize, h: usize, w: usize, k: usize, col: &mut [F]) {
    let pad = k / 2;
    debug_assert_eq!(col.len(), cin * k * k * h * w);
    let plane = h * w;
    for ci in 0..cin {
        let src_plane = &input[ci * plane..(ci + 1) * plane];
        for ky in 0..k {
            for kx in 0..k {
                let row = ((ci * k + ky) * k + kx) * plane;
                // Valid destination column range for this horizontal offset.
                let x0 = pad.saturating_sub(kx);
                let x1 = (w + pad).saturating_sub(kx).min(w);
                for y in 0..h {
                    let dest = &mut col[row + y * w..row + (y + 1) * w];
                    let iy = y + ky;
                    if iy < pad || iy >= h + pad || x0 >= x1 {
                        dest.iter_mut().for_each(|v| *v = F::zero());
                        continue;
                    }
                    let src_row = &src_plane[(iy - pad) * w..(iy - pad + 1) * w];
                    dest[..x0].iter_mut().for_each(|v| *v = F::zero());
                    dest[x0..x1].copy_from_slice(&src_row[x0 + kx - pad..x1 + kx - pad]);
                    dest[x1..].iter_mut().for_each(|v| *v = F::zero());
                }
            }
        }
    }
}

/// Cross-correlation of an NCHW input with [cout, cin, k, k] weights.
/// Output spatial size equals the input's.
pub fn conv2d<F: Scalar>(
    input: &Tensor<F>,
    spec: &ConvSpec,
    weights: &Tensor<F>,
    bias: Option<&Tensor<F>>,
) -> Result<Tensor<F>> {
    let (n, cin, h, w) = input.dims4()?;
    check_weights("conv2d", spec, weights)?;
    if cin != spec.in_channels {
        return Err(Error::shape(
            "conv2d",
            format!("input with {} channels", spec.in_channels),
            input.shape_str(),
        ));
    }
    match (spec.bias, bias) {
        (true, Some(b)) if b.shape() != [spec.out_channels] => {
            return Err(Error::shape("conv2d", format!("bias [{}]", spec.out_channels), b.shape_str()));
        }
        (true, None) => return Err(Error::invalid("conv2d", "spec declares a bias but none given")),
        (false, Some(_)) => return Err(Error::invalid("conv2d", "spec declares no bias")),
        _ => {}
    }

    let cout = spec.out_channels;
    let k = spec.kernel;
    let plane = h * w;
    let kdim = cin * k * k;
    let mut out = Tensor::zeros(&[n, cout, h, w]);
    let mut col = vec![F::zero(); kdim * plane];
    for s in 0..n {
        im2col(&input.data()[s * cin * plane..(s + 1) * cin * plane], cin, h, w, k, &mut col);
        let dst = &mut out.data_mut()[s * cout * plane..(s + 1) * cout * plane];
        F::gemm(cout, kdim, plane, F::one(), weights.data(), &col, F::zero(), dst);
    }
    if let Some(b) = bias {
        for s in 0..n {
            for c in 0..cout {
                let bc = b.data()[c];
                let off = (s * cout + c) * plane;
                out.data_mut()[off..off + plane].iter_mut().for_each(|v| *v += bc);
            }
        }
    }
    out.debug_check_finite("conv2d");
    Ok(out)
}

/// Gradients of [`conv2d`] with respect to input, weights and bias.
#[derive(Debug, Clone)]
pub struct ConvGrads<F> {
    pub input: Tensor<F>,
    pub weights: Tensor<F>,
    pub bias: Option<Tensor<F>>,
}

/// Kernel with reversed spatial taps and swapped channel axes; correlating
/// with it is the adjoint of correlating with `weights`.
pub fn flip_transpose<F: Scalar>(spec: &ConvSpec, weights: &Tensor<F>) -> Result<Tensor<F>> {
    check_weights("flip_transpose", spec, weights)?;
    let (cout, cin, k) = (spec.out_channels, spec.in_channels, spec.kernel);
    let mut flipped = Tensor::zeros(&[cin, cout, k, k]);
    for co in 0..cout {
        for ci in 0..cin {
            for ky in 0..k {
                for kx in 0..k {
                    *flipped.at4_mut(ci, co, k - 1 - ky, k - 1 - kx) = weights.at4(co, ci, ky, kx);
                }
            }
        }
    }
    Ok(flipped)
}

pub fn conv2d_backward<F: Scalar>(
    grad_out: &Tensor<F>,
    input: &Tensor<F>,
    spec: &ConvSpec,
    weights: &Tensor<F>,
) -> Result<ConvGrads<F>> {
    let (n, cin, h, w) = input.dims4()?;
    let (gn, gcout, gh, gw_) = grad_out.dims4()?;
    check_weights("conv2d_backward", spec, weights)?;
    if (gn, gcout, gh, gw_) != (n, spec.out_channels, h, w) || cin != spec.in_channels {
        return Err(Error::shape(
            "conv2d_backward",
            format!("grad [N={n},{},{h},{w}] for input {}", spec.out_channels, input.shape_str()),
            grad_out.shape_str(),
        ));
    }

    let cout = spec.out_channels;
    let k = spec.kernel;
    let plane = h * w;
    let kdim = cin * k * k;

    // d/d weights: accumulate gout_n x col(input_n)^T over the batch.
    let mut grad_weights = Tensor::zeros(&spec.weight_shape());
    let mut col = vec![F::zero(); kdim * plane];
    for s in 0..n {
        im2col(&input.data()[s * cin * plane..(s + 1) * cin * plane], cin, h, w, k, &mut col);
        let g = &grad_out.data()[s * cout * plane..(s + 1) * cout * plane];
        F::gemm_nt(cout, plane, kdim, F::one(), g, &col, F::one(), grad_weights.data_mut());
    }

    // d/d input: same-padding correlation with the flipped/transposed kernel.
    let back_spec = ConvSpec { in_channels: cout, out_channels: cin, kernel: k, bias: false };
    let flipped = flip_transpose(spec, weights)?;
    let grad_input = conv2d(grad_out, &back_spec, &flipped, None)?;

    let grad_bias = if spec.bias {
        let mut gb = Tensor::zeros(&[cout]);
        for s in 0..n {
            for c in 0..cout {
                let off = (s * cout + c) * plane;
                let sum = grad_out.data()[off..off + plane]
                    .iter()
                    .fold(F::zero(), |acc, &v| acc + v);
                gb.data_mut()[c] += sum;
            }
        }
        Some(gb)
    } else {
        None
    };

    Ok(ConvGrads { input: grad_input, weights: grad_weights, bias: grad_bias })
}
