//! Per-channel soft-thresholding S_lambda(a) = sgn(a) * max(|a| - lambda, 0)
//! and its reverse-mode gradients.
//!
//! The subgradient at the kink |a| = lambda is taken as 0, matching the
//! one-sided max. Thresholds broadcast over one value per channel of an
//! NCHW tensor.

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::Scalar;

fn check_lambda<F: Scalar>(input: &Tensor<F>, lambda: &Tensor<F>) -> Result<usize> {
    let (_, c, _, _) = input.dims4()?;
    if lambda.shape() != [c] {
        return Err(Error::shape("soft_threshold", format!("lambda [{c}]"), lambda.shape_str()));
    }
    if let Some(v) = lambda.data().iter().find(|v| **v < F::zero()) {
        return Err(Error::NegativeThreshold { value: v.to_f64().unwrap_or(f64::NAN) });
    }
    Ok(c)
}

pub fn soft_threshold<F: Scalar>(input: &Tensor<F>, lambda: &Tensor<F>) -> Result<Tensor<F>> {
    let c = check_lambda(input, lambda)?;
    let (n, _, h, w) = input.dims4()?;
    let plane = h * w;
    let mut out = Tensor::zeros(input.shape());
    for s in 0..n {
        for ch in 0..c {
            let l = lambda.data()[ch];
            let off = (s * c + ch) * plane;
            let src = &input.data()[off..off + plane];
            let dst = &mut out.data_mut()[off..off + plane];
            for (o, &a) in dst.iter_mut().zip(src) {
                let m = a.abs() - l;
                *o = if m > F::zero() { a.signum() * m } else { F::zero() };
            }
        }
    }
    out.debug_check_finite("soft_threshold");
    Ok(out)
}

/// Returns (grad_input, grad_lambda). `saved_input` is the forward input.
pub fn soft_threshold_backward<F: Scalar>(
    grad_out: &Tensor<F>,
    saved_input: &Tensor<F>,
    lambda: &Tensor<F>,
) -> Result<(Tensor<F>, Tensor<F>)> {
    let c = check_lambda(saved_input, lambda)?;
    if grad_out.shape() != saved_input.shape() {
        return Err(Error::shape("soft_threshold_backward", saved_input.shape_str(), grad_out.shape_str()));
    }
    let (n, _, h, w) = saved_input.dims4()?;
    let plane = h * w;
    let mut grad_input = Tensor::zeros(saved_input.shape());
    let mut grad_lambda = Tensor::zeros(&[c]);
    for s in 0..n {
        for ch in 0..c {
            let l = lambda.data()[ch];
            let off = (s * c + ch) * plane;
            let a = &saved_input.data()[off..off + plane];
            let g = &grad_out.data()[off..off + plane];
            let gi = &mut grad_input.data_mut()[off..off + plane];
            let mut gl = F::zero();
            for i in 0..plane {
                if a[i].abs() > l {
                    gi[i] = g[i];
                    gl -= a[i].signum() * g[i];
                }
            }
            grad_lambda.data_mut()[ch] += gl;
        }
    }
    Ok((grad_input, grad_lambda))
}
