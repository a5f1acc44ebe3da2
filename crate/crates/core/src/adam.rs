//! Adam optimizer with bias correction.

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::{cast, Scalar};

#[derive(Debug, Clone, Copy)]
pub struct AdamHyper<F> {
    pub lr: F,
    pub beta1: F,
    pub beta2: F,
    pub epsilon: F,
}

impl<F: Scalar> AdamHyper<F> {
    /// lr 1e-3, betas (0.9, 0.999), epsilon 1e-8.
    pub fn with_lr(lr: F) -> Self {
        AdamHyper { lr, beta1: cast(0.9), beta2: cast(0.999), epsilon: cast(1e-8) }
    }
}

impl<F: Scalar> Default for AdamHyper<F> {
    fn default() -> Self {
        Self::with_lr(cast(1e-3))
    }
}

/// Per-parameter first/second moment estimates plus the shared step counter.
#[derive(Debug, Clone)]
pub struct AdamState<F> {
    pub hyper: AdamHyper<F>,
    m: Vec<Tensor<F>>,
    v: Vec<Tensor<F>>,
    t: u64,
}

impl<F: Scalar> AdamState<F> {
    /// Moment buffers mirror the given parameter shapes.
    pub fn new(hyper: AdamHyper<F>, params: &[&Tensor<F>]) -> Self {
        AdamState {
            hyper,
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn set_lr(&mut self, lr: F) {
        self.hyper.lr = lr;
    }
}

/// One Adam update over a flat parameter list. Parameter order must match
/// the order the state was created with; gradients pair up one-to-one.
pub fn adam_step<F: Scalar>(
    params: &mut [&mut Tensor<F>],
    grads: &[&Tensor<F>],
    state: &mut AdamState<F>,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::invalid(
            "adam_step",
            format!(
                "{} params, {} grads, state over {}",
                params.len(),
                grads.len(),
                state.m.len()
            ),
        ));
    }
    for ((p, g), (m, v)) in params.iter().zip(grads).zip(state.m.iter().zip(&state.v)) {
        if !p.same_shape(g) || !p.same_shape(m) || !p.same_shape(v) {
            return Err(Error::shape("adam_step", p.shape_str(), g.shape_str()));
        }
    }

    state.t += 1;
    let h = state.hyper;
    let t = state.t as i32;
    let bc1 = F::one() - h.beta1.powi(t);
    let bc2 = F::one() - h.beta2.powi(t);

    for ((param, grad), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        let pd = param.data_mut();
        let gd = grad.data();
        let md = m.data_mut();
        let vd = v.data_mut();
        for i in 0..pd.len() {
            let g = gd[i];
            md[i] = h.beta1 * md[i] + (F::one() - h.beta1) * g;
            vd[i] = h.beta2 * vd[i] + (F::one() - h.beta2) * g * g;
            let m_hat = md[i] / bc1;
            let v_hat = vd[i] / bc2;
            pd[i] -= h.lr * m_hat / (v_hat.sqrt() + h.epsilon);
        }
    }
    Ok(())
}
