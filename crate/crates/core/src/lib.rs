//! Image denoising with an invertible lifting network.
//!
//! The engine decomposes a noisy image with an undecimated Haar transform,
//! refines the detail/coarse split with pairs of learned predictor and
//! update networks (an exactly invertible non-linear transform), shrinks the
//! detail channels with a sparsity-driven head, and reconstructs through the
//! inverse transform. Everything is built on a small dense-tensor substrate
//! with hand-written reverse-mode gradients, so the inverse pass can also be
//! used to recompute activations during backpropagation instead of storing
//! them.
//!
//! Module map:
//! - [`tensor`]: dense NCHW tensors and elementwise kernels
//! - [`conv`]: 2D convolution forward/backward (im2col + GEMM)
//! - [`shrink`]: soft-thresholding forward/backward
//! - [`adam`]: Adam optimizer state and update step
//! - [`wavelet`]: undecimated single-level Haar analysis/synthesis
//! - [`punet`]: predictor/update sub-networks (conv + soft-threshold stacks)
//! - [`linn`]: lifting pairs, exact inverse, trace and recompute backward
//! - [`denoiser`]: soft-threshold head, LISTA head, ISTA reference solver
//! - [`model`]: whole-model assembly, denoising pipeline, parameter counts
//! - [`gradcheck`]: finite-difference verification of analytic gradients
//! - [`pipeline`]: data loading, patch sampling, noise, training, metrics,
//!   checkpoints

pub mod adam;
pub mod conv;
pub mod denoiser;
pub mod error;
pub mod gradcheck;
pub mod linn;
pub mod model;
pub mod pipeline;
pub mod punet;
pub mod shrink;
pub mod tensor;
pub mod wavelet;

pub use error::{Error, Result};
pub use model::LinnModel;
pub use tensor::Tensor;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use rand_distr::StandardNormal;
use std::fmt::{Debug, Display};

/// Element type of a [`Tensor`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    pub fn size_bytes(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Dtype::F32 => "f32",
            Dtype::F64 => "f64",
        }
    }
}

impl std::fmt::Display for Dtype {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Floating-point scalar the whole crate is generic over: f32 or f64.
///
/// f32 is the training/inference precision; f64 is used by the gradient
/// checker and the tightest invertibility tests.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    const DTYPE: Dtype;

    /// C = alpha * A * B + beta * C with row-major contiguous slices.
    /// A is m x k, B is k x n, C is m x n.
    fn gemm(m: usize, k: usize, n: usize, alpha: Self, a: &[Self], b: &[Self], beta: Self, c: &mut [Self]);

    /// C = alpha * A * B^T + beta * C; `bt` is the row-major n x k array
    /// whose transpose is used as B.
    fn gemm_nt(m: usize, k: usize, n: usize, alpha: Self, a: &[Self], bt: &[Self], beta: Self, c: &mut [Self]);

    fn standard_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> Self;

    fn write_le(self, out: &mut Vec<u8>);

    /// Reads one value from the start of `bytes` (must hold at least
    /// `DTYPE.size_bytes()` bytes).
    fn read_le(bytes: &[u8]) -> Self;
}

impl Scalar for f32 {
    const DTYPE: Dtype = Dtype::F32;

    fn gemm(m: usize, k: usize, n: usize, alpha: Self, a: &[Self], b: &[Self], beta: Self, c: &mut [Self]) {
        assert_eq!(a.len(), m * k, "gemm: A length mismatch");
        assert_eq!(b.len(), k * n, "gemm: B length mismatch");
        assert_eq!(c.len(), m * n, "gemm: C length mismatch");
        // Safety: lengths checked above; strides describe contiguous row-major
        // matrices inside the slices.
        unsafe {
            matrixmultiply::sgemm(
                m, k, n, alpha,
                a.as_ptr(), k as isize, 1,
                b.as_ptr(), n as isize, 1,
                beta,
                c.as_mut_ptr(), n as isize, 1,
            );
        }
    }

    fn gemm_nt(m: usize, k: usize, n: usize, alpha: Self, a: &[Self], bt: &[Self], beta: Self, c: &mut [Self]) {
        assert_eq!(a.len(), m * k, "gemm_nt: A length mismatch");
        assert_eq!(bt.len(), n * k, "gemm_nt: B^T length mismatch");
        assert_eq!(c.len(), m * n, "gemm_nt: C length mismatch");
        // Safety: lengths checked; B is addressed through its transpose by
        // swapping the row/column strides.
        unsafe {
            matrixmultiply::sgemm(
                m, k, n, alpha,
                a.as_ptr(), k as isize, 1,
                bt.as_ptr(), 1, k as isize,
                beta,
                c.as_mut_ptr(), n as isize, 1,
            );
        }
    }

    fn standard_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes[..4].try_into().expect("short f32 payload"))
    }
}

impl Scalar for f64 {
    const DTYPE: Dtype = Dtype::F64;

    fn gemm(m: usize, k: usize, n: usize, alpha: Self, a: &[Self], b: &[Self], beta: Self, c: &mut [Self]) {
        assert_eq!(a.len(), m * k, "gemm: A length mismatch");
        assert_eq!(b.len(), k * n, "gemm: B length mismatch");
        assert_eq!(c.len(), m * n, "gemm: C length mismatch");
        // Safety: as in the f32 impl.
        unsafe {
            matrixmultiply::dgemm(
                m, k, n, alpha,
                a.as_ptr(), k as isize, 1,
                b.as_ptr(), n as isize, 1,
                beta,
                c.as_mut_ptr(), n as isize, 1,
            );
        }
    }

    fn gemm_nt(m: usize, k: usize, n: usize, alpha: Self, a: &[Self], bt: &[Self], beta: Self, c: &mut [Self]) {
        assert_eq!(a.len(), m * k, "gemm_nt: A length mismatch");
        assert_eq!(bt.len(), n * k, "gemm_nt: B^T length mismatch");
        assert_eq!(c.len(), m * n, "gemm_nt: C length mismatch");
        // Safety: as in the f32 impl.
        unsafe {
            matrixmultiply::dgemm(
                m, k, n, alpha,
                a.as_ptr(), k as isize, 1,
                bt.as_ptr(), 1, k as isize,
                beta,
                c.as_mut_ptr(), n as isize, 1,
            );
        }
    }

    fn standard_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes[..8].try_into().expect("short f64 payload"))
    }
}

/// Shorthand for converting literals into the generic scalar type.
#[inline]
pub fn cast<F: Scalar>(v: f64) -> F {
    F::from_f64(v).expect("f64 literal not representable")
}

pub type Tensor32 = Tensor<f32>;
pub type Tensor64 = Tensor<f64>;
pub type Model32 = LinnModel<f32>;
pub type Model64 = LinnModel<f64>;
