//! Dense row-major tensors.
//!
//! Image data uses NCHW layout throughout. All binary operations check
//! shape compatibility and fail loudly; forward kernels assert finite
//! outputs in debug builds.

use crate::error::{Error, Result};
use crate::{cast, Scalar};
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<F> {
    shape: Vec<usize>,
    data: Vec<F>,
}

impl<F: Scalar> Tensor<F> {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor { shape: shape.to_vec(), data: vec![F::zero(); shape.iter().product()] }
    }

    pub fn filled(shape: &[usize], value: F) -> Self {
        Tensor { shape: shape.to_vec(), data: vec![value; shape.iter().product()] }
    }

    pub fn from_vec(shape: &[usize], data: Vec<F>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::shape(
                "from_vec",
                format!("{n} elements for shape {shape:?}"),
                format!("{} elements", data.len()),
            ));
        }
        Ok(Tensor { shape: shape.to_vec(), data })
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> F) -> Self {
        let n: usize = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: (0..n).map(&mut f).collect() }
    }

    /// I.i.d. Gaussian entries with mean 0 and the given standard deviation.
    pub fn randn<R: Rng + ?Sized>(shape: &[usize], std: F, rng: &mut R) -> Self {
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| F::standard_normal(rng) * std).collect();
        Tensor { shape: shape.to_vec(), data }
    }

    #[inline]
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[F] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<F> {
        self.data
    }

    pub fn shape_str(&self) -> String {
        format!("{:?}", self.shape)
    }

    /// Interprets the tensor as NCHW and returns (n, c, h, w).
    pub fn dims4(&self) -> Result<(usize, usize, usize, usize)> {
        match *self.shape {
            [n, c, h, w] => Ok((n, c, h, w)),
            _ => Err(Error::shape("dims4", "rank-4 NCHW tensor", self.shape_str())),
        }
    }

    #[inline]
    pub fn at4(&self, n: usize, c: usize, y: usize, x: usize) -> F {
        debug_assert_eq!(self.shape.len(), 4);
        let (ch, h, w) = (self.shape[1], self.shape[2], self.shape[3]);
        self.data[((n * ch + c) * h + y) * w + x]
    }

    #[inline]
    pub fn at4_mut(&mut self, n: usize, c: usize, y: usize, x: usize) -> &mut F {
        debug_assert_eq!(self.shape.len(), 4);
        let (ch, h, w) = (self.shape[1], self.shape[2], self.shape[3]);
        &mut self.data[((n * ch + c) * h + y) * w + x]
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.shape == other.shape
    }

    fn check_same(op: &'static str, a: &Self, b: &Self) -> Result<()> {
        if a.shape == b.shape {
            Ok(())
        } else {
            Err(Error::shape(op, a.shape_str(), b.shape_str()))
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        Self::check_same("add", self, other)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        Self::check_same("sub", self, other)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    pub fn mul_elem(&self, other: &Self) -> Result<Self> {
        Self::check_same("mul_elem", self, other)?;
        Ok(self.zip_with(other, |a, b| a * b))
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        Self::check_same("add_assign", self, other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
        Ok(())
    }

    pub fn sub_assign(&mut self, other: &Self) -> Result<()> {
        Self::check_same("sub_assign", self, other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a -= *b;
        }
        Ok(())
    }

    /// self += alpha * other
    pub fn add_scaled_assign(&mut self, alpha: F, other: &Self) -> Result<()> {
        Self::check_same("add_scaled_assign", self, other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * *b;
        }
        Ok(())
    }

    pub fn scale(&self, alpha: F) -> Self {
        self.map(|v| v * alpha)
    }

    pub fn scale_assign(&mut self, alpha: F) {
        for v in &mut self.data {
            *v *= alpha;
        }
    }

    pub fn neg(&self) -> Self {
        self.map(|v| -v)
    }

    pub fn map(&self, f: impl Fn(F) -> F) -> Self {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(F, F) -> F) -> Self {
        debug_assert_eq!(self.shape, other.shape);
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn fill(&mut self, value: F) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    pub fn sum(&self) -> F {
        self.data.iter().fold(F::zero(), |acc, &v| acc + v)
    }

    pub fn mean(&self) -> F {
        if self.data.is_empty() {
            F::zero()
        } else {
            self.sum() / cast(self.data.len() as f64)
        }
    }

    /// Sum of squared entries.
    pub fn sqnorm(&self) -> F {
        self.data.iter().fold(F::zero(), |acc, &v| acc + v * v)
    }

    pub fn abs_sum(&self) -> F {
        self.data.iter().fold(F::zero(), |acc, &v| acc + v.abs())
    }

    pub fn max_abs(&self) -> F {
        self.data.iter().fold(F::zero(), |acc, &v| acc.max(v.abs()))
    }

    /// Largest |a - b| over all entries.
    pub fn max_abs_diff(&self, other: &Self) -> Result<F> {
        Self::check_same("max_abs_diff", self, other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(F::zero(), |acc, (&a, &b)| acc.max((a - b).abs())))
    }

    /// Population variance of the entries.
    pub fn variance(&self) -> F {
        if self.data.is_empty() {
            return F::zero();
        }
        let m = self.mean();
        let n = cast::<F>(self.data.len() as f64);
        self.data.iter().fold(F::zero(), |acc, &v| acc + (v - m) * (v - m)) / n
    }

    pub fn clamp01(&self) -> Self {
        self.map(|v| v.max(F::zero()).min(F::one()))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Debug-mode guard: forward kernels must not produce NaN/Inf from
    /// finite inputs.
    #[inline]
    pub fn debug_check_finite(&self, op: &'static str) {
        debug_assert!(self.all_finite(), "{op}: non-finite value produced");
    }

    /// Extracts one sample of an NCHW batch as a [1,C,H,W] tensor.
    pub fn slice_batch(&self, n: usize) -> Result<Self> {
        let (nn, c, h, w) = self.dims4()?;
        if n >= nn {
            return Err(Error::invalid("slice_batch", format!("index {n} out of {nn}")));
        }
        let stride = c * h * w;
        Ok(Tensor { shape: vec![1, c, h, w], data: self.data[n * stride..(n + 1) * stride].to_vec() })
    }

    /// Stacks [1,C,H,W] tensors into one [N,C,H,W] batch.
    pub fn stack_batch(items: &[Self]) -> Result<Self> {
        let first = items
            .first()
            .ok_or_else(|| Error::invalid("stack_batch", "empty input"))?;
        let (_, c, h, w) = first.dims4()?;
        let mut data = Vec::with_capacity(items.len() * c * h * w);
        for t in items {
            if t.shape != first.shape {
                return Err(Error::shape("stack_batch", first.shape_str(), t.shape_str()));
            }
            data.extend_from_slice(&t.data);
        }
        Ok(Tensor { shape: vec![items.len(), c, h, w], data })
    }

    /// Converts element type (used when loading checkpoints of a different
    /// precision is explicitly requested).
    pub fn convert<G: Scalar>(&self) -> Tensor<G> {
        Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .map(|v| G::from_f64(v.to_f64().expect("finite")).expect("representable"))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_mismatch_is_loud() {
        let a: Tensor<f32> = Tensor::zeros(&[2, 3]);
        let b: Tensor<f32> = Tensor::zeros(&[3, 2]);
        let err = a.add(&b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3]") && msg.contains("[3, 2]"), "{msg}");
    }

    #[test]
    fn from_vec_validates_length() {
        assert!(Tensor::from_vec(&[2, 2], vec![1.0f32; 3]).is_err());
        assert!(Tensor::from_vec(&[2, 2], vec![1.0f32; 4]).is_ok());
    }

    #[test]
    fn batch_slice_and_stack_round_trip() {
        let t = Tensor::<f64>::from_fn(&[3, 2, 4, 5], |i| i as f64);
        let parts: Vec<_> = (0..3).map(|n| t.slice_batch(n).unwrap()).collect();
        let back = Tensor::stack_batch(&parts).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn reductions() {
        let t = Tensor::<f64>::from_vec(&[4], vec![1.0, -2.0, 3.0, -4.0]).unwrap();
        assert_eq!(t.sum(), -2.0);
        assert_eq!(t.sqnorm(), 30.0);
        assert_eq!(t.max_abs(), 4.0);
        assert_eq!(t.abs_sum(), 10.0);
    }
}
