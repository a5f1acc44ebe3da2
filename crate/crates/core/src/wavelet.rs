//! Undecimated single-level 2D Haar transform with periodic boundaries.
//!
//! The 1D analysis pair is h = [1/2, 1/2], g = [1/2, -1/2]; 2D bands are the
//! separable products, so every tap is +-1/4 and the four band filters'
//! autocorrelations sum to the identity. Analysis is therefore a tight frame
//! with frame bound 1 and synthesis is simply the adjoint, giving exact
//! reconstruction with no extra scale factors. Both directions are linear,
//! so each is the other's gradient map.
//!
//! Detail channel order is fixed as [LH, HL, HH], where the first letter is
//! the vertical filter and the second the horizontal one (LH = low-pass
//! vertically, high-pass horizontally).

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::{cast, Scalar};

/// One level of undecimated analysis: low-pass `coarse` [N,1,H,W] and the
/// three high-pass bands stacked in `detail` [N,3,H,W].
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletBands<F> {
    pub coarse: Tensor<F>,
    pub detail: Tensor<F>,
}

impl<F: Scalar> WaveletBands<F> {
    pub fn check_consistent(&self) -> Result<()> {
        let (n, c, h, w) = self.coarse.dims4()?;
        let (dn, dc, dh, dw) = self.detail.dims4()?;
        if c != 1 || dc != 3 || (dn, dh, dw) != (n, h, w) {
            return Err(Error::shape(
                "WaveletBands",
                format!("coarse [N,1,H,W] with detail [N,3,H,W], N={n} H={h} W={w}"),
                format!("coarse {} detail {}", self.coarse.shape_str(), self.detail.shape_str()),
            ));
        }
        Ok(())
    }
}

fn check_image<F: Scalar>(op: &'static str, image: &Tensor<F>) -> Result<(usize, usize, usize)> {
    let (n, c, h, w) = image.dims4()?;
    if c != 1 {
        return Err(Error::shape(op, "[N,1,H,W] grayscale", image.shape_str()));
    }
    if h < 2 || w < 2 {
        return Err(Error::invalid(op, format!("spatial size {h}x{w} is degenerate, need >= 2x2")));
    }
    Ok((n, h, w))
}

/// Undecimated Haar analysis of a grayscale batch.
pub fn dwt_forward<F: Scalar>(image: &Tensor<F>) -> Result<WaveletBands<F>> {
    let (n, h, w) = check_image("dwt_forward", image)?;
    let q = cast::<F>(0.25);
    let plane = h * w;
    let mut coarse = Tensor::zeros(&[n, 1, h, w]);
    let mut detail = Tensor::zeros(&[n, 3, h, w]);
    for s in 0..n {
        let src = &image.data()[s * plane..(s + 1) * plane];
        for i in 0..h {
            let i1 = if i + 1 == h { 0 } else { i + 1 };
            for j in 0..w {
                let j1 = if j + 1 == w { 0 } else { j + 1 };
                let x00 = src[i * w + j];
                let x01 = src[i * w + j1];
                let x10 = src[i1 * w + j];
                let x11 = src[i1 * w + j1];
                let idx = i * w + j;
                coarse.data_mut()[s * plane + idx] = (x00 + x01 + x10 + x11) * q;
                let d = &mut detail.data_mut()[s * 3 * plane..(s + 1) * 3 * plane];
                d[idx] = (x00 - x01 + x10 - x11) * q; // LH
                d[plane + idx] = (x00 + x01 - x10 - x11) * q; // HL
                d[2 * plane + idx] = (x00 - x01 - x10 + x11) * q; // HH
            }
        }
    }
    coarse.debug_check_finite("dwt_forward");
    detail.debug_check_finite("dwt_forward");
    Ok(WaveletBands { coarse, detail })
}

/// Adjoint of [`dwt_forward`]; exact inverse under the tight-frame
/// normalization.
pub fn dwt_inverse<F: Scalar>(bands: &WaveletBands<F>) -> Result<Tensor<F>> {
    bands.check_consistent()?;
    let (n, _, h, w) = bands.coarse.dims4()?;
    let q = cast::<F>(0.25);
    let plane = h * w;
    let mut image = Tensor::zeros(&[n, 1, h, w]);
    for s in 0..n {
        let c = &bands.coarse.data()[s * plane..(s + 1) * plane];
        let d = &bands.detail.data()[s * 3 * plane..(s + 1) * 3 * plane];
        let dst = &mut image.data_mut()[s * plane..(s + 1) * plane];
        for p in 0..h {
            let pm = if p == 0 { h - 1 } else { p - 1 };
            for t in 0..w {
                let tm = if t == 0 { w - 1 } else { t - 1 };
                // Tap (u, v) of each band filter multiplies band(p-u, q-v).
                let at = |row: usize, col: usize| row * w + col;
                let (a00, a01, a10, a11) = (at(p, t), at(p, tm), at(pm, t), at(pm, tm));
                let ll = c[a00] + c[a01] + c[a10] + c[a11];
                let lh = d[a00] - d[a01] + d[a10] - d[a11];
                let hl = d[plane + a00] + d[plane + a01] - d[plane + a10] - d[plane + a11];
                let hh = d[2 * plane + a00] - d[2 * plane + a01] - d[2 * plane + a10]
                    + d[2 * plane + a11];
                dst[p * w + t] = (ll + lh + hl + hh) * q;
            }
        }
    }
    image.debug_check_finite("dwt_inverse");
    Ok(image)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Direct 2D periodic correlation with explicit taps; the oracle the
    /// fast path is checked against.
    fn correlate_oracle(image: &Tensor<f64>, taps: [[f64; 2]; 2]) -> Tensor<f64> {
        let (n, _, h, w) = image.dims4().unwrap();
        let mut out = Tensor::zeros(&[n, 1, h, w]);
        for s in 0..n {
            for i in 0..h {
                for j in 0..w {
                    let mut acc = 0.0;
                    for u in 0..2 {
                        for v in 0..2 {
                            acc += taps[u][v] * image.at4(s, 0, (i + u) % h, (j + v) % w);
                        }
                    }
                    *out.at4_mut(s, 0, i, j) = acc;
                }
            }
        }
        out
    }

    fn band_taps() -> [[[f64; 2]; 2]; 4] {
        let h = [0.5, 0.5];
        let g = [0.5, -0.5];
        let outer = |a: [f64; 2], b: [f64; 2]| [[a[0] * b[0], a[0] * b[1]], [a[1] * b[0], a[1] * b[1]]];
        [outer(h, h), outer(h, g), outer(g, h), outer(g, g)]
    }

    fn detail_channel(bands: &WaveletBands<f64>, ch: usize) -> Tensor<f64> {
        let (n, _, h, w) = bands.coarse.dims4().unwrap();
        let plane = h * w;
        Tensor::from_fn(&[n, 1, h, w], |i| {
            let s = i / plane;
            bands.detail.data()[(s * 3 + ch) * plane + i % plane]
        })
    }

    #[test]
    fn constant_image_goes_to_coarse_only() {
        let img = Tensor::<f64>::filled(&[1, 1, 6, 5], 0.73);
        let bands = dwt_forward(&img).unwrap();
        assert!(bands.coarse.max_abs_diff(&Tensor::filled(&[1, 1, 6, 5], 0.73)).unwrap() < 1e-15);
        assert!(bands.detail.max_abs() < 1e-15);
    }

    #[test]
    fn impulse_matches_correlation_oracle() {
        let mut img = Tensor::<f64>::zeros(&[1, 1, 4, 4]);
        *img.at4_mut(0, 0, 0, 0) = 1.0;
        let bands = dwt_forward(&img).unwrap();
        let taps = band_taps();
        assert!(bands.coarse.max_abs_diff(&correlate_oracle(&img, taps[0])).unwrap() < 1e-15);
        for ch in 0..3 {
            let got = detail_channel(&bands, ch);
            let want = correlate_oracle(&img, taps[ch + 1]);
            assert!(got.max_abs_diff(&want).unwrap() < 1e-15, "channel {ch}");
        }
        // The impulse is recovered exactly.
        let back = dwt_inverse(&bands).unwrap();
        assert!(back.max_abs_diff(&img).unwrap() <= 1e-12);
    }

    #[test]
    fn forward_matches_oracle_on_random_images() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let taps = band_taps();
        for _ in 0..10 {
            let img = Tensor::<f64>::randn(&[2, 1, 7, 9], 1.0, &mut rng);
            let bands = dwt_forward(&img).unwrap();
            assert!(bands.coarse.max_abs_diff(&correlate_oracle(&img, taps[0])).unwrap() < 1e-14);
            for ch in 0..3 {
                let got = detail_channel(&bands, ch);
                let want = correlate_oracle(&img, taps[ch + 1]);
                assert!(got.max_abs_diff(&want).unwrap() < 1e-14);
            }
        }
    }

    #[test]
    fn checkerboard_energy_lands_in_hh() {
        let img = Tensor::<f64>::from_fn(&[1, 1, 8, 8], |i| {
            let (y, x) = (i / 8, i % 8);
            if (y + x) % 2 == 0 {
                1.0
            } else {
                -1.0
            }
        });
        let bands = dwt_forward(&img).unwrap();
        assert!(bands.coarse.max_abs() < 1e-15);
        assert!(detail_channel(&bands, 0).max_abs() < 1e-15);
        assert!(detail_channel(&bands, 1).max_abs() < 1e-15);
        let hh = detail_channel(&bands, 2);
        assert!((hh.sqnorm() - img.sqnorm()).abs() < 1e-12);
    }

    #[test]
    fn perfect_reconstruction_and_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..100 {
            let img = Tensor::<f64>::randn(&[1, 1, 16, 16], 1.0, &mut rng);
            let bands = dwt_forward(&img).unwrap();
            let back = dwt_inverse(&bands).unwrap();
            assert!(back.max_abs_diff(&img).unwrap() <= 1e-12);
            let energy = bands.coarse.sqnorm() + bands.detail.sqnorm();
            let rel = (energy - img.sqnorm()).abs() / img.sqnorm();
            assert!(rel <= 1e-5, "energy identity violated: {rel}");
        }
    }

    #[test]
    fn zero_bands_give_zero_image() {
        let bands =
            WaveletBands { coarse: Tensor::<f32>::zeros(&[1, 1, 5, 5]), detail: Tensor::zeros(&[1, 3, 5, 5]) };
        assert_eq!(dwt_inverse(&bands).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn linear_in_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let a = Tensor::<f64>::randn(&[1, 1, 6, 6], 1.0, &mut rng);
        let b = Tensor::<f64>::randn(&[1, 1, 6, 6], 1.0, &mut rng);
        let combo = a.scale(2.5).add(&b.scale(-1.25)).unwrap();
        let direct = dwt_forward(&combo).unwrap();
        let ba = dwt_forward(&a).unwrap();
        let bb = dwt_forward(&b).unwrap();
        let mixed_c = ba.coarse.scale(2.5).add(&bb.coarse.scale(-1.25)).unwrap();
        let mixed_d = ba.detail.scale(2.5).add(&bb.detail.scale(-1.25)).unwrap();
        assert!(direct.coarse.max_abs_diff(&mixed_c).unwrap() < 1e-12);
        assert!(direct.detail.max_abs_diff(&mixed_d).unwrap() < 1e-12);
    }

    #[test]
    fn degenerate_sizes_rejected() {
        assert!(dwt_forward(&Tensor::<f32>::zeros(&[1, 1, 1, 8])).is_err());
        assert!(dwt_forward(&Tensor::<f32>::zeros(&[1, 3, 8, 8])).is_err());
        let bands =
            WaveletBands { coarse: Tensor::<f32>::zeros(&[1, 1, 5, 5]), detail: Tensor::zeros(&[1, 3, 4, 5]) };
        assert!(dwt_inverse(&bands).is_err());
    }
}
