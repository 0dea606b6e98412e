//! 2D circular convolution of vectorized `S x U` grids.
//!
//! Both operands are real vectors of length `S*U` read as column-major
//! `S x U` matrices. The result is vectorized the same way:
//!
//! `out[s, u] = Σ_{s', u'} kernel[s', u'] · input[(s - s') mod S, (u - u') mod U]`
//!
//! Evaluated through the 2D FFT, so a single product costs `O(SU log SU)`.

use num_complex::Complex64;

use super::Fft2;
use crate::error::{ensure_len, Result};

/// Reusable circular convolver for a fixed grid shape.
#[derive(Clone, Debug)]
pub struct CircConv2d {
    fft: Fft2,
}

impl CircConv2d {
    pub fn new(s: usize, u: usize) -> Self {
        Self { fft: Fft2::new(s, u) }
    }

    pub fn from_fft(fft: Fft2) -> Self {
        Self { fft }
    }

    pub fn len(&self) -> usize {
        self.fft.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.fft.rows(), self.fft.cols())
    }

    /// Unnormalized 2D DFT of a real grid; these are the eigenvalues of the
    /// block-circulant matrix generated by `v`.
    pub fn spectrum(&self, v: &[f64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.len(), "spectrum: length mismatch");
        let mut buf: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.fft.forward(&mut buf);
        buf
    }

    /// Convolution with a kernel whose spectrum was precomputed.
    pub fn apply_spectrum(&self, kernel_spectrum: &[Complex64], input: &[f64]) -> Vec<f64> {
        let mut buf = self.spectrum(input);
        for (b, k) in buf.iter_mut().zip(kernel_spectrum) {
            *b *= k;
        }
        self.fft.inverse(&mut buf);
        let scale = 1.0 / self.len() as f64;
        buf.into_iter().map(|z| z.re * scale).collect()
    }

    pub fn apply(&self, kernel: &[f64], input: &[f64]) -> Result<Vec<f64>> {
        ensure_len("circular convolution kernel", self.len(), kernel.len())?;
        ensure_len("circular convolution input", self.len(), input.len())?;
        Ok(self.apply_spectrum(&self.spectrum(kernel), input))
    }
}

/// One-shot 2D circular convolution (plans a fresh FFT).
pub fn fft2_circ_conv(kernel: &[f64], input: &[f64], s: usize, u: usize) -> Result<Vec<f64>> {
    ensure_len("fft2_circ_conv kernel", s * u, kernel.len())?;
    ensure_len("fft2_circ_conv input", s * u, input.len())?;
    CircConv2d::new(s, u).apply(kernel, input)
}

/// 2D circular flip `(s, u) -> (-s mod S, -u mod U)` on the column-major grid.
///
/// If `A` is the block-circulant matrix with `A x = w ⋆ x`, then
/// `Aᵀ x = flip2(w) ⋆ x`.
pub fn flip2(v: &[f64], s: usize, u: usize) -> Vec<f64> {
    assert_eq!(v.len(), s * u, "flip2: length mismatch");
    let mut out = vec![0.0; v.len()];
    for col in 0..u {
        for row in 0..s {
            let fr = (s - row) % s;
            let fc = (u - col) % u;
            out[fr + s * fc] = v[row + s * col];
        }
    }
    out
}
