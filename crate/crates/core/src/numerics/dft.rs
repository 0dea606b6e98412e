use std::cell::RefCell;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::CMatrix;

/// Unitary DFT matrix, `F[j, k] = exp(-2πi jk / n) / sqrt(n)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DftMatrix {
    n: usize,
}

impl DftMatrix {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "DFT size must be positive");
        Self { n }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, j: usize, k: usize) -> Complex64 {
        let phase = -2.0 * PI * ((j * k) % self.n) as f64 / self.n as f64;
        Complex64::from_polar(1.0 / (self.n as f64).sqrt(), phase)
    }

    pub fn matrix(&self) -> CMatrix {
        CMatrix::from_fn(self.n, self.n, |j, k| self.entry(j, k))
    }
}

/// Planned 2D FFT over a `rows x cols` grid stored column-major, i.e. entry
/// `(r, c)` lives at index `r + rows * c` (the `vec` layout).
///
/// `forward`/`inverse` are unnormalized; `forward_unitary`/`inverse_unitary`
/// scale by `1/sqrt(rows*cols)` so that `forward_unitary` applies
/// `F_cols ⊗ F_rows`.
#[derive(Clone)]
pub struct Fft2 {
    rows: usize,
    cols: usize,
    fwd_rows: Arc<dyn Fft<f64>>,
    inv_rows: Arc<dyn Fft<f64>>,
    fwd_cols: Arc<dyn Fft<f64>>,
    inv_cols: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "FFT grid must be non-empty");
        let mut planner = FftPlanner::new();
        Self {
            rows,
            cols,
            fwd_rows: planner.plan_fft_forward(rows),
            inv_rows: planner.plan_fft_inverse(rows),
            fwd_cols: planner.plan_fft_forward(cols),
            inv_cols: planner.plan_fft_inverse(cols),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn run(&self, buf: &mut [Complex64], along_rows: &Arc<dyn Fft<f64>>, along_cols: &Arc<dyn Fft<f64>>) {
        assert_eq!(buf.len(), self.len(), "Fft2: buffer length mismatch");
        thread_local! {
            // FFT scratch and the transpose buffer, reused across calls
            static SCRATCH: RefCell<Vec<Complex64>> = const { RefCell::new(Vec::new()) };
        }
        SCRATCH.with(|cell| {
            let mut scratch = cell.borrow_mut();
            let zero = Complex64::new(0.0, 0.0);
            let need = along_rows.get_inplace_scratch_len().max(along_cols.get_inplace_scratch_len());
            if scratch.len() < need + buf.len() {
                scratch.resize(need + buf.len(), zero);
            }
            let (fft_scratch, t) = scratch.split_at_mut(need);
            // each contiguous column has `rows` entries
            along_rows.process_with_scratch(buf, &mut fft_scratch[..along_rows.get_inplace_scratch_len()]);
            match self.cols {
                1 => {}
                // the 2-point DFT is its own inverse up to scaling
                2 => {
                    let (a, b) = buf.split_at_mut(self.rows);
                    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
                        (*x, *y) = (*x + *y, *x - *y);
                    }
                }
                _ => {
                    let t = &mut t[..buf.len()];
                    for c in 0..self.cols {
                        for r in 0..self.rows {
                            t[r * self.cols + c] = buf[r + self.rows * c];
                        }
                    }
                    along_cols.process_with_scratch(t, &mut fft_scratch[..along_cols.get_inplace_scratch_len()]);
                    for c in 0..self.cols {
                        for r in 0..self.rows {
                            buf[r + self.rows * c] = t[r * self.cols + c];
                        }
                    }
                }
            }
        });
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.run(buf, &self.fwd_rows, &self.fwd_cols);
    }

    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.run(buf, &self.inv_rows, &self.inv_cols);
    }

    pub fn forward_unitary(&self, buf: &mut [Complex64]) {
        self.forward(buf);
        let s = 1.0 / (self.len() as f64).sqrt();
        buf.iter_mut().for_each(|z| *z *= s);
    }

    pub fn inverse_unitary(&self, buf: &mut [Complex64]) {
        self.inverse(buf);
        let s = 1.0 / (self.len() as f64).sqrt();
        buf.iter_mut().for_each(|z| *z *= s);
    }
}

impl fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fft2")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::kron;
    use crate::numerics::sampling::complex_gaussian_vec;
    use crate::numerics::SimRng;
    use rand::SeedableRng;

    #[test]
    fn dft_is_unitary_up_to_64() {
        for n in 1..=64 {
            let f = DftMatrix::new(n).matrix();
            let err = f.matmul(&f.adjoint()).sub(&CMatrix::identity(n)).frobenius_norm();
            assert!(err < 1e-10, "n={n}: {err:e}");
        }
    }

    #[test]
    fn unitary_fft2_matches_kron_of_dft_matrices() {
        let mut rng = SimRng::seed_from_u64(21);
        for (s, u) in [(1, 1), (4, 1), (1, 3), (3, 2), (4, 4), (5, 3)] {
            let q = kron(&DftMatrix::new(u).matrix(), &DftMatrix::new(s).matrix());
            let v = complex_gaussian_vec(&mut rng, s * u);
            let expected = q.matvec(&v);
            let fft = Fft2::new(s, u);
            let mut got = v.clone();
            fft.forward_unitary(&mut got);
            for (g, e) in got.iter().zip(&expected) {
                assert!((g - e).norm() < 1e-12);
            }
            fft.inverse_unitary(&mut got);
            for (g, e) in got.iter().zip(&v) {
                assert!((g - e).norm() < 1e-12);
            }
        }
    }
}
