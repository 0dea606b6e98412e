//! Fast estimator: the gridded estimator under circulant structure and
//! orthogonal pilots, reduced to two circular convolutions and a softmax.

use num_complex::Complex64;

use crate::channel::{build_covariance, Delta};
use crate::error::{ensure_len, Error, Result};
use crate::numerics::{flip2, softmax, CircConv2d};
use crate::pilots::{PilotSet, QTransform};
use crate::structure::{apply_diagonal_filter, fe_input_chat};

/// `w0` (transform-domain filter of the reference grid point) and the common
/// bias `b0`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeParams {
    pub s: usize,
    pub u: usize,
    pub w0: Vec<f64>,
    pub b0: f64,
}

impl FeParams {
    pub fn new(s: usize, u: usize, w0: Vec<f64>, b0: f64) -> Result<Self> {
        ensure_len("FeParams w0", s * u, w0.len())?;
        if w0.iter().any(|v| !v.is_finite()) || !b0.is_finite() {
            return Err(Error::NonFinite("FeParams"));
        }
        Ok(Self { s, u, w0, b0 })
    }

    /// Parameters from the circulant surrogate of a reference covariance
    /// spectrum `d`: `w0[k] = d[k] / (g d[k] + σ²)` with `g = N/U`, and
    /// `b0 = Σ_k log(1 − g w0[k])`.
    pub fn from_spectrum(d: &[f64], pilots: &PilotSet, sigma2: f64) -> Result<Self> {
        if !pilots.is_orthogonal() {
            return Err(Error::NonOrthogonalPilots);
        }
        if !(sigma2 > 0.0) {
            return Err(Error::InvalidArgument("noise variance must be positive".into()));
        }
        let g = pilots.gain();
        let w0: Vec<f64> = d.iter().map(|&dk| dk.max(0.0) / (g * dk.max(0.0) + sigma2)).collect();
        let b0 = d.iter().map(|&dk| (sigma2 / (g * dk.max(0.0) + sigma2)).ln()).sum();
        Self::new(pilots.s(), pilots.u(), w0, b0)
    }

    /// Broadside single-cluster reference at the given spreads (radians).
    pub fn broadside(pilots: &PilotSet, spread_tx: f64, spread_rx: f64, sigma2: f64) -> Result<Self> {
        let cov = build_covariance(&Delta::single(0.0, 0.0, spread_tx, spread_rx), pilots.s(), pilots.u())?;
        Self::from_spectrum(&cov.circulant_spectrum(), pilots, sigma2)
    }
}

/// Precomputed kernels for repeated fast estimation.
#[derive(Clone, Debug)]
pub struct FastEstimator {
    params: FeParams,
    conv: CircConv2d,
    w0_spec: Vec<Complex64>,
    flipped_spec: Vec<Complex64>,
}

impl FastEstimator {
    pub fn new(params: FeParams) -> Self {
        let conv = CircConv2d::new(params.s, params.u);
        let w0_spec = conv.spectrum(&params.w0);
        let flipped_spec = conv.spectrum(&flip2(&params.w0, params.s, params.u));
        Self { params, conv, w0_spec, flipped_spec }
    }

    pub fn params(&self) -> &FeParams {
        &self.params
    }

    /// Transform-domain filter `w0 ⋆ softmax(flip(w0) ⋆ ĉ + b0)`.
    pub fn filter(&self, chat: &[f64]) -> Result<Vec<f64>> {
        ensure_len("FE input", self.conv.len(), chat.len())?;
        let scores: Vec<f64> = self
            .conv
            .apply_spectrum(&self.flipped_spec, chat)
            .into_iter()
            .map(|z| z + self.params.b0)
            .collect();
        Ok(self.conv.apply_spectrum(&self.w0_spec, &softmax(&scores)))
    }

    pub fn estimate(&self, y: &[Complex64], pilots: &PilotSet, qt: &QTransform, sigma2: f64) -> Result<Vec<Complex64>> {
        let chat = fe_input_chat(y, pilots, qt, sigma2)?;
        apply_diagonal_filter(&self.filter(&chat)?, y, pilots, qt)
    }
}

pub fn fe_estimate(y: &[Complex64], fe: &FeParams, pilots: &PilotSet, qt: &QTransform, sigma2: f64) -> Result<Vec<Complex64>> {
    FastEstimator::new(fe.clone()).estimate(y, pilots, qt, sigma2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{ge_estimate, GridFilters};
    use crate::numerics::{complex_gaussian_vec, CMatrix, SimRng};
    use rand::{Rng, SeedableRng};

    fn rel(a: &[Complex64], b: &[Complex64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
        let den: f64 = b.iter().map(|y| y.norm_sqr()).sum::<f64>().sqrt();
        num / den.max(1e-300)
    }

    #[test]
    fn identity_kernel_gives_softmax_filter() {
        let mut rng = SimRng::seed_from_u64(1);
        let (s, u) = (4, 2);
        let pilots = PilotSet::dft(s, u, 2).unwrap();
        let qt = QTransform::new(s, u);
        let mut e0 = vec![0.0; s * u];
        e0[0] = 1.0;
        let fe = FeParams::new(s, u, e0, 0.0).unwrap();
        let y = complex_gaussian_vec(&mut rng, s * 2);
        let chat = fe_input_chat(&y, &pilots, &qt, 0.5).unwrap();
        let w = softmax(&chat);
        let want = apply_diagonal_filter(&w, &y, &pilots, &qt).unwrap();
        let got = fe_estimate(&y, &fe, &pilots, &qt, 0.5).unwrap();
        assert!(rel(&got, &want) < 1e-12);
    }

    #[test]
    fn equals_ge_on_shift_family() {
        let mut rng = SimRng::seed_from_u64(2);
        for (s, u, n) in [(2, 2, 2), (4, 2, 4), (3, 1, 1), (8, 2, 2)] {
            let pilots = PilotSet::dft(s, u, n).unwrap();
            let qt = QTransform::new(s, u);
            let w0: Vec<f64> = (0..s * u).map(|_| rng.random_range(0.0..1.0)).collect();
            let b0 = rng.random_range(-3.0..0.0);
            let sigma2 = 0.6;
            let grid = GridFilters::circulant_shift_family(&w0, b0, s, u, sigma2).unwrap();
            let fe = FeParams::new(s, u, w0, b0).unwrap();
            for _ in 0..3 {
                let y = complex_gaussian_vec(&mut rng, s * n);
                let a = fe_estimate(&y, &fe, &pilots, &qt, sigma2).unwrap();
                let b = ge_estimate(&y, &grid, &pilots, &qt, sigma2).unwrap();
                assert!(rel(&a, &b) < 1e-10);
            }
        }
    }

    #[test]
    fn reference_params_match_structured_grid_point() {
        let pilots = PilotSet::dft(8, 2, 2).unwrap();
        let d: Vec<f64> = (0..16).map(|k| 0.1 + k as f64 * 0.2).collect();
        let fe = FeParams::from_spectrum(&d, &pilots, 0.3).unwrap();
        let grid = GridFilters::structured_from_spectra(&[d], &pilots, 0.3).unwrap();
        assert!((grid.biases()[0] - fe.b0).abs() < 1e-10);
        if let crate::estimators::FilterBank::Structured(f) = grid.bank() {
            let diag = f[0].block_diagonal();
            assert!(diag.iter().zip(&fe.w0).all(|(a, b)| (a.re - b).abs() < 1e-12 && a.im.abs() < 1e-12));
        }
    }

    #[test]
    fn simo_reduction() {
        // U = N = 1: Fᴴ diag(w0 ⋆ softmax(flip(w0) ⋆ σ⁻²|F y|² + b)) F y
        let mut rng = SimRng::seed_from_u64(3);
        let s = 8;
        let pilots = PilotSet::dft(s, 1, 1).unwrap();
        let qt = QTransform::new(s, 1);
        let fe = FeParams::broadside(&pilots, 0.6, 0.2, 0.5).unwrap();
        let y = complex_gaussian_vec(&mut rng, s);
        let f = crate::numerics::DftMatrix::new(s).matrix();
        let fy = f.matvec(&y);
        let chat: Vec<f64> = fy.iter().map(|z| z.norm_sqr() / 0.5).collect();
        // circular correlation with w0, written out directly
        let scores: Vec<f64> = (0..s)
            .map(|i| (0..s).map(|k| fe.w0[(k + s - i) % s] * chat[k]).sum::<f64>() + fe.b0)
            .collect();
        let p = softmax(&scores);
        let w: Vec<f64> = (0..s).map(|k| (0..s).map(|i| fe.w0[(k + s - i) % s] * p[i]).sum()).collect();
        let want = f
            .adjoint()
            .matmul(&CMatrix::from_diag(&w.iter().map(|&v| Complex64::new(v, 0.0)).collect::<Vec<_>>()))
            .matvec(&fy);
        let got = fe_estimate(&y, &fe, &pilots, &qt, 0.5).unwrap();
        assert!(rel(&got, &want) < 1e-10);
    }

    #[test]
    fn rejects_non_orthogonal_pilots() {
        let mut rng = SimRng::seed_from_u64(4);
        let xs = CMatrix::new(2, 2, complex_gaussian_vec(&mut rng, 4)).unwrap();
        let pilots = PilotSet::from_matrix(2, xs).unwrap();
        assert!(matches!(FeParams::from_spectrum(&[1.0; 4], &pilots, 1.0), Err(Error::NonOrthogonalPilots)));
        let fe = FeParams::new(2, 2, vec![0.5; 4], -1.0).unwrap();
        let y = complex_gaussian_vec(&mut rng, 4);
        assert!(fe_estimate(&y, &fe, &pilots, &QTransform::new(2, 2), 1.0).is_err());
    }
}
