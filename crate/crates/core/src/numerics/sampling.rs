use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{hermitian_eigen, CMatrix};
use crate::error::{Error, Result};

/// Relative eigenvalue floor below which covariance directions are dropped.
pub const PSD_FLOOR: f64 = 1e-12;

/// Tolerance for accepting a covariance as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Standard circularly-symmetric complex Gaussian, unit variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn complex_gaussian_vec<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<Complex64> {
    (0..n).map(|_| complex_gaussian(rng)).collect()
}

/// Square-root factor `L` (n x r) of a Hermitian PSD matrix with `L Lᴴ = cov`
/// after flooring tiny eigenvalues.
#[derive(Clone, Debug)]
pub struct PsdFactor {
    factor: CMatrix,
}

impl PsdFactor {
    pub fn new(cov: &CMatrix) -> Result<Self> {
        if !cov.is_square() {
            return Err(Error::dim("PsdFactor: covariance must be square", cov.rows(), cov.cols()));
        }
        let dev = cov.hermitian_deviation();
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let n = cov.rows();
        let (values, vectors) = hermitian_eigen(cov)?;
        let max = values.iter().cloned().fold(0.0, f64::max);
        let kept: Vec<usize> = (0..n).filter(|&i| max > 0.0 && values[i] > PSD_FLOOR * max).collect();
        let factor = CMatrix::from_fn(n, kept.len(), |r, c| {
            let k = kept[c];
            vectors[(r, k)] * values[k].sqrt()
        });
        Ok(Self { factor })
    }

    pub fn dim(&self) -> usize {
        self.factor.rows()
    }

    pub fn rank(&self) -> usize {
        self.factor.cols()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.factor
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Complex64> {
        let g = complex_gaussian_vec(rng, self.rank());
        if g.is_empty() {
            return vec![Complex64::new(0.0, 0.0); self.dim()];
        }
        self.factor.matvec(&g)
    }
}

/// Draws one sample from `N_C(0, cov)`.
pub fn chol_sample<R: Rng + ?Sized>(cov: &CMatrix, rng: &mut R) -> Result<Vec<Complex64>> {
    Ok(PsdFactor::new(cov)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SimRng;
    use rand::SeedableRng;

    #[test]
    fn zero_covariance_gives_zero() {
        let mut rng = SimRng::seed_from_u64(1);
        let x = chol_sample(&CMatrix::zeros(3, 3), &mut rng).unwrap();
        assert!(x.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn rejects_non_hermitian_and_non_square() {
        let mut rng = SimRng::seed_from_u64(1);
        let mut m = CMatrix::identity(2);
        m[(0, 1)] = Complex64::new(0.5, 0.0);
        assert!(matches!(chol_sample(&m, &mut rng), Err(Error::NotHermitian(_))));
        assert!(chol_sample(&CMatrix::zeros(2, 3), &mut rng).is_err());
    }

    #[test]
    fn identity_covariance_unit_variance() {
        let mut rng = SimRng::seed_from_u64(2);
        let n = 4;
        let draws = 100_000;
        let f = PsdFactor::new(&CMatrix::identity(n)).unwrap();
        let mut acc = vec![0.0; n];
        for _ in 0..draws {
            for (a, z) in acc.iter_mut().zip(f.sample(&mut rng)) {
                *a += z.norm_sqr();
            }
        }
        for a in acc {
            let var = a / draws as f64;
            assert!((var - 1.0).abs() < 0.05, "variance {var}");
        }
    }

    #[test]
    fn rank_one_samples_are_parallel() {
        let mut rng = SimRng::seed_from_u64(3);
        let a = complex_gaussian_vec(&mut rng, 5);
        let col = CMatrix::column(&a);
        let cov = col.matmul(&col.adjoint());
        let f = PsdFactor::new(&cov).unwrap();
        assert_eq!(f.rank(), 1);
        let norm_a: f64 = a.iter().map(|z| z.norm_sqr()).sum();
        for _ in 0..20 {
            let x = f.sample(&mut rng);
            let inner: Complex64 = x.iter().zip(&a).map(|(p, q)| p.conj() * q).sum();
            let norm_x: f64 = x.iter().map(|z| z.norm_sqr()).sum();
            let cos2 = inner.norm_sqr() / (norm_x * norm_a);
            assert!((cos2 - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn same_seed_same_draws() {
        let cov = CMatrix::identity(3);
        let a = chol_sample(&cov, &mut SimRng::seed_from_u64(9)).unwrap();
        let b = chol_sample(&cov, &mut SimRng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }
}
