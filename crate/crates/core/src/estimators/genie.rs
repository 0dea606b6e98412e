use num_complex::Complex64;

use super::kron::pilot_side;
use super::LOG_DET_PHASE_TOL;
use crate::channel::ChannelCovariance;
use crate::error::{ensure_len, Error, Result};
use crate::numerics::{hermitian_solve, log_det_real, CMatrix, Lu};
use crate::pilots::PilotSet;

fn check_sigma2(sigma2: f64) -> Result<()> {
    if sigma2 > 0.0 && sigma2.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("noise variance must be positive and finite, got {sigma2}")))
    }
}

/// `C_y = X C Xᴴ + σ² I = (X′ᵀ C_tx conj(X′)) ⊗ C_rx + σ² I`.
pub fn observation_covariance(cov: &ChannelCovariance, pilots: &PilotSet, sigma2: f64) -> Result<CMatrix> {
    ensure_len("observation_covariance S", pilots.s(), cov.s())?;
    ensure_len("observation_covariance U", pilots.u(), cov.u())?;
    let cy = pilot_side(&cov.cov_tx, pilots).kron(&cov.cov_rx);
    Ok(cy.add(&CMatrix::identity(cy.rows()).scale(Complex64::new(sigma2, 0.0))))
}

/// `vec(C_rx M C_txᵀ) = (C_tx ⊗ C_rx) vec(M)`.
fn kron_apply(cov: &ChannelCovariance, v: &[Complex64]) -> Vec<Complex64> {
    let (s, u) = (cov.s(), cov.u());
    let m = CMatrix::from_fn(s, u, |r, c| v[r + s * c]);
    let out = cov.cov_rx.matmul(&m).matmul(&cov.cov_tx.transpose());
    (0..u).flat_map(|c| (0..s).map(move |r| (r, c))).map(|(r, c)| out[(r, c)]).collect()
}

/// Conditional MMSE estimate `C Xᴴ (X C Xᴴ + σ² I)⁻¹ y` with known covariance.
pub fn genie_mmse(y: &[Complex64], cov: &ChannelCovariance, pilots: &PilotSet, sigma2: f64) -> Result<Vec<Complex64>> {
    check_sigma2(sigma2)?;
    ensure_len("genie_mmse observation", pilots.s() * pilots.n(), y.len())?;
    let cy = observation_covariance(cov, pilots, sigma2)?;
    let v = hermitian_solve(&cy, y)?;
    Ok(kron_apply(cov, &pilots.apply_xh(&v)?))
}

/// Dense `W = C Xᴴ (X C Xᴴ + σ² I)⁻¹` for an arbitrary covariance together with
/// `log|I − X W|`.
pub fn dense_filter(cov: &CMatrix, pilots: &PilotSet, sigma2: f64) -> Result<(CMatrix, f64)> {
    check_sigma2(sigma2)?;
    let x = pilots.x_lifted();
    ensure_len("dense_filter covariance", x.cols(), cov.rows())?;
    let xc = x.matmul(cov);
    let cy = xc
        .matmul(&x.adjoint())
        .add(&CMatrix::identity(x.rows()).scale(Complex64::new(sigma2, 0.0)));
    // C and C_y are Hermitian, so W = (C_y⁻¹ X C)ᴴ
    let w = Lu::new(&cy)?.solve_mat(&xc).adjoint();
    let b = log_det_real(&CMatrix::identity(x.rows()).sub(&x.matmul(&w)), LOG_DET_PHASE_TOL)?;
    Ok((w, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{build_covariance, sample_delta, Delta, ScenarioConfig};
    use crate::numerics::{complex_gaussian_vec, inverse, norm_sqr, SimRng};
    use rand::{Rng, SeedableRng};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_pilots(rng: &mut SimRng, s: usize, u: usize, n: usize) -> PilotSet {
        PilotSet::from_matrix(s, CMatrix::new(u, n, complex_gaussian_vec(rng, u * n)).unwrap()).unwrap()
    }

    #[test]
    fn huge_noise_gives_prior_mean() {
        let mut rng = SimRng::seed_from_u64(1);
        let cov = build_covariance(&Delta::single(0.2, 0.1, 0.6, 0.1), 8, 2).unwrap();
        let pilots = PilotSet::dft(8, 2, 2).unwrap();
        let h = cov.sampler().unwrap().sample(&mut rng);
        let y = pilots.apply_x(&h).unwrap();
        let est = genie_mmse(&y, &cov, &pilots, 1e12).unwrap();
        assert!(norm_sqr(&est).sqrt() < 1e-4 * norm_sqr(&h).sqrt());
    }

    #[test]
    fn scalar_wiener_filter() {
        let mut rng = SimRng::seed_from_u64(2);
        let s = 5;
        let cval = 2.5;
        let cov = ChannelCovariance::from_factors(CMatrix::identity(1), CMatrix::identity(s).scale(c(cval)));
        let pilots = PilotSet::dft(s, 1, 1).unwrap();
        let y = complex_gaussian_vec(&mut rng, s);
        let sigma2 = 0.7;
        let est = genie_mmse(&y, &cov, &pilots, sigma2).unwrap();
        for (e, v) in est.iter().zip(&y) {
            assert!((e - v * (cval / (cval + sigma2))).norm() < 1e-12);
        }
    }

    #[test]
    fn matches_information_form() {
        // (C⁻¹ + σ⁻² XᴴX)⁻¹ σ⁻² Xᴴ y for invertible C
        let mut rng = SimRng::seed_from_u64(3);
        for (s, u, n) in [(3, 2, 2), (4, 2, 3), (2, 3, 3)] {
            let cov = build_covariance(&Delta::single(0.4, -0.2, 1.0, 1.0), s, u).unwrap();
            let pilots = random_pilots(&mut rng, s, u, n);
            let sigma2 = 0.3;
            let y = complex_gaussian_vec(&mut rng, s * n);
            let x = pilots.x_lifted();
            let info = inverse(&cov.full)
                .unwrap()
                .add(&x.adjoint().matmul(x).scale(c(1.0 / sigma2)));
            let want = inverse(&info).unwrap().matvec(&x.adjoint().matvec(&y));
            let want: Vec<Complex64> = want.iter().map(|z| z / sigma2).collect();
            let got = genie_mmse(&y, &cov, &pilots, sigma2).unwrap();
            let err = got.iter().zip(&want).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
            assert!(err < 1e-8 * norm_sqr(&want).sqrt());
        }
    }

    #[test]
    fn observation_covariance_matches_dense() {
        let mut rng = SimRng::seed_from_u64(4);
        let pilots = random_pilots(&mut rng, 3, 2, 3);
        let cov = build_covariance(&Delta::single(0.1, 0.5, 0.3, 0.4), 3, 2).unwrap();
        let x = pilots.x_lifted();
        let dense = x.matmul(&cov.full).matmul(&x.adjoint()).add(&CMatrix::identity(9).scale(c(0.2)));
        let fast = observation_covariance(&cov, &pilots, 0.2).unwrap();
        assert!(dense.sub(&fast).frobenius_norm() < 1e-12);
    }

    #[test]
    fn likelihood_precision_identity() {
        // C_y⁻¹ = σ⁻² (I − X W)
        let mut rng = SimRng::seed_from_u64(5);
        for _ in 0..20 {
            let s = rng.random_range(1..=6);
            let u = rng.random_range(1..=3);
            let n = rng.random_range(1..=4);
            let cfg = ScenarioConfig { s, u, n, num_clusters: rng.random_range(1..=3), ..Default::default() };
            let cov = build_covariance(&sample_delta(&cfg, &mut rng), s, u).unwrap();
            let pilots = random_pilots(&mut rng, s, u, n);
            let sigma2 = 10f64.powf(rng.random_range(-2.0..1.0));
            let (w, _) = dense_filter(&cov.full, &pilots, sigma2).unwrap();
            let cy_inv = inverse(&observation_covariance(&cov, &pilots, sigma2).unwrap()).unwrap();
            let x = pilots.x_lifted();
            let rhs = CMatrix::identity(s * n).sub(&x.matmul(&w)).scale(c(1.0 / sigma2));
            assert!(cy_inv.sub(&rhs).frobenius_norm() < 1e-8 * cy_inv.frobenius_norm());
        }
    }

    #[test]
    fn rejects_bad_noise() {
        let cov = build_covariance(&Delta::single(0.0, 0.0, 0.5, 0.5), 2, 1).unwrap();
        let p = PilotSet::dft(2, 1, 1).unwrap();
        let y = vec![c(1.0); 2];
        assert!(genie_mmse(&y, &cov, &p, 0.0).is_err());
        assert!(genie_mmse(&y, &cov, &p, f64::NAN).is_err());
        assert!(genie_mmse(&y[..1], &cov, &p, 1.0).is_err());
    }
}
