use num_complex::Complex64;

use crate::error::{ensure_len, Result};
use crate::numerics::{pseudo_inverse, CMatrix};
use crate::pilots::PilotSet;

/// Minimum-norm least-squares solution and whether `X` lacked full column rank.
#[derive(Clone, Debug)]
pub struct LsEstimate {
    pub h: Vec<Complex64>,
    pub rank_deficient: bool,
}

/// Reusable LS solver: `Ĥ = Y pinv(X′)`, which equals `pinv(X) y` for
/// `X = X′ᵀ ⊗ I_S`.
#[derive(Clone, Debug)]
pub struct LsSolver {
    s: usize,
    pinv: CMatrix,
    rank_deficient: bool,
}

impl LsSolver {
    pub fn new(pilots: &PilotSet) -> Result<Self> {
        let (pinv, rank) = pseudo_inverse(pilots.x_small())?;
        Ok(Self {
            s: pilots.s(),
            pinv,
            rank_deficient: rank < pilots.u(),
        })
    }

    pub fn rank_deficient(&self) -> bool {
        self.rank_deficient
    }

    pub fn estimate(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        let (s, n, u) = (self.s, self.pinv.rows(), self.pinv.cols());
        ensure_len("ls_estimate observation", s * n, y.len())?;
        let mut h = vec![Complex64::new(0.0, 0.0); s * u];
        for k in 0..u {
            let dst = &mut h[k * s..(k + 1) * s];
            for col in 0..n {
                let p = self.pinv[(col, k)];
                for (o, v) in dst.iter_mut().zip(&y[col * s..(col + 1) * s]) {
                    *o += v * p;
                }
            }
        }
        Ok(h)
    }
}

pub fn ls_estimate(y: &[Complex64], pilots: &PilotSet) -> Result<LsEstimate> {
    let solver = LsSolver::new(pilots)?;
    Ok(LsEstimate {
        h: solver.estimate(y)?,
        rank_deficient: solver.rank_deficient(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{complex_gaussian_vec, SimRng};
    use rand::SeedableRng;

    #[test]
    fn noiseless_exact_recovery() {
        let mut rng = SimRng::seed_from_u64(1);
        for (u, n) in [(1, 1), (2, 2), (2, 4), (4, 8)] {
            let p = PilotSet::dft(5, u, n).unwrap();
            let h = complex_gaussian_vec(&mut rng, 5 * u);
            let est = ls_estimate(&p.apply_x(&h).unwrap(), &p).unwrap();
            assert!(!est.rank_deficient);
            assert!(est.h.iter().zip(&h).all(|(a, b)| (a - b).norm() < 1e-10));
        }
    }

    #[test]
    fn orthogonal_closed_form() {
        let mut rng = SimRng::seed_from_u64(2);
        let p = PilotSet::dft(3, 2, 4).unwrap();
        let y = complex_gaussian_vec(&mut rng, 12);
        let est = ls_estimate(&y, &p).unwrap();
        let xhy = p.apply_xh(&y).unwrap();
        assert!(est.h.iter().zip(&xhy).all(|(a, b)| (a - b * 0.5).norm() < 1e-12));
    }

    #[test]
    fn residual_is_orthogonal_to_range() {
        let mut rng = SimRng::seed_from_u64(3);
        let xs = CMatrix::new(2, 5, complex_gaussian_vec(&mut rng, 10)).unwrap();
        let p = PilotSet::from_matrix(3, xs).unwrap();
        let y = complex_gaussian_vec(&mut rng, 15);
        let est = ls_estimate(&y, &p).unwrap();
        let r: Vec<Complex64> = y.iter().zip(p.apply_x(&est.h).unwrap()).map(|(a, b)| a - b).collect();
        assert!(p.apply_xh(&r).unwrap().iter().all(|z| z.norm() < 1e-9));
    }

    #[test]
    fn rank_deficient_flagged() {
        let mut rng = SimRng::seed_from_u64(4);
        // U > N cannot have full column rank
        let xs = CMatrix::new(3, 2, complex_gaussian_vec(&mut rng, 6)).unwrap();
        let p = PilotSet::from_matrix(2, xs).unwrap();
        let h = complex_gaussian_vec(&mut rng, 6);
        let y = p.apply_x(&h).unwrap();
        let est = ls_estimate(&y, &p).unwrap();
        assert!(est.rank_deficient);
        // minimum-norm solution still fits noiseless data
        let fit = p.apply_x(&est.h).unwrap();
        assert!(fit.iter().zip(&y).all(|(a, b)| (a - b).norm() < 1e-9));
        let norm = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>();
        assert!(norm(&est.h) <= norm(&h) + 1e-9);
    }
}
