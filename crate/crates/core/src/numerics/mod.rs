//! Complex linear-algebra substrate shared by every estimator.

mod cmatrix;
mod conv;
mod dft;
mod linalg;
pub mod sampling;

pub use cmatrix::{kron, toeplitz_from_first_column, CMatrix};
pub use conv::{fft2_circ_conv, flip2, CircConv2d};
pub use dft::{DftMatrix, Fft2};
pub use linalg::{cholesky, hermitian_eigen, hermitian_solve, inverse, log_det_real, pseudo_inverse, solve, Lu};
pub use sampling::{chol_sample, complex_gaussian, complex_gaussian_vec, PsdFactor};

pub use num_complex::Complex64;

/// Seedable generator used throughout; callers own and pass it explicitly.
pub type SimRng = rand_chacha::ChaCha8Rng;

pub fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// `aᴴ b`
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Softmax with max-subtraction.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // below this the exponential is subnormal, which is slow and negligible
    const FLOOR: f64 = -708.0;
    let exps: Vec<f64> = scores
        .iter()
        .map(|s| if s - max < FLOOR { 0.0 } else { (s - max).exp() })
        .collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Deterministic child seed from a base seed and a path of indices
/// (splitmix64 finalizer applied per step). Used to split RNG streams so that
/// parallel execution does not change results.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    path.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ_by_path() {
        let a = derive_seed(1, &[0, 0]);
        assert_eq!(a, derive_seed(1, &[0, 0]));
        assert_ne!(a, derive_seed(1, &[0, 1]));
        assert_ne!(a, derive_seed(1, &[1, 0]));
        assert_ne!(a, derive_seed(2, &[0, 0]));
        assert_ne!(derive_seed(1, &[]), derive_seed(1, &[0]));
    }

    #[test]
    fn softmax_is_stable() {
        let p = softmax(&[1000.0, 1000.0, -1e9]);
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15 && p[2] == 0.0);
    }
}
