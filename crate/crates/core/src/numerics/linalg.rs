use num_complex::Complex64;

use super::CMatrix;
use crate::error::{Error, Result};

/// LU factorization with partial pivoting, `P A = L U`.
pub struct Lu {
    lu: CMatrix,
    perm: Vec<usize>,
    swaps: usize,
}

impl Lu {
    pub fn new(a: &CMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::dim("Lu::new", a.rows(), a.cols()));
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut swaps = 0;
        let scale = a.data().iter().map(|z| z.norm()).fold(0.0, f64::max);

        for k in 0..n {
            let (pivot_row, pivot_abs) = (k..n)
                .map(|r| (r, lu[(r, k)].norm()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot_abs <= f64::EPSILON * scale * n as f64 || pivot_abs == 0.0 {
                return Err(Error::Singular);
            }
            if pivot_row != k {
                for c in 0..n {
                    let tmp = lu[(k, c)];
                    lu[(k, c)] = lu[(pivot_row, c)];
                    lu[(pivot_row, c)] = tmp;
                }
                perm.swap(k, pivot_row);
                swaps += 1;
            }
            let pivot = lu[(k, k)];
            for r in k + 1..n {
                let factor = lu[(r, k)] / pivot;
                lu[(r, k)] = factor;
                if factor == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for c in k + 1..n {
                    let delta = factor * lu[(k, c)];
                    lu[(r, c)] -= delta;
                }
            }
        }
        Ok(Self { lu, perm, swaps })
    }

    pub fn dim(&self) -> usize {
        self.lu.rows()
    }

    pub fn solve_vec(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        assert_eq!(b.len(), n, "Lu::solve_vec: length mismatch");
        let mut x: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc / self.lu[(i, i)];
        }
        x
    }

    /// Solves `A X = B` column by column.
    pub fn solve_mat(&self, b: &CMatrix) -> CMatrix {
        assert_eq!(b.rows(), self.dim(), "Lu::solve_mat: row mismatch");
        let mut out = CMatrix::zeros(b.rows(), b.cols());
        let mut col = vec![Complex64::new(0.0, 0.0); b.rows()];
        for c in 0..b.cols() {
            for (r, v) in col.iter_mut().enumerate() {
                *v = b[(r, c)];
            }
            for (r, v) in self.solve_vec(&col).into_iter().enumerate() {
                out[(r, c)] = v;
            }
        }
        out
    }

    /// Complex logarithm of the determinant (principal branch of the phase).
    pub fn log_det(&self) -> Complex64 {
        let mut log_abs = 0.0;
        let mut phase = if self.swaps % 2 == 1 { std::f64::consts::PI } else { 0.0 };
        for i in 0..self.dim() {
            let d = self.lu[(i, i)];
            log_abs += d.norm().ln();
            phase += d.arg();
        }
        let phase = phase.sin().atan2(phase.cos());
        Complex64::new(log_abs, phase)
    }
}

pub fn solve(a: &CMatrix, b: &[Complex64]) -> Result<Vec<Complex64>> {
    Ok(Lu::new(a)?.solve_vec(b))
}

pub fn inverse(a: &CMatrix) -> Result<CMatrix> {
    Ok(Lu::new(a)?.solve_mat(&CMatrix::identity(a.rows())))
}

/// Log-determinant of a matrix whose determinant must be real positive.
/// Fails when the phase exceeds `phase_tol`.
pub fn log_det_real(a: &CMatrix, phase_tol: f64) -> Result<f64> {
    let ld = Lu::new(a)?.log_det();
    if ld.im.abs() > phase_tol {
        return Err(Error::ComplexDeterminant { phase: ld.im });
    }
    Ok(ld.re)
}

/// Lower-triangular Cholesky factor of a Hermitian positive definite matrix.
pub fn cholesky(a: &CMatrix) -> Result<CMatrix> {
    if !a.is_square() {
        return Err(Error::dim("cholesky", a.rows(), a.cols()));
    }
    let n = a.rows();
    let mut l = CMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::Singular);
        }
        let d = d.sqrt();
        l[(j, j)] = Complex64::new(d, 0.0);
        for i in j + 1..n {
            let mut acc = a[(i, j)];
            for k in 0..j {
                acc -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = acc / d;
        }
    }
    Ok(l)
}

/// Solves `A x = b` for Hermitian positive definite `A` via Cholesky.
pub fn hermitian_solve(a: &CMatrix, b: &[Complex64]) -> Result<Vec<Complex64>> {
    let l = cholesky(a)?;
    let n = l.rows();
    if b.len() != n {
        return Err(Error::dim("hermitian_solve", n, b.len()));
    }
    let mut x = b.to_vec();
    for i in 0..n {
        let mut acc = x[i];
        for k in 0..i {
            acc -= l[(i, k)] * x[k];
        }
        x[i] = acc / l[(i, i)].re;
    }
    for i in (0..n).rev() {
        let mut acc = x[i];
        for k in i + 1..n {
            acc -= l[(k, i)].conj() * x[k];
        }
        x[i] = acc / l[(i, i)].re;
    }
    Ok(x)
}

/// Eigen-decomposition of a Hermitian matrix. Eigenvalues ascending, the
/// eigenvectors are the matching columns of the returned matrix.
pub fn hermitian_eigen(a: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    if !a.is_square() {
        return Err(Error::dim("hermitian_eigen", a.rows(), a.cols()));
    }
    let eig = a.to_nalgebra().symmetric_eigen();
    let mut order: Vec<usize> = (0..a.rows()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(a.rows(), a.cols(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// Moore-Penrose pseudo-inverse together with the numerical rank.
pub fn pseudo_inverse(a: &CMatrix) -> Result<(CMatrix, usize)> {
    let m = a.to_nalgebra();
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = smax * (a.rows().max(a.cols()) as f64) * f64::EPSILON;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let pinv = svd
        .pseudo_inverse(tol)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok((CMatrix::from_nalgebra(&pinv), rank))
}
