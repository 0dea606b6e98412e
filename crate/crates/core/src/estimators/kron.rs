use num_complex::Complex64;

use crate::error::{ensure_len, Error, Result};
use crate::numerics::{hermitian_eigen, CMatrix};
use crate::pilots::PilotSet;

/// Conditional MMSE filter `W = C Xᴴ (X C Xᴴ + σ² I)⁻¹` for `C = C_tx ⊗ C_rx`
/// in factored form.
///
/// With `B = X′ᵀ C_tx conj(X′) = V_B Λ_B V_Bᴴ` and `C_rx = V_R Λ_R V_Rᴴ` the
/// observation covariance is `B ⊗ C_rx + σ² I`, diagonalized by `V_B ⊗ V_R`.
/// Applying `W` then costs `O(S²N + SN² + SNU)`.
#[derive(Clone, Debug)]
pub struct KronFilter {
    s: usize,
    n: usize,
    /// `C_rx V_R`
    left: CMatrix,
    /// `C_tx conj(X′) V_B`
    right: CMatrix,
    vr_h: CMatrix,
    vb_conj: CMatrix,
    /// `1 / (λ_R[j] λ_B[i] + σ²)` at `j + S*i`
    inv: Vec<f64>,
    log_det: f64,
}

/// Eigen-decomposition of one Kronecker side, clamped to be non-negative.
#[derive(Clone, Debug)]
pub struct SideEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl SideEigen {
    pub fn new(m: &CMatrix) -> Result<Self> {
        let (values, vectors) = hermitian_eigen(m)?;
        Ok(Self {
            values: values.into_iter().map(|v| v.max(0.0)).collect(),
            vectors,
        })
    }
}

/// `B = X′ᵀ C_tx conj(X′)`.
pub(crate) fn pilot_side(cov_tx: &CMatrix, pilots: &PilotSet) -> CMatrix {
    let xs = pilots.x_small();
    let b = xs.transpose().matmul(cov_tx).matmul(&xs.conj());
    // symmetrize against rounding before the eigen-solver
    b.add(&b.adjoint()).scale(Complex64::new(0.5, 0.0))
}

impl KronFilter {
    pub fn new(cov_tx: &CMatrix, cov_rx: &CMatrix, pilots: &PilotSet, sigma2: f64) -> Result<Self> {
        let rx = SideEigen::new(cov_rx)?;
        let tx = SideEigen::new(&pilot_side(cov_tx, pilots))?;
        Self::from_parts(cov_tx, cov_rx, &tx, &rx, pilots, sigma2)
    }

    /// Builds from precomputed eigen-decompositions of `B` (`tx`) and `C_rx`
    /// (`rx`), so grids can share them across points.
    pub fn from_parts(
        cov_tx: &CMatrix,
        cov_rx: &CMatrix,
        tx: &SideEigen,
        rx: &SideEigen,
        pilots: &PilotSet,
        sigma2: f64,
    ) -> Result<Self> {
        if !(sigma2 > 0.0) {
            return Err(Error::InvalidArgument("noise variance must be positive".into()));
        }
        let (s, n) = (pilots.s(), pilots.n());
        ensure_len("KronFilter rx side", s, cov_rx.rows())?;
        ensure_len("KronFilter tx side", pilots.u(), cov_tx.rows())?;
        ensure_len("KronFilter pilot eigenbasis", n, tx.values.len())?;
        let mut inv = Vec::with_capacity(s * n);
        let mut log_det = 0.0;
        for &lb in &tx.values {
            for &lr in &rx.values {
                let v = lr * lb + sigma2;
                inv.push(1.0 / v);
                // log|I − XW| = log|σ² C_y⁻¹|
                log_det -= (v / sigma2).ln();
            }
        }
        Ok(Self {
            s,
            n,
            left: cov_rx.matmul(&rx.vectors),
            right: cov_tx.matmul(&pilots.x_small().conj()).matmul(&tx.vectors),
            vr_h: rx.vectors.adjoint(),
            vb_conj: tx.vectors.conj(),
            inv,
            log_det,
        })
    }

    /// `log|I − X W|`, real by construction.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn apply(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        let (s, n) = (self.s, self.n);
        ensure_len("KronFilter::apply", s * n, y.len())?;
        let ymat = CMatrix::from_fn(s, n, |r, c| y[r + s * c]);
        let mut z = self.vr_h.matmul(&ymat).matmul(&self.vb_conj);
        for c in 0..n {
            for r in 0..s {
                z[(r, c)] *= self.inv[r + s * c];
            }
        }
        let out = self.left.matmul(&z).matmul(&self.right.transpose());
        let u = out.cols();
        Ok((0..u).flat_map(|c| (0..s).map(move |r| (r, c))).map(|(r, c)| out[(r, c)]).collect())
    }

    /// Dense `SU x SN` filter matrix.
    pub fn dense(&self) -> CMatrix {
        let (s, n) = (self.s, self.n);
        let u = self.right.rows();
        let mut w = CMatrix::zeros(s * u, s * n);
        for i in 0..n {
            // T_i = left · diag(inv[:, i]) · V_Rᴴ
            let scaled = CMatrix::from_fn(s, s, |r, j| self.left[(r, j)] * self.inv[j + s * i]);
            let t = scaled.matmul(&self.vr_h);
            for uu in 0..u {
                for nn in 0..n {
                    let coef = self.right[(uu, i)] * self.vb_conj[(nn, i)];
                    for r in 0..s {
                        for c in 0..s {
                            w[(uu * s + r, nn * s + c)] += coef * t[(r, c)];
                        }
                    }
                }
            }
        }
        w
    }
}
