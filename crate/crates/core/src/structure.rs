//! Block-diagonal ("diablk") operators and the transform-domain inputs of
//! the gridded and fast estimators.
//!
//! A `DiablkVector` stores a `U x U` grid of `S x S` diagonal blocks. Block
//! `(i, j)` occupies `data[(i*U + j)*S .. (i*U + j + 1)*S]`, so entry
//! `data[(i*U + j)*S + s]` sits at matrix position `(i*S + s, j*S + s)`.

use num_complex::Complex64;
use rand::SeedableRng;

use crate::error::{ensure_len, Error, Result};
use crate::numerics::{complex_gaussian_vec, CMatrix, CircConv2d, SimRng};
use crate::pilots::{PilotSet, QTransform};

#[derive(Clone, Debug, PartialEq)]
pub struct DiablkVector {
    s: usize,
    u: usize,
    data: Vec<Complex64>,
}

impl DiablkVector {
    pub fn new(s: usize, u: usize, data: Vec<Complex64>) -> Result<Self> {
        ensure_len("DiablkVector data", s * u * u, data.len())?;
        Ok(Self { s, u, data })
    }

    pub fn zeros(s: usize, u: usize) -> Self {
        Self {
            s,
            u,
            data: vec![Complex64::new(0.0, 0.0); s * u * u],
        }
    }

    /// Only the `(k, k)` blocks populated, with `diag` (length `S*U`) in
    /// `vec` order.
    pub fn from_block_diagonal(s: usize, u: usize, diag: &[Complex64]) -> Result<Self> {
        ensure_len("DiablkVector::from_block_diagonal", s * u, diag.len())?;
        let mut v = Self::zeros(s, u);
        for k in 0..u {
            v.block_mut(k, k).copy_from_slice(&diag[k * s..(k + 1) * s]);
        }
        Ok(v)
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn u(&self) -> usize {
        self.u
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn block(&self, i: usize, j: usize) -> &[Complex64] {
        let off = (i * self.u + j) * self.s;
        &self.data[off..off + self.s]
    }

    pub fn block_mut(&mut self, i: usize, j: usize) -> &mut [Complex64] {
        let off = (i * self.u + j) * self.s;
        &mut self.data[off..off + self.s]
    }

    /// Entries of the `(k, k)` blocks in `vec` order.
    pub fn block_diagonal(&self) -> Vec<Complex64> {
        (0..self.u).flat_map(|k| self.block(k, k).to_vec()).collect()
    }

    /// `diablk(w) · v` in `O(SU²)`.
    pub fn apply(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        let (s, u) = (self.s, self.u);
        ensure_len("DiablkVector::apply", s * u, v.len())?;
        let mut out = vec![Complex64::new(0.0, 0.0); s * u];
        for i in 0..u {
            let dst = &mut out[i * s..(i + 1) * s];
            for j in 0..u {
                for ((o, w), x) in dst.iter_mut().zip(self.block(i, j)).zip(&v[j * s..(j + 1) * s]) {
                    *o += w * x;
                }
            }
        }
        Ok(out)
    }

    /// `Σ_k w_k · conj(c_k)`, which equals `tr(diablk(w) diablk(c)ᴴ)`.
    pub fn inner_conj(&self, c: &DiablkVector) -> Result<Complex64> {
        ensure_len("DiablkVector::inner_conj", self.data.len(), c.data.len())?;
        Ok(self.data.iter().zip(&c.data).map(|(w, x)| w * x.conj()).sum())
    }
}

pub fn diablk_expand(v: &DiablkVector) -> CMatrix {
    let (s, u) = (v.s, v.u);
    let mut m = CMatrix::zeros(s * u, s * u);
    for i in 0..u {
        for j in 0..u {
            for (k, &x) in v.block(i, j).iter().enumerate() {
                m[(i * s + k, j * s + k)] = x;
            }
        }
    }
    m
}

pub fn diablk_extract(m: &CMatrix, s: usize, u: usize) -> Result<DiablkVector> {
    ensure_len("diablk_extract rows", s * u, m.rows())?;
    ensure_len("diablk_extract cols", s * u, m.cols())?;
    let mut v = DiablkVector::zeros(s, u);
    for i in 0..u {
        for j in 0..u {
            for (k, x) in v.block_mut(i, j).iter_mut().enumerate() {
                *x = m[(i * s + k, j * s + k)];
            }
        }
    }
    Ok(v)
}

fn check_shapes(pilots: &PilotSet, qt: &QTransform) -> Result<()> {
    ensure_len("transform rows (S)", pilots.s(), qt.s())?;
    ensure_len("transform cols (U)", pilots.u(), qt.u())
}

/// `u = Q Xᴴ y`.
pub fn transformed_observation(y: &[Complex64], pilots: &PilotSet, qt: &QTransform) -> Result<Vec<Complex64>> {
    check_shapes(pilots, qt)?;
    let mut u = pilots.apply_xh(y)?;
    qt.forward_in_place(&mut u);
    Ok(u)
}

/// `Qᴴ diablk(w) Q Xᴴ y`, never materializing a matrix.
pub fn apply_structured_filter(
    w: &DiablkVector,
    y: &[Complex64],
    pilots: &PilotSet,
    qt: &QTransform,
) -> Result<Vec<Complex64>> {
    if w.s() != pilots.s() || w.u() != pilots.u() {
        return Err(Error::InvalidArgument("filter and pilot dimensions differ".into()));
    }
    let u = transformed_observation(y, pilots, qt)?;
    let mut out = w.apply(&u)?;
    qt.adjoint_in_place(&mut out);
    Ok(out)
}

/// `Qᴴ diag(w) Q Xᴴ y` for a transform-domain diagonal filter.
pub fn apply_diagonal_filter(
    w: &[f64],
    y: &[Complex64],
    pilots: &PilotSet,
    qt: &QTransform,
) -> Result<Vec<Complex64>> {
    let mut u = transformed_observation(y, pilots, qt)?;
    ensure_len("diagonal filter", u.len(), w.len())?;
    for (x, &g) in u.iter_mut().zip(w) {
        *x *= g;
    }
    qt.adjoint_in_place(&mut u);
    Ok(u)
}

/// Block diagonals of `σ⁻² u uᴴ` with `u = Q Xᴴ y`.
pub fn ge_input_cbar(y: &[Complex64], pilots: &PilotSet, qt: &QTransform, sigma2: f64) -> Result<DiablkVector> {
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidArgument("noise variance must be positive".into()));
    }
    let u = transformed_observation(y, pilots, qt)?;
    Ok(cbar_from_transformed(&u, pilots.s(), pilots.u(), sigma2))
}

pub(crate) fn cbar_from_transformed(u: &[Complex64], s: usize, nu: usize, sigma2: f64) -> DiablkVector {
    let inv = 1.0 / sigma2;
    let mut out = DiablkVector::zeros(s, nu);
    for i in 0..nu {
        for j in 0..nu {
            let (ui, uj) = (&u[i * s..(i + 1) * s], &u[j * s..(j + 1) * s]);
            for ((o, a), b) in out.block_mut(i, j).iter_mut().zip(ui).zip(uj) {
                *o = a * b.conj() * inv;
            }
        }
    }
    out
}

/// `ĉ = σ⁻² |Q Xᴴ y|²`; defined for orthogonal pilots only.
pub fn fe_input_chat(y: &[Complex64], pilots: &PilotSet, qt: &QTransform, sigma2: f64) -> Result<Vec<f64>> {
    if !pilots.is_orthogonal() {
        return Err(Error::NonOrthogonalPilots);
    }
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidArgument("noise variance must be positive".into()));
    }
    let u = transformed_observation(y, pilots, qt)?;
    Ok(u.iter().map(|z| z.norm_sqr() / sigma2).collect())
}

/// Dense block-circulant `A` with `A x = w0 ⋆ x`.
///
/// With the unitary `Q`, `A = Qᴴ diag(√(SU) · Q w0) Q`: the eigenvalues are the
/// unnormalized 2D DFT of `w0`.
pub fn circulant_matrix(w0: &[f64], qt: &QTransform) -> Result<CMatrix> {
    ensure_len("circulant_matrix w0", qt.len(), w0.len())?;
    let scale = (qt.len() as f64).sqrt();
    let mut spec: Vec<Complex64> = w0.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    qt.forward_in_place(&mut spec);
    let q = qt.dense();
    let diag = CMatrix::from_diag(&spec.iter().map(|z| z * scale).collect::<Vec<_>>());
    Ok(q.adjoint().matmul(&diag).matmul(&q))
}

/// Materializes `A` and confirms `A x = w0 ⋆ x` on random probes (1e-9
/// relative). Intended for small sizes.
pub fn circulant_factorization_check(w0: &[f64], qt: &QTransform) -> Result<CMatrix> {
    let a = circulant_matrix(w0, qt)?;
    let conv = CircConv2d::from_fft(qt.fft().clone());
    let mut rng = SimRng::seed_from_u64(0x5eed);
    for _ in 0..3 {
        let x: Vec<f64> = complex_gaussian_vec(&mut rng, qt.len()).iter().map(|z| z.re).collect();
        let dense = a.matvec(&x.iter().map(|&v| Complex64::new(v, 0.0)).collect::<Vec<_>>());
        let fast = conv.apply(w0, &x)?;
        let num: f64 = dense.iter().zip(&fast).map(|(d, f)| (d - f).norm_sqr()).sum::<f64>().sqrt();
        let den: f64 = fast.iter().map(|f| f * f).sum::<f64>().sqrt().max(1e-300);
        if num > 1e-9 * den.max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "circulant factorization mismatch: {:e}",
                num / den
            )));
        }
    }
    Ok(a)
}
