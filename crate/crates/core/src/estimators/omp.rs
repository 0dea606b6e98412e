//! Orthogonal matching pursuit over an oversampled DFT dictionary with
//! genie-aided choice of the sparsity level.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{ensure_len, Error, Result};
use crate::numerics::{inner, norm_sqr};
use crate::pilots::PilotSet;

pub const OMP_OVERSAMPLING: usize = 4;

/// `D` is `S x (o·S)` with unit-norm columns `D[s, m] = exp(-2πi s m / (oS)) / √S`.
/// The sensing matrix is `Φ = X (I_U ⊗ D) = X′ᵀ ⊗ D`.
#[derive(Clone)]
pub struct OmpDictionary {
    s: usize,
    atoms_per_antenna: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for OmpDictionary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OmpDictionary")
            .field("s", &self.s)
            .field("atoms_per_antenna", &self.atoms_per_antenna)
            .finish()
    }
}

impl OmpDictionary {
    pub fn new(s: usize, oversampling: usize) -> Result<Self> {
        if s == 0 || oversampling == 0 {
            return Err(Error::InvalidArgument("dictionary size must be positive".into()));
        }
        let m = s * oversampling;
        Ok(Self {
            s,
            atoms_per_antenna: m,
            fft: FftPlanner::new().plan_fft_inverse(m),
        })
    }

    pub fn atoms_per_antenna(&self) -> usize {
        self.atoms_per_antenna
    }

    /// `D[s, m]`.
    pub fn entry(&self, s: usize, m: usize) -> Complex64 {
        let phase = -2.0 * PI * ((s * m) % self.atoms_per_antenna) as f64 / self.atoms_per_antenna as f64;
        Complex64::from_polar(1.0 / (self.s as f64).sqrt(), phase)
    }

    /// Channel-domain atom `(e_u ⊗ D[:, m])`, length `S*U`.
    pub fn channel_atom(&self, atom: usize, u: usize) -> Vec<Complex64> {
        let (ant, m) = (atom / self.atoms_per_antenna, atom % self.atoms_per_antenna);
        let mut v = vec![Complex64::new(0.0, 0.0); self.s * u];
        for s in 0..self.s {
            v[ant * self.s + s] = self.entry(s, m);
        }
        v
    }

    /// `Φᴴ r` for all `U·oS` atoms via one zero-padded FFT per antenna.
    fn correlate(&self, r: &[Complex64], pilots: &PilotSet) -> Result<Vec<Complex64>> {
        let z = pilots.apply_xh(r)?;
        let (s, m) = (self.s, self.atoms_per_antenna);
        let scale = 1.0 / (s as f64).sqrt();
        let mut out = Vec::with_capacity(pilots.u() * m);
        for k in 0..pilots.u() {
            let mut buf = vec![Complex64::new(0.0, 0.0); m];
            buf[..s].copy_from_slice(&z[k * s..(k + 1) * s]);
            self.fft.process(&mut buf);
            out.extend(buf.into_iter().map(|v| v * scale));
        }
        Ok(out)
    }
}

/// OMP iterates `ĥ_1, …, ĥ_K`. Each step adds the atom with the largest
/// normalized correlation and refits all coefficients by least squares.
/// When the residual vanishes the last iterate is repeated.
pub fn omp_path(y: &[Complex64], pilots: &PilotSet, dict: &OmpDictionary, k_max: usize) -> Result<Vec<Vec<Complex64>>> {
    if k_max == 0 {
        return Err(Error::InvalidArgument("k_max must be at least 1".into()));
    }
    ensure_len("OMP dictionary size", pilots.s(), dict.s)?;
    ensure_len("OMP observation", pilots.s() * pilots.n(), y.len())?;
    let u = pilots.u();
    let m = dict.atoms_per_antenna;
    let row_norms: Vec<f64> = (0..u).map(|k| norm_sqr(pilots.x_small().row(k)).sqrt()).collect();
    let y_norm = norm_sqr(y).sqrt();

    let mut active: Vec<usize> = Vec::new();
    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    // r_mat[i][j] = ⟨q_i, φ_j⟩ for i ≤ j (upper triangular R of Φ_S = Q R)
    let mut r_cols: Vec<Vec<Complex64>> = Vec::new();
    let mut qy: Vec<Complex64> = Vec::new();
    let mut residual = y.to_vec();
    let mut path = Vec::with_capacity(k_max);

    for _ in 0..k_max {
        if norm_sqr(&residual).sqrt() <= 1e-13 * y_norm.max(1e-300) {
            let last = path.last().cloned().unwrap_or_else(|| vec![Complex64::new(0.0, 0.0); pilots.s() * u]);
            path.push(last);
            continue;
        }
        let corr = dict.correlate(&residual, pilots)?;
        let best = corr
            .iter()
            .enumerate()
            .filter(|(a, _)| !active.contains(a) && row_norms[a / m] > 0.0)
            .map(|(a, c)| (a, c.norm() / row_norms[a / m]))
            .fold(None, |acc: Option<(usize, f64)>, cur| match acc {
                Some(b) if b.1 >= cur.1 => Some(b),
                _ => Some(cur),
            });
        let Some((atom, _)) = best else { break };
        let phi = pilots.apply_x(&dict.channel_atom(atom, u))?;
        let phi_norm = norm_sqr(&phi).sqrt();
        // two passes of modified Gram-Schmidt
        let mut q = phi.clone();
        let mut rcol = vec![Complex64::new(0.0, 0.0); basis.len() + 1];
        for _ in 0..2 {
            for (i, b) in basis.iter().enumerate() {
                let c = inner(b, &q);
                rcol[i] += c;
                for (qv, bv) in q.iter_mut().zip(b) {
                    *qv -= bv * c;
                }
            }
        }
        let qn = norm_sqr(&q).sqrt();
        if qn <= 1e-10 * phi_norm {
            // numerically dependent on the active set
            let last = path.last().cloned().unwrap_or_else(|| vec![Complex64::new(0.0, 0.0); pilots.s() * u]);
            path.push(last);
            continue;
        }
        q.iter_mut().for_each(|v| *v /= qn);
        rcol[basis.len()] = Complex64::new(qn, 0.0);
        let c = inner(&q, y);
        qy.push(c);
        for (rv, qv) in residual.iter_mut().zip(&q) {
            *rv -= qv * c;
        }
        basis.push(q);
        r_cols.push(rcol);
        active.push(atom);

        // back substitution R t = Qᴴ y
        let k = active.len();
        let mut t = vec![Complex64::new(0.0, 0.0); k];
        for i in (0..k).rev() {
            let mut acc = qy[i];
            for j in i + 1..k {
                acc -= r_cols[j][i] * t[j];
            }
            t[i] = acc / r_cols[i][i];
        }
        let mut h = vec![Complex64::new(0.0, 0.0); pilots.s() * u];
        for (&a, coef) in active.iter().zip(&t) {
            for (hv, av) in h.iter_mut().zip(dict.channel_atom(a, u)) {
                *hv += av * coef;
            }
        }
        path.push(h);
    }
    while path.len() < k_max {
        let last = path.last().cloned().unwrap_or_else(|| vec![Complex64::new(0.0, 0.0); pilots.s() * u]);
        path.push(last);
    }
    Ok(path)
}

/// OMP iterate closest to the true channel among sparsity levels `1..=k_max`.
pub fn omp_genie(
    y: &[Complex64],
    h_true: &[Complex64],
    pilots: &PilotSet,
    dict: &OmpDictionary,
    k_max: usize,
) -> Result<Vec<Complex64>> {
    ensure_len("omp_genie true channel", pilots.s() * pilots.u(), h_true.len())?;
    let path = omp_path(y, pilots, dict, k_max)?;
    let err = |h: &Vec<Complex64>| h.iter().zip(h_true).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>();
    Ok(path
        .into_iter()
        .min_by(|a, b| err(a).total_cmp(&err(b)))
        .expect("k_max >= 1"))
}
