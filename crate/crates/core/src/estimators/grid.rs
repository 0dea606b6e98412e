//! Gridded estimator: the exact MMSE estimator under a uniform prior on a
//! finite set of channel parameters.

use num_complex::Complex64;

use super::genie::dense_filter;
use super::kron::{pilot_side, KronFilter, SideEigen};
use crate::channel::{Delta, ScenarioConfig, SteeringQuadrature};
use crate::error::{ensure_len, Error, Result};
use crate::numerics::{inner, softmax, CMatrix, DftMatrix, Lu};
use crate::pilots::{PilotSet, QTransform};
use crate::structure::{apply_structured_filter, ge_input_cbar, DiablkVector};

use super::LOG_DET_PHASE_TOL;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridForm {
    /// Exact `SU x SN` filters per grid point.
    Dense,
    /// Transform-domain diablk filters of the circulant covariance surrogates.
    Structured,
}

#[derive(Clone, Debug)]
pub enum FilterBank {
    Dense(Vec<CMatrix>),
    Structured(Vec<DiablkVector>),
}

#[derive(Clone, Debug)]
pub struct GridFilters {
    deltas: Vec<Delta>,
    bank: FilterBank,
    biases: Vec<f64>,
    sigma2: f64,
}

impl GridFilters {
    pub fn new(deltas: Vec<Delta>, bank: FilterBank, biases: Vec<f64>, sigma2: f64) -> Result<Self> {
        let p = match &bank {
            FilterBank::Dense(f) => f.len(),
            FilterBank::Structured(f) => f.len(),
        };
        if p == 0 {
            return Err(Error::InvalidArgument("grid must contain at least one point".into()));
        }
        ensure_len("grid biases", p, biases.len())?;
        if !deltas.is_empty() {
            ensure_len("grid deltas", p, deltas.len())?;
        }
        if biases.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite("grid biases"));
        }
        Ok(Self { deltas, bank, biases, sigma2 })
    }

    /// Dense filters for arbitrary grid covariances (`SU x SU` each).
    pub fn dense_from_covariances(covs: &[CMatrix], pilots: &PilotSet, sigma2: f64) -> Result<Self> {
        let mut filters = Vec::with_capacity(covs.len());
        let mut biases = Vec::with_capacity(covs.len());
        for c in covs {
            let (w, b) = dense_filter(c, pilots, sigma2)?;
            filters.push(w);
            biases.push(b);
        }
        Self::new(Vec::new(), FilterBank::Dense(filters), biases, sigma2)
    }

    /// Structured filters for covariances `Qᴴ diag(d) Q`, given each `d`.
    ///
    /// Per spatial frequency `s` the filter block is
    /// `M_s = D_s (G̃ D_s + σ² I)⁻¹` with `G̃ = F_U G F_Uᴴ`, and the bias is
    /// `Σ_s log|I − M_s G̃|`.
    pub fn structured_from_spectra(spectra: &[Vec<f64>], pilots: &PilotSet, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0) {
            return Err(Error::InvalidArgument("noise variance must be positive".into()));
        }
        let (s, u) = (pilots.s(), pilots.u());
        let fu = DftMatrix::new(u).matrix();
        let gt = fu.matmul(&pilots.gram_small()).matmul(&fu.adjoint());
        let eye = CMatrix::identity(u);
        let mut filters = Vec::with_capacity(spectra.len());
        let mut biases = Vec::with_capacity(spectra.len());
        for d in spectra {
            ensure_len("structured spectrum", s * u, d.len())?;
            let mut w = DiablkVector::zeros(s, u);
            let mut bias = 0.0;
            for f in 0..s {
                let ds = CMatrix::from_diag(&(0..u).map(|k| Complex64::new(d[f + s * k], 0.0)).collect::<Vec<_>>());
                let m = ds.matmul(&gt).add(&eye.scale(Complex64::new(sigma2, 0.0)));
                let lu = Lu::new(&m)?;
                // M_s = D_s (G̃ D_s + σ²)⁻¹ = ((D_s G̃ + σ²)⁻¹ D_s) by push-through
                let ms = lu.solve_mat(&ds);
                for i in 0..u {
                    for j in 0..u {
                        w.block_mut(i, j)[f] = ms[(i, j)];
                    }
                }
                // |I − M_s G̃| = σ^{2U} / |D_s G̃ + σ² I|
                let ld = lu.log_det();
                if ld.im.abs() > LOG_DET_PHASE_TOL {
                    return Err(Error::ComplexDeterminant { phase: ld.im });
                }
                bias += u as f64 * sigma2.ln() - ld.re;
            }
            filters.push(w);
            biases.push(bias);
        }
        Self::new(Vec::new(), FilterBank::Structured(filters), biases, sigma2)
    }

    /// The implicit grid of the fast estimator: all `SU` circular shifts of a
    /// transform-domain diagonal filter `w0`, with a common bias.
    pub fn circulant_shift_family(w0: &[f64], b0: f64, s: usize, u: usize, sigma2: f64) -> Result<Self> {
        ensure_len("circulant_shift_family w0", s * u, w0.len())?;
        let mut filters = Vec::with_capacity(s * u);
        for du in 0..u {
            for ds in 0..s {
                let shifted: Vec<Complex64> = (0..s * u)
                    .map(|idx| {
                        let (r, c) = (idx % s, idx / s);
                        let src = (r + s - ds) % s + s * ((c + u - du) % u);
                        Complex64::new(w0[src], 0.0)
                    })
                    .collect();
                filters.push(DiablkVector::from_block_diagonal(s, u, &shifted)?);
            }
        }
        Self::new(Vec::new(), FilterBank::Structured(filters), vec![b0; s * u], sigma2)
    }

    pub fn with_deltas(mut self, deltas: Vec<Delta>) -> Result<Self> {
        ensure_len("grid deltas", self.len(), deltas.len())?;
        self.deltas = deltas;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.biases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.biases.is_empty()
    }

    pub fn deltas(&self) -> &[Delta] {
        &self.deltas
    }

    pub fn bank(&self) -> &FilterBank {
        &self.bank
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    /// Noise variance the filters were designed for.
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn form(&self) -> GridForm {
        match self.bank {
            FilterBank::Dense(_) => GridForm::Dense,
            FilterBank::Structured(_) => GridForm::Structured,
        }
    }
}

/// Single-cluster grid, uniform in `sin θ` on each side (cell midpoints of
/// `[-1, 1)`), with `P_T = min(max(U, 4), P)` transmit points and `P_R = P / P_T`
/// receive points. Transmit index is the outer loop.
pub fn grid_deltas(cfg: &ScenarioConfig, p: usize) -> Result<Vec<Delta>> {
    if p == 0 {
        return Err(Error::InvalidArgument("grid size must be at least 1".into()));
    }
    let p_t = cfg.u.max(4).min(p);
    let p_r = (p / p_t).max(1);
    let mid = |k: usize, m: usize| (-1.0 + (2 * k + 1) as f64 / m as f64).asin();
    Ok((0..p_t)
        .flat_map(|t| (0..p_r).map(move |r| (t, r)))
        .map(|(t, r)| Delta::single(mid(t, p_t), mid(r, p_r), cfg.spread_tx(), cfg.spread_rx()))
        .collect())
}

/// Grid filters at the single-cluster grid for the scenario.
pub fn build_grid(cfg: &ScenarioConfig, pilots: &PilotSet, sigma2: f64, p: usize, form: GridForm) -> Result<GridFilters> {
    let deltas = grid_deltas(cfg, p)?;
    let (s, u) = (pilots.s(), pilots.u());
    ensure_len("build_grid S", cfg.s, s)?;
    ensure_len("build_grid U", cfg.u, u)?;
    let quad_tx = SteeringQuadrature::new(u);
    let quad_rx = SteeringQuadrature::new(s);
    let side = |q: &SteeringQuadrature, angle: f64, spread: f64| q.covariance(&[(angle, 1.0)], spread);

    // deltas are (tx outer, rx inner); factor covariances are shared
    let p_r = deltas.iter().take_while(|d| d.clusters[0].angle_tx == deltas[0].clusters[0].angle_tx).count();
    let p_t = deltas.len() / p_r;
    let tx_covs: Vec<CMatrix> = (0..p_t)
        .map(|t| side(&quad_tx, deltas[t * p_r].clusters[0].angle_tx, deltas[0].spread_tx))
        .collect::<Result<_>>()?;
    let rx_covs: Vec<CMatrix> = (0..p_r)
        .map(|r| side(&quad_rx, deltas[r].clusters[0].angle_rx, deltas[0].spread_rx))
        .collect::<Result<_>>()?;

    let grid = match form {
        GridForm::Dense => {
            let tx_eig: Vec<SideEigen> = tx_covs
                .iter()
                .map(|c| SideEigen::new(&pilot_side(c, pilots)))
                .collect::<Result<_>>()?;
            let rx_eig: Vec<SideEigen> = rx_covs.iter().map(SideEigen::new).collect::<Result<_>>()?;
            let mut filters = Vec::with_capacity(deltas.len());
            let mut biases = Vec::with_capacity(deltas.len());
            for t in 0..p_t {
                for r in 0..p_r {
                    let kf = KronFilter::from_parts(&tx_covs[t], &rx_covs[r], &tx_eig[t], &rx_eig[r], pilots, sigma2)?;
                    filters.push(kf.dense());
                    biases.push(kf.log_det());
                }
            }
            GridFilters::new(Vec::new(), FilterBank::Dense(filters), biases, sigma2)?
        }
        GridForm::Structured => {
            let spectrum = |c: &CMatrix| -> Vec<f64> {
                let f = DftMatrix::new(c.rows()).matrix();
                f.matmul(c).matmul(&f.adjoint()).diag().iter().map(|z| z.re).collect()
            };
            let tx_spec: Vec<Vec<f64>> = tx_covs.iter().map(spectrum).collect();
            let rx_spec: Vec<Vec<f64>> = rx_covs.iter().map(spectrum).collect();
            let spectra: Vec<Vec<f64>> = (0..p_t)
                .flat_map(|t| (0..p_r).map(move |r| (t, r)))
                .map(|(t, r)| tx_spec[t].iter().flat_map(|&a| rx_spec[r].iter().map(move |&b| a * b)).collect())
                .collect();
            GridFilters::structured_from_spectra(&spectra, pilots, sigma2)?
        }
    };
    grid.with_deltas(deltas)
}

/// Per-grid-point scores `tr(X W_i Ĉ) + b_i` with `Ĉ = σ⁻² y yᴴ`, and the
/// filtered candidates needed to form the estimate (dense path only).
fn dense_scores(
    y: &[Complex64],
    filters: &[CMatrix],
    biases: &[f64],
    pilots: &PilotSet,
    sigma2: f64,
) -> Result<(Vec<f64>, Vec<Vec<Complex64>>)> {
    let xhy = pilots.apply_xh(y)?;
    let mut scores = Vec::with_capacity(filters.len());
    let mut candidates = Vec::with_capacity(filters.len());
    for (w, b) in filters.iter().zip(biases) {
        ensure_len("GE filter input", y.len(), w.cols())?;
        let v = w.matvec(y);
        // yᴴ X W y = (Xᴴ y)ᴴ (W y)
        scores.push(inner(&xhy, &v).re / sigma2 + b);
        candidates.push(v);
    }
    Ok((scores, candidates))
}

/// Unnormalized log-posterior scores of the grid points for observation `y`.
pub fn ge_scores(y: &[Complex64], grid: &GridFilters, pilots: &PilotSet, qt: &QTransform, sigma2: f64) -> Result<Vec<f64>> {
    match grid.bank() {
        FilterBank::Dense(f) => Ok(dense_scores(y, f, grid.biases(), pilots, sigma2)?.0),
        FilterBank::Structured(f) => {
            let cbar = ge_input_cbar(y, pilots, qt, sigma2)?;
            f.iter()
                .zip(grid.biases())
                .map(|(w, b)| Ok(w.inner_conj(&cbar)?.re + b))
                .collect()
        }
    }
}

/// Softmax-weighted combination of the grid filters applied to `y`.
///
/// `sigma2` is the noise level of the observation; the filters keep the
/// value they were designed for.
pub fn ge_estimate(y: &[Complex64], grid: &GridFilters, pilots: &PilotSet, qt: &QTransform, sigma2: f64) -> Result<Vec<Complex64>> {
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidArgument("noise variance must be positive".into()));
    }
    match grid.bank() {
        FilterBank::Dense(f) => {
            let (scores, candidates) = dense_scores(y, f, grid.biases(), pilots, sigma2)?;
            let weights = softmax(&scores);
            let mut out = vec![Complex64::new(0.0, 0.0); candidates[0].len()];
            for (p, v) in weights.iter().zip(&candidates) {
                if *p == 0.0 {
                    continue;
                }
                for (o, x) in out.iter_mut().zip(v) {
                    *o += x * p;
                }
            }
            Ok(out)
        }
        FilterBank::Structured(f) => {
            let weights = softmax(&ge_scores(y, grid, pilots, qt, sigma2)?);
            let (s, u) = (pilots.s(), pilots.u());
            let mut combined = vec![Complex64::new(0.0, 0.0); s * u * u];
            for (p, w) in weights.iter().zip(f) {
                if *p == 0.0 {
                    continue;
                }
                for (o, x) in combined.iter_mut().zip(w.data()) {
                    *o += x * p;
                }
            }
            apply_structured_filter(&DiablkVector::new(s, u, combined)?, y, pilots, qt)
        }
    }
}

/// Used by tests that need `log|I − X W|` from an explicit filter.
#[cfg(test)]
pub(crate) fn bias_of(w: &CMatrix, pilots: &PilotSet) -> Result<f64> {
    let x = pilots.x_lifted();
    crate::numerics::log_det_real(&CMatrix::identity(x.rows()).sub(&x.matmul(w)), LOG_DET_PHASE_TOL)
}
