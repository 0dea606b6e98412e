//! Spatial channel model: Laplace-mixture power densities over ULA steering
//! vectors, Kronecker covariances `C = C_tx ⊗ C_rx`, channel/noise draws and
//! SNR calibration.
//!
//! The receive side is the `S`-antenna base station, the transmit side the
//! `U`-antenna mobile.

use std::f64::consts::{PI, SQRT_2};
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    complex_gaussian_vec, toeplitz_from_first_column, CMatrix, DftMatrix, PsdFactor,
};
use crate::pilots::PilotSet;

/// Number of trapezoid nodes on `[-π, π]` used for the angular integrals.
pub const QUADRATURE_POINTS: usize = 4096;

/// Experiment knobs for one scenario. Serialized field names are fixed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(rename = "S")]
    pub s: usize,
    #[serde(rename = "U")]
    pub u: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub num_clusters: usize,
    /// Angular spread at the mobile (U antennas), degrees.
    pub spread_tx_deg: f64,
    /// Angular spread at the base station (S antennas), degrees.
    pub spread_rx_deg: f64,
    pub snr_db: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            s: 64,
            u: 2,
            n: 2,
            num_clusters: 3,
            spread_tx_deg: 35.0,
            spread_rx_deg: 2.0,
            snr_db: 5.0,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.s == 0 || self.u == 0 || self.n == 0 {
            return Err(Error::InvalidArgument("S, U and N must be at least 1".into()));
        }
        if self.num_clusters == 0 {
            return Err(Error::InvalidArgument("num_clusters must be at least 1".into()));
        }
        if !(self.spread_tx_deg > 0.0 && self.spread_rx_deg > 0.0) {
            return Err(Error::InvalidArgument("angular spreads must be positive".into()));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::InvalidArgument("snr_db must be finite".into()));
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn spread_tx(&self) -> f64 {
        self.spread_tx_deg.to_radians()
    }

    pub fn spread_rx(&self) -> f64 {
        self.spread_rx_deg.to_radians()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cluster {
    pub angle_tx: f64,
    pub angle_rx: f64,
    pub gain: f64,
}

/// Latent channel parameters: clusters and per-side spreads (radians).
#[derive(Clone, Debug, PartialEq)]
pub struct Delta {
    pub clusters: Vec<Cluster>,
    pub spread_tx: f64,
    pub spread_rx: f64,
}

impl Delta {
    pub fn single(angle_tx: f64, angle_rx: f64, spread_tx: f64, spread_rx: f64) -> Self {
        Self {
            clusters: vec![Cluster {
                angle_tx,
                angle_rx,
                gain: 1.0,
            }],
            spread_tx,
            spread_rx,
        }
    }

    fn tx_components(&self) -> Vec<(f64, f64)> {
        self.clusters.iter().map(|c| (c.angle_tx, c.gain)).collect()
    }

    fn rx_components(&self) -> Vec<(f64, f64)> {
        self.clusters.iter().map(|c| (c.angle_rx, c.gain)).collect()
    }
}

/// Cluster angles uniform on `[-π/2, π/2]`, gains uniform on `(0, 1]` and
/// normalized to sum to one.
pub fn sample_delta<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Delta {
    let half = PI / 2.0;
    let mut clusters: Vec<Cluster> = (0..cfg.num_clusters.max(1))
        .map(|_| Cluster {
            angle_tx: rng.random_range(-half..=half),
            angle_rx: rng.random_range(-half..=half),
            // 1 - [0, 1) lies in (0, 1]
            gain: 1.0 - rng.random::<f64>(),
        })
        .collect();
    let total: f64 = clusters.iter().map(|c| c.gain).sum();
    clusters.iter_mut().for_each(|c| c.gain /= total);
    Delta {
        clusters,
        spread_tx: cfg.spread_tx(),
        spread_rx: cfg.spread_rx(),
    }
}

/// ULA steering vector, entry `k = exp(-j k π sin θ)`.
pub fn steering_vector(theta: f64, n: usize) -> Vec<Complex64> {
    let step = Complex64::from_polar(1.0, -PI * theta.sin());
    let mut out = Vec::with_capacity(n);
    let mut z = Complex64::new(1.0, 0.0);
    for _ in 0..n {
        out.push(z);
        z *= step;
    }
    out
}

/// Trapezoid rule on `[-π, π]` with the steering-vector phasors tabulated,
/// so each covariance costs one weighted sum per antenna lag.
#[derive(Clone, Debug)]
pub struct SteeringQuadrature {
    n: usize,
    step: f64,
    weights: Vec<f64>,
    /// `phasors[j * n + k] = exp(-j k π sin θ_j)`
    phasors: Vec<Complex64>,
}

impl SteeringQuadrature {
    pub fn new(n: usize) -> Self {
        Self::with_points(n, QUADRATURE_POINTS)
    }

    pub fn with_points(n: usize, points: usize) -> Self {
        assert!(n >= 1 && points >= 2);
        let step = 2.0 * PI / (points - 1) as f64;
        let mut weights = vec![step; points];
        weights[0] *= 0.5;
        weights[points - 1] *= 0.5;
        let mut phasors = Vec::with_capacity(points * n);
        for j in 0..points {
            phasors.extend(steering_vector(Self::node(step, j), n));
        }
        Self {
            n,
            step,
            weights,
            phasors,
        }
    }

    fn node(step: f64, j: usize) -> f64 {
        -PI + step * j as f64
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn points(&self) -> usize {
        self.weights.len()
    }

    /// Trapezoid weights times `exp(-√2 |θ_j - θ0| / spread)`, computed with a
    /// geometric recurrence from the node bracketing `θ0`.
    fn laplace_weights(&self, center: f64, spread: f64, out: &mut [f64]) {
        let rate = SQRT_2 / spread;
        let ratio = (-rate * self.step).exp();
        let m = self.points();
        let pos = ((center + PI) / self.step).floor();
        let left = (pos.max(0.0) as usize).min(m - 1);
        let mut val = (-rate * (center - Self::node(self.step, left)).abs()).exp();
        for j in (0..=left).rev() {
            out[j] = val * self.weights[j];
            val *= ratio;
        }
        if left + 1 < m {
            let mut val = (-rate * (Self::node(self.step, left + 1) - center).abs()).exp();
            for j in left + 1..m {
                out[j] = val * self.weights[j];
                val *= ratio;
            }
        }
    }

    /// First Toeplitz column `c[k] = Σ_i g_i ∫ L_i(θ) exp(-jπk sin θ) dθ` for
    /// Laplace components truncated and renormalized on `[-π, π]`.
    pub fn first_column(&self, components: &[(f64, f64)], spread: f64) -> Result<Vec<Complex64>> {
        if !(spread > 0.0) {
            return Err(Error::InvalidArgument("angular spread must be positive".into()));
        }
        let n = self.n;
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        let mut dens = vec![0.0; self.points()];
        for &(center, gain) in components {
            self.laplace_weights(center, spread, &mut dens);
            let total: f64 = dens.iter().sum();
            let peak = dens.iter().cloned().fold(0.0, f64::max);
            let cutoff = peak * 1e-18;
            let scale = gain / total;
            for (j, &d) in dens.iter().enumerate() {
                if d <= cutoff {
                    continue;
                }
                let w = d * scale;
                for (c, p) in col.iter_mut().zip(&self.phasors[j * n..(j + 1) * n]) {
                    *c += p * w;
                }
            }
        }
        if col.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("angular quadrature"));
        }
        Ok(col)
    }

    pub fn covariance(&self, components: &[(f64, f64)], spread: f64) -> Result<CMatrix> {
        let mut col = self.first_column(components, spread)?;
        // |a_k(θ)| = 1, so the diagonal is exactly the total gain
        col[0] = Complex64::new(components.iter().map(|c| c.1).sum(), 0.0);
        toeplitz_from_first_column(&col)
    }
}

/// One-side covariance `∫ g(θ) a(θ) a(θ)ᴴ dθ` for `(angle, gain)` components.
pub fn side_covariance(components: &[(f64, f64)], spread: f64, n: usize) -> Result<CMatrix> {
    SteeringQuadrature::new(n).covariance(components, spread)
}

/// `C = C_tx ⊗ C_rx` together with its factors.
#[derive(Clone, Debug)]
pub struct ChannelCovariance {
    pub cov_tx: CMatrix,
    pub cov_rx: CMatrix,
    pub full: CMatrix,
}

impl ChannelCovariance {
    pub fn from_factors(cov_tx: CMatrix, cov_rx: CMatrix) -> Self {
        let full = cov_tx.kron(&cov_rx);
        Self { cov_tx, cov_rx, full }
    }

    pub fn s(&self) -> usize {
        self.cov_rx.rows()
    }

    pub fn u(&self) -> usize {
        self.cov_tx.rows()
    }

    /// Diagonal of `Q C Qᴴ` with `Q = F_U ⊗ F_S`: the eigenvalues of the
    /// block-circulant surrogate, ordered like `vec` indices.
    pub fn circulant_spectrum(&self) -> Vec<f64> {
        let side = |c: &CMatrix| -> Vec<f64> {
            let f = DftMatrix::new(c.rows()).matrix();
            f.matmul(c).matmul(&f.adjoint()).diag().iter().map(|z| z.re).collect()
        };
        let tx = side(&self.cov_tx);
        let rx = side(&self.cov_rx);
        tx.iter().flat_map(|&a| rx.iter().map(move |&b| a * b)).collect()
    }

    /// Sampler for `N_C(0, C)` exploiting the Kronecker structure:
    /// `vec(L_rx G L_txᵀ)` has covariance `C_tx ⊗ C_rx`.
    pub fn sampler(&self) -> Result<KronSampler> {
        Ok(KronSampler {
            tx: PsdFactor::new(&self.cov_tx)?,
            rx: PsdFactor::new(&self.cov_rx)?,
        })
    }
}

#[derive(Clone, Debug)]
pub struct KronSampler {
    tx: PsdFactor,
    rx: PsdFactor,
}

impl KronSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Complex64> {
        let (s, u) = (self.rx.dim(), self.tx.dim());
        let (rs, ru) = (self.rx.rank(), self.tx.rank());
        let g = complex_gaussian_vec(rng, rs * ru);
        let lrx = self.rx.matrix();
        let ltx = self.tx.matrix();
        // M = L_rx G  (s x ru), G column-major rs x ru
        let mut m = vec![Complex64::new(0.0, 0.0); s * ru];
        for c in 0..ru {
            for k in 0..rs {
                let gv = g[k + rs * c];
                for r in 0..s {
                    m[r + s * c] += lrx[(r, k)] * gv;
                }
            }
        }
        // H = M L_txᵀ  (s x u)
        let mut h = vec![Complex64::new(0.0, 0.0); s * u];
        for col in 0..u {
            for c in 0..ru {
                let t = ltx[(col, c)];
                for r in 0..s {
                    h[r + s * col] += m[r + s * c] * t;
                }
            }
        }
        h
    }
}

/// Covariance synthesis with cached quadrature tables for a fixed `(S, U)`.
#[derive(Clone, Debug)]
pub struct ChannelModel {
    quad_tx: SteeringQuadrature,
    quad_rx: SteeringQuadrature,
}

impl ChannelModel {
    pub fn new(s: usize, u: usize) -> Self {
        Self {
            quad_tx: SteeringQuadrature::new(u),
            quad_rx: SteeringQuadrature::new(s),
        }
    }

    pub fn s(&self) -> usize {
        self.quad_rx.n()
    }

    pub fn u(&self) -> usize {
        self.quad_tx.n()
    }

    pub fn covariance(&self, delta: &Delta) -> Result<ChannelCovariance> {
        let cov_tx = self.quad_tx.covariance(&delta.tx_components(), delta.spread_tx)?;
        let cov_rx = self.quad_rx.covariance(&delta.rx_components(), delta.spread_rx)?;
        Ok(ChannelCovariance::from_factors(cov_tx, cov_rx))
    }
}

pub fn build_covariance(delta: &Delta, s: usize, u: usize) -> Result<ChannelCovariance> {
    ChannelModel::new(s, u).covariance(delta)
}

/// `σ² = tr(C XᴴX) / (S N 10^{snr/10})`, using `tr((C_tx⊗C_rx)(G⊗I)) = tr(C_tx G) tr(C_rx)`.
pub fn noise_variance_for_snr(cov: &ChannelCovariance, pilots: &PilotSet, snr_db: f64) -> Result<f64> {
    if !snr_db.is_finite() {
        return Err(Error::InvalidArgument("snr_db must be finite".into()));
    }
    if cov.s() != pilots.s() || cov.u() != pilots.u() {
        return Err(Error::InvalidArgument("covariance and pilot dimensions differ".into()));
    }
    let power = (cov.cov_tx.matmul(&pilots.gram_small()).trace() * cov.cov_rx.trace()).re;
    let snr = 10f64.powf(snr_db / 10.0);
    Ok(power / (pilots.s() as f64 * pilots.n() as f64 * snr))
}

/// Noise variance of the single broadside cluster at the scenario SNR. The
/// unit-diagonal covariances make this the per-draw value for orthogonal
/// pilots, so it serves as the nominal `σ²` of precomputed filters.
pub fn reference_noise_variance(cfg: &ScenarioConfig, pilots: &PilotSet) -> Result<f64> {
    let cov = build_covariance(&Delta::single(0.0, 0.0, cfg.spread_tx(), cfg.spread_rx()), cfg.s, cfg.u)?;
    noise_variance_for_snr(&cov, pilots, cfg.snr_db)
}

/// One channel realization and its noisy pilot observation.
#[derive(Clone, Debug)]
pub struct Observation {
    pub h: Vec<Complex64>,
    pub y: Vec<Complex64>,
}

/// `h ~ N_C(0, C)`, `y = X h + z` with `z ~ N_C(0, σ² I)`.
pub fn sample_observation<R: Rng + ?Sized>(
    sampler: &KronSampler,
    pilots: &PilotSet,
    sigma2: f64,
    rng: &mut R,
) -> Result<Observation> {
    if !(sigma2 >= 0.0) {
        return Err(Error::InvalidArgument("noise variance must be non-negative".into()));
    }
    let h = sampler.sample(rng);
    let mut y = pilots.apply_x(&h)?;
    if sigma2 > 0.0 {
        let sd = sigma2.sqrt();
        for (v, z) in y.iter_mut().zip(complex_gaussian_vec(rng, pilots.s() * pilots.n())) {
            *v += z * sd;
        }
    }
    Ok(Observation { h, y })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{kron, SimRng};
    use rand::SeedableRng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn cfg(clusters: usize) -> ScenarioConfig {
        ScenarioConfig {
            s: 8,
            u: 2,
            n: 2,
            num_clusters: clusters,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn delta_gains_are_normalized() {
        let mut rng = SimRng::seed_from_u64(1);
        let d = sample_delta(&cfg(1), &mut rng);
        assert_eq!(d.clusters[0].gain, 1.0);
        let d = sample_delta(&cfg(3), &mut rng);
        let total: f64 = d.clusters.iter().map(|c| c.gain).sum();
        assert!((total - 1.0).abs() < 1e-12);
        for cl in &d.clusters {
            assert!(cl.gain > 0.0);
            assert!(cl.angle_tx.abs() <= PI / 2.0 && cl.angle_rx.abs() <= PI / 2.0);
        }
        assert!((d.spread_rx - 2f64.to_radians()).abs() < 1e-15);
    }

    #[test]
    fn delta_is_deterministic_per_seed() {
        let a = sample_delta(&cfg(3), &mut SimRng::seed_from_u64(5));
        let b = sample_delta(&cfg(3), &mut SimRng::seed_from_u64(5));
        assert_eq!(a, b);
    }

    #[test]
    fn steering_examples() {
        assert!(steering_vector(0.0, 4).iter().all(|z| (z - c(1.0, 0.0)).norm() < 1e-15));
        let a = steering_vector(PI / 2.0, 2);
        assert!((a[0] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((a[1] - c(-1.0, 0.0)).norm() < 1e-12);
        for z in steering_vector(0.73, 9) {
            assert!((z.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn narrow_spread_approaches_rank_one() {
        for theta in [0.0, 0.4, -1.1] {
            let n = 4;
            let cov = side_covariance(&[(theta, 1.0)], 1e-4, n).unwrap();
            let a = CMatrix::column(&steering_vector(theta, n));
            let target = a.matmul(&a.adjoint());
            let err = cov.sub(&target).frobenius_norm();
            assert!(err < 0.01 * n as f64, "theta={theta}: {err}");
        }
    }

    #[test]
    fn unit_diagonal_hermitian_psd() {
        let mut rng = SimRng::seed_from_u64(7);
        for _ in 0..10 {
            let d = sample_delta(&cfg(3), &mut rng);
            let cov = build_covariance(&d, 8, 3).unwrap();
            for m in [&cov.cov_tx, &cov.cov_rx, &cov.full] {
                for z in m.diag() {
                    assert!((z.re - 1.0).abs() < 1e-9 && z.im.abs() < 1e-12);
                }
                assert!(m.hermitian_deviation() < 1e-12);
                let (vals, _) = crate::numerics::hermitian_eigen(m).unwrap();
                assert!(vals[0] > -1e-10);
            }
            assert!((cov.full.trace().re - 24.0).abs() < 1e-8);
        }
    }

    #[test]
    fn first_column_matches_fine_quadrature() {
        // Independent oracle: plain trapezoid with 10^6 nodes evaluating the
        // density and phasors directly.
        let spread = 35f64.to_radians();
        let n = 4;
        let m = 1_000_000;
        let h = 2.0 * PI / (m - 1) as f64;
        let mut norm = 0.0;
        let mut col = vec![c(0.0, 0.0); n];
        for j in 0..m {
            let theta = -PI + h * j as f64;
            let w = if j == 0 || j == m - 1 { 0.5 * h } else { h };
            let d = w * (-SQRT_2 * theta.abs() / spread).exp();
            norm += d;
            for (k, v) in col.iter_mut().enumerate() {
                *v += Complex64::from_polar(d, -PI * k as f64 * theta.sin());
            }
        }
        col.iter_mut().for_each(|v| *v /= norm);
        let got = SteeringQuadrature::new(n).first_column(&[(0.0, 1.0)], spread).unwrap();
        for (g, e) in got.iter().zip(&col) {
            assert!((g - e).norm() < 1e-6, "{g} vs {e}");
        }
    }

    #[test]
    fn single_antenna_side_reduces() {
        let d = Delta::single(0.3, -0.2, 0.5, 0.1);
        let cov = build_covariance(&d, 5, 1).unwrap();
        assert!(cov.full.sub(&cov.cov_rx).frobenius_norm() < 1e-15);
    }

    #[test]
    fn wide_uniform_like_spread_is_near_identity() {
        // Spread far wider than the window flattens the density; the exact
        // integral of exp(-jπk sin θ) over a uniform θ is J0(πk), which for
        // k=1 is about -0.304, so compare against the numerically uniform case.
        let d = Delta::single(0.0, 0.0, 1e4, 1e4);
        let cov = build_covariance(&d, 2, 2).unwrap();
        let j0_pi = -0.304_242_177_644_093_9;
        assert!((cov.cov_rx[(1, 0)].re - j0_pi).abs() < 1e-4);
        assert!(cov.cov_rx[(1, 0)].im.abs() < 1e-6);
        // off-diagonals are small relative to the unit diagonal
        for r in 0..4 {
            for col in 0..4 {
                if r != col {
                    assert!(cov.full[(r, col)].norm() < 0.31);
                }
            }
        }
    }

    #[test]
    fn full_is_block_toeplitz_with_toeplitz_blocks() {
        let d = sample_delta(&cfg(2), &mut SimRng::seed_from_u64(8));
        let (s, u) = (4, 3);
        let cov = build_covariance(&d, s, u).unwrap();
        for bu in 0..u {
            for bv in 0..u {
                for r in 0..s {
                    for k in 0..s {
                        let v = cov.full[(bu * s + r, bv * s + k)];
                        if bu + 1 < u && bv + 1 < u {
                            assert!((v - cov.full[((bu + 1) * s + r, (bv + 1) * s + k)]).norm() < 1e-14);
                        }
                        if r + 1 < s && k + 1 < s {
                            assert!((v - cov.full[(bu * s + r + 1, bv * s + k + 1)]).norm() < 1e-14);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn kronecker_mixed_product_on_steering_vectors() {
        let d = sample_delta(&cfg(2), &mut SimRng::seed_from_u64(9));
        let cov = build_covariance(&d, 5, 3).unwrap();
        let at = steering_vector(0.2, 3);
        let ar = steering_vector(-0.7, 5);
        let joint: Vec<Complex64> = at.iter().flat_map(|&x| ar.iter().map(move |&y| x * y)).collect();
        let lhs = cov.full.matvec(&joint);
        let ta = cov.cov_tx.matvec(&at);
        let ra = cov.cov_rx.matvec(&ar);
        let rhs: Vec<Complex64> = ta.iter().flat_map(|&x| ra.iter().map(move |&y| x * y)).collect();
        for (l, r) in lhs.iter().zip(&rhs) {
            assert!((l - r).norm() < 1e-12);
        }
    }

    #[test]
    fn noise_variance_examples() {
        let d = sample_delta(&cfg(3), &mut SimRng::seed_from_u64(10));
        let cov = build_covariance(&d, 8, 2).unwrap();
        let p = PilotSet::dft(8, 2, 2).unwrap();
        assert!((noise_variance_for_snr(&cov, &p, 0.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((noise_variance_for_snr(&cov, &p, 10.0).unwrap() - 0.1).abs() < 1e-12);

        // orthogonal pilots: closed form (N/U) tr(C) / (S N snr)
        let p = PilotSet::dft(8, 2, 4).unwrap();
        let closed = 2.0 * cov.full.trace().re / (8.0 * 4.0 * 10f64.powf(0.3));
        let got = noise_variance_for_snr(&cov, &p, 3.0).unwrap();
        assert!((got - closed).abs() < 1e-12 * closed);

        // arbitrary pilots against the dense trace
        let mut rng = SimRng::seed_from_u64(11);
        let xs = CMatrix::new(2, 3, complex_gaussian_vec(&mut rng, 6)).unwrap();
        let p = PilotSet::from_matrix(8, xs).unwrap();
        let x = p.x_lifted();
        let dense = cov.full.matmul(&x.adjoint().matmul(x)).trace().re / (8.0 * 3.0 * 10f64.powf(-0.5));
        let got = noise_variance_for_snr(&cov, &p, -5.0).unwrap();
        assert!((got - dense).abs() < 1e-10 * dense);
        assert!(noise_variance_for_snr(&cov, &p, f64::NAN).is_err());
    }

    #[test]
    fn noiseless_observation_is_exact() {
        let d = sample_delta(&cfg(2), &mut SimRng::seed_from_u64(12));
        let cov = build_covariance(&d, 6, 2).unwrap();
        let p = PilotSet::dft(6, 2, 3).unwrap();
        let obs = sample_observation(&cov.sampler().unwrap(), &p, 0.0, &mut SimRng::seed_from_u64(1)).unwrap();
        let xh = p.x_lifted().matvec(&obs.h);
        for (a, b) in obs.y.iter().zip(&xh) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn observation_deterministic_per_seed() {
        let d = sample_delta(&cfg(2), &mut SimRng::seed_from_u64(13));
        let cov = build_covariance(&d, 4, 2).unwrap();
        let p = PilotSet::dft(4, 2, 2).unwrap();
        let sampler = cov.sampler().unwrap();
        let a = sample_observation(&sampler, &p, 0.3, &mut SimRng::seed_from_u64(2)).unwrap();
        let b = sample_observation(&sampler, &p, 0.3, &mut SimRng::seed_from_u64(2)).unwrap();
        assert_eq!(a.h, b.h);
        assert_eq!(a.y, b.y);
    }

    #[test]
    fn empirical_channel_covariance_converges() {
        let d = sample_delta(&cfg(3), &mut SimRng::seed_from_u64(14));
        let (s, u) = (4, 2);
        let cov = build_covariance(&d, s, u).unwrap();
        let sampler = cov.sampler().unwrap();
        let mut rng = SimRng::seed_from_u64(15);
        let draws = 100_000;
        let mut emp = CMatrix::zeros(s * u, s * u);
        for _ in 0..draws {
            let h = sampler.sample(&mut rng);
            for r in 0..s * u {
                for k in 0..s * u {
                    emp[(r, k)] += h[r] * h[k].conj();
                }
            }
        }
        let emp = emp.scale(c(1.0 / draws as f64, 0.0));
        let rel = emp.sub(&cov.full).frobenius_norm() / cov.full.frobenius_norm();
        assert!(rel < 0.05, "relative error {rel}");
        // the Kronecker sampler and the dense factor target the same matrix
        let dense = crate::numerics::PsdFactor::new(&cov.full).unwrap();
        let rebuilt = dense.matrix().matmul(&dense.matrix().adjoint());
        assert!(rebuilt.sub(&cov.full).frobenius_norm() < 1e-9);
        let _ = kron(&cov.cov_tx, &cov.cov_rx);
    }

    #[test]
    fn circulant_surrogate_improves_with_array_size() {
        // With a 2° base-station spread the covariance is nearly rank one and
        // S <= 64 is still pre-asymptotic, so the trend is checked at 10°.
        use crate::pilots::QTransform;
        for (at, ar) in [(0.35, 0.6), (0.0, 0.0), (-0.9, 0.2), (0.5, -1.2), (1.0, 0.05)] {
            let d = Delta::single(at, ar, 35f64.to_radians(), 10f64.to_radians());
            let mut errs = Vec::new();
            for s in [8, 16, 32, 64] {
                let cov = build_covariance(&d, s, 2).unwrap();
                let spec = cov.circulant_spectrum();
                let q = QTransform::new(s, 2).dense();
                let diag = CMatrix::from_diag(&spec.iter().map(|&x| c(x, 0.0)).collect::<Vec<_>>());
                let approx = q.adjoint().matmul(&diag).matmul(&q);
                errs.push(cov.full.sub(&approx).frobenius_norm() / (2 * s) as f64);
            }
            assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
        }
    }

    #[test]
    fn config_json_roundtrip() {
        let cfg = cfg(3);
        let text = cfg.to_json();
        assert!(text.contains("\"S\"") && text.contains("\"spread_tx_deg\""));
        assert_eq!(ScenarioConfig::from_json_str(&text).unwrap(), cfg);
        let bad = text.replace("\"N\": 2", "\"N\": 0");
        assert!(ScenarioConfig::from_json_str(&bad).is_err());
    }

    #[test]
    fn reference_noise_variance_matches_draws_for_dft_pilots() {
        let cfg = cfg(3);
        let pilots = PilotSet::dft(cfg.s, cfg.u, cfg.n).unwrap();
        let nominal = reference_noise_variance(&cfg, &pilots).unwrap();
        let want = 10f64.powf(-cfg.snr_db / 10.0) * pilots.gain();
        assert!((nominal - want).abs() < 1e-12 * want, "{nominal} vs {want}");
        let mut rng = SimRng::seed_from_u64(9);
        for _ in 0..5 {
            let cov = build_covariance(&sample_delta(&cfg, &mut rng), cfg.s, cfg.u).unwrap();
            let v = noise_variance_for_snr(&cov, &pilots, cfg.snr_db).unwrap();
            assert!((v - nominal).abs() < 1e-10 * nominal);
        }
    }
}
