use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{squared_error, EstimatorKind, PilotSource, ResultRow, SweepKind};
use crate::channel::{
    noise_variance_for_snr, reference_noise_variance, sample_delta, sample_observation, ChannelCovariance, ChannelModel,
    ScenarioConfig,
};
use crate::cnn::{train, CnnEstimator, CnnParams, TrainConfig, TrainInit};
use crate::error::{Error, Result};
use crate::estimators::{
    build_grid, genie_mmse, ge_estimate, ml_estimate, omp_genie, FastEstimator, FeParams, GridFilters, GridForm,
    LsSolver, OmpDictionary, OMP_OVERSAMPLING,
};
use crate::numerics::{derive_seed, SimRng};
use crate::pilots::{PilotSet, QTransform};

/// Where CNN parameters come from at each sweep point.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CnnSource {
    /// One model file shared by all points.
    Model(PathBuf),
    /// Per-point files; `{value}` is replaced by the sweep value.
    Template(String),
    /// Train a fresh model per point; the seed is split per point.
    Train(TrainConfig),
    /// In-memory parameters: one shared set or one per point.
    #[serde(skip)]
    Params(Vec<CnnParams>),
}

impl CnnSource {
    pub fn template_path(template: &str, value: f64) -> PathBuf {
        PathBuf::from(template.replace("{value}", &value.to_string()))
    }
}

fn default_ge_grid_factor() -> usize {
    16
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub kind: SweepKind,
    /// SNR in dB, pilot count `N` or BS antenna count `S`, ascending.
    pub values: Vec<f64>,
    pub fixed: ScenarioConfig,
    pub estimators: Vec<EstimatorKind>,
    pub num_draws: usize,
    pub seed: u64,
    #[serde(default)]
    pub pilots: PilotSource,
    /// GE grid size is `ge_grid_factor · S`.
    #[serde(default = "default_ge_grid_factor")]
    pub ge_grid_factor: usize,
    /// Use the transform-domain GE instead of dense filters.
    #[serde(default)]
    pub ge_structured: bool,
    /// Defaults to `2 · num_clusters · U`.
    #[serde(default)]
    pub omp_k_max: Option<usize>,
    #[serde(default)]
    pub cnn: Option<CnnSource>,
    /// Record median per-draw estimation time, measured on a second call after
    /// an untimed warm-up. Off by default so that output is byte-identical
    /// across runs.
    #[serde(default)]
    pub record_timing: bool,
}

impl SweepSpec {
    pub fn new(
        kind: SweepKind,
        values: Vec<f64>,
        fixed: ScenarioConfig,
        estimators: Vec<EstimatorKind>,
        num_draws: usize,
        seed: u64,
    ) -> Self {
        Self {
            kind,
            values,
            fixed,
            estimators,
            num_draws,
            seed,
            pilots: PilotSource::Dft,
            ge_grid_factor: default_ge_grid_factor(),
            ge_structured: false,
            omp_k_max: None,
            cnn: None,
            record_timing: false,
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        self.fixed.validate()?;
        if self.values.is_empty() {
            return bad("sweep values must be nonempty".into());
        }
        if self.values.iter().any(|v| !v.is_finite()) || self.values.windows(2).any(|w| w[1] < w[0]) {
            return bad("sweep values must be finite and sorted ascending".into());
        }
        if self.kind != SweepKind::Snr && self.values.iter().any(|v| *v < 1.0 || v.fract() != 0.0) {
            return bad(format!("{} sweep values must be positive integers", self.kind));
        }
        if self.num_draws == 0 {
            return bad("num_draws must be at least 1".into());
        }
        if self.estimators.is_empty() {
            return bad("no estimators selected".into());
        }
        if (1..self.estimators.len()).any(|i| self.estimators[..i].contains(&self.estimators[i])) {
            return bad("estimator listed twice".into());
        }
        if self.ge_grid_factor == 0 || self.omp_k_max == Some(0) {
            return bad("ge_grid_factor and omp_k_max must be positive".into());
        }
        if self.kind == SweepKind::Pilots && self.pilots != PilotSource::Dft {
            return bad("a pilot sweep requires DFT pilots".into());
        }
        let wants_cnn = self.estimators.contains(&EstimatorKind::Cnn);
        match &self.cnn {
            None if wants_cnn => bad("estimator `cnn` needs a model source".into()),
            Some(CnnSource::Params(p)) if p.len() != 1 && p.len() != self.values.len() => {
                bad("need one CNN parameter set, or one per sweep point".into())
            }
            Some(CnnSource::Train(cfg)) => cfg.validate(),
            _ => Ok(()),
        }
    }
}

/// Scenario at one sweep point.
pub fn point_scenario(spec: &SweepSpec, value: f64) -> ScenarioConfig {
    let mut cfg = spec.fixed.clone();
    match spec.kind {
        SweepKind::Snr => cfg.snr_db = value,
        SweepKind::Pilots => cfg.n = value as usize,
        SweepKind::Antennas => cfg.s = value as usize,
    }
    cfg
}

struct Draw {
    cov: ChannelCovariance,
    sigma2: f64,
    h: Vec<Complex64>,
    y: Vec<Complex64>,
}

/// Per-point state shared read-only by all draws.
struct Point {
    cfg: ScenarioConfig,
    pilots: PilotSet,
    qt: QTransform,
    model: ChannelModel,
    ge: Option<GridFilters>,
    fe: Option<FastEstimator>,
    ls: Option<LsSolver>,
    omp: Option<(OmpDictionary, usize)>,
    cnn: Option<CnnEstimator>,
}

impl Point {
    fn bare(cfg: ScenarioConfig, pilots: PilotSet) -> Self {
        let (s, u) = (cfg.s, cfg.u);
        Self {
            cfg,
            pilots,
            qt: QTransform::new(s, u),
            model: ChannelModel::new(s, u),
            ge: None,
            fe: None,
            ls: None,
            omp: None,
            cnn: None,
        }
    }

    fn prepare(spec: &SweepSpec, cfg: ScenarioConfig, pilots: PilotSet, cnn: Option<CnnParams>) -> Result<Self> {
        let mut p = Self::bare(cfg, pilots);
        let needs = |k| spec.estimators.contains(&k);
        let nominal = if needs(EstimatorKind::Ge) || needs(EstimatorKind::Fe) {
            reference_noise_variance(&p.cfg, &p.pilots)?
        } else {
            0.0
        };
        if needs(EstimatorKind::Ge) {
            let form = if spec.ge_structured { GridForm::Structured } else { GridForm::Dense };
            p.ge = Some(build_grid(&p.cfg, &p.pilots, nominal, spec.ge_grid_factor * p.cfg.s, form)?);
        }
        if needs(EstimatorKind::Fe) {
            let fe = FeParams::broadside(&p.pilots, p.cfg.spread_tx(), p.cfg.spread_rx(), nominal)?;
            p.fe = Some(FastEstimator::new(fe));
        }
        if needs(EstimatorKind::Ls) {
            p.ls = Some(LsSolver::new(&p.pilots)?);
        }
        if needs(EstimatorKind::Omp) {
            let k = spec.omp_k_max.unwrap_or(2 * p.cfg.num_clusters * p.cfg.u);
            p.omp = Some((OmpDictionary::new(p.cfg.s, OMP_OVERSAMPLING)?, k));
        }
        if let Some(params) = cnn {
            if (params.s, params.u) != (p.cfg.s, p.cfg.u) {
                return Err(Error::InvalidArgument(format!(
                    "CNN model is {}x{}, scenario needs {}x{}",
                    params.s, params.u, p.cfg.s, p.cfg.u
                )));
            }
            p.cnn = Some(CnnEstimator::new(params)?);
        }
        Ok(p)
    }

    fn draw(&self, seed: u64) -> Result<Draw> {
        let mut rng = SimRng::seed_from_u64(seed);
        let delta = sample_delta(&self.cfg, &mut rng);
        let cov = self.model.covariance(&delta)?;
        let sigma2 = noise_variance_for_snr(&cov, &self.pilots, self.cfg.snr_db)?;
        let obs = sample_observation(&cov.sampler()?, &self.pilots, sigma2, &mut rng)?;
        Ok(Draw { cov, sigma2, h: obs.h, y: obs.y })
    }

    fn estimate(&self, kind: EstimatorKind, d: &Draw) -> Result<Vec<Complex64>> {
        let missing = || Error::InvalidArgument(format!("estimator `{kind}` was not prepared"));
        let (pilots, qt) = (&self.pilots, &self.qt);
        match kind {
            EstimatorKind::Genie => genie_mmse(&d.y, &d.cov, pilots, d.sigma2),
            EstimatorKind::Ge => ge_estimate(&d.y, self.ge.as_ref().ok_or_else(missing)?, pilots, qt, d.sigma2),
            EstimatorKind::Fe => self.fe.as_ref().ok_or_else(missing)?.estimate(&d.y, pilots, qt, d.sigma2),
            EstimatorKind::Ml => ml_estimate(&d.y, pilots, qt, d.sigma2),
            EstimatorKind::Ls => self.ls.as_ref().ok_or_else(missing)?.estimate(&d.y),
            EstimatorKind::Omp => {
                let (dict, k) = self.omp.as_ref().ok_or_else(missing)?;
                omp_genie(&d.y, &d.h, pilots, dict, *k)
            }
            EstimatorKind::Cnn => self.cnn.as_ref().ok_or_else(missing)?.estimate(&d.y, pilots, qt, d.sigma2),
        }
    }
}

/// Loads or trains the CNN for every point before any evaluation starts, so
/// that all missing model files are reported together.
fn resolve_cnn(spec: &SweepSpec, pilots: &[PilotSet]) -> Result<Vec<Option<CnnParams>>> {
    if !spec.estimators.contains(&EstimatorKind::Cnn) {
        return Ok(vec![None; spec.values.len()]);
    }
    let source = spec.cnn.as_ref().ok_or_else(|| Error::InvalidArgument("estimator `cnn` needs a model source".into()))?;
    let load_all = |paths: Vec<PathBuf>| -> Result<Vec<Option<CnnParams>>> {
        let missing: Vec<PathBuf> = paths.iter().filter(|p| !p.is_file()).cloned().collect();
        if !missing.is_empty() {
            return Err(Error::MissingModels(missing));
        }
        paths.iter().map(|p| CnnParams::load(p).map(Some)).collect()
    };
    match source {
        CnnSource::Model(path) => load_all(vec![path.clone(); spec.values.len()]),
        CnnSource::Template(t) => load_all(spec.values.iter().map(|v| CnnSource::template_path(t, *v)).collect()),
        CnnSource::Params(list) => Ok((0..spec.values.len()).map(|i| Some(list[i.min(list.len() - 1)].clone())).collect()),
        CnnSource::Train(cfg) => spec
            .values
            .iter()
            .zip(pilots)
            .enumerate()
            .map(|(i, (v, pil))| {
                let cfg = TrainConfig { seed: derive_seed(cfg.seed, &[i as u64]), ..cfg.clone() };
                Ok(Some(train(&cfg, &point_scenario(spec, *v), pil, TrainInit::Random)?.params))
            })
            .collect(),
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Monte-Carlo NMSE of every selected estimator at every sweep point.
///
/// Draw `d` at point `i` is generated from `derive_seed(seed, [i, d])` and is
/// shared by all estimators. Draws run in parallel; errors are summed in draw
/// order, so results do not depend on the thread count.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let scenarios: Vec<ScenarioConfig> = spec.values.iter().map(|v| point_scenario(spec, *v)).collect();
    for cfg in &scenarios {
        cfg.validate()?;
    }
    let pilots: Vec<PilotSet> = scenarios
        .iter()
        .map(|c| spec.pilots.build(c.s, c.u, c.n))
        .collect::<Result<_>>()?;
    let models = resolve_cnn(spec, &pilots)?;

    let mut rows = Vec::with_capacity(spec.values.len() * spec.estimators.len());
    for (i, ((cfg, pil), cnn)) in scenarios.into_iter().zip(pilots).zip(models).enumerate() {
        let value = spec.values[i];
        let point = Point::prepare(spec, cfg, pil, cnn)?;
        let outcomes: Vec<Vec<(f64, f64)>> = (0..spec.num_draws)
            .into_par_iter()
            .map(|d| {
                let draw = point.draw(derive_seed(spec.seed, &[i as u64, d as u64]))?;
                spec.estimators
                    .iter()
                    .map(|&k| {
                        if !spec.record_timing {
                            return Ok((squared_error(&point.estimate(k, &draw)?, &draw.h), 0.0));
                        }
                        // untimed warm-up: draw synthesis leaves the caches cold
                        point.estimate(k, &draw)?;
                        let start = Instant::now();
                        let h_hat = point.estimate(k, &draw)?;
                        let ms = start.elapsed().as_secs_f64() * 1e3;
                        Ok((squared_error(&h_hat, &draw.h), ms))
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let norm = (spec.num_draws * point.cfg.s * point.cfg.u) as f64;
        for (e, &kind) in spec.estimators.iter().enumerate() {
            let total: f64 = outcomes.iter().map(|o| o[e].0).sum();
            rows.push(ResultRow {
                estimator: kind,
                sweep_kind: spec.kind,
                sweep_value: value,
                nmse: total / norm,
                draws: spec.num_draws,
                wall_time_ms: median(outcomes.iter().map(|o| o[e].1).collect()),
            });
        }
    }
    Ok(rows)
}

/// One simulated channel and observation, complex entries as `[re, im]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulatedDraw {
    pub sigma2: f64,
    pub h: Vec<[f64; 2]>,
    pub y: Vec<[f64; 2]>,
}

/// Draws the same `(h, y)` stream that a single-point sweep with this seed
/// would evaluate.
pub fn simulate(cfg: &ScenarioConfig, pilots: &PilotSource, num_draws: usize, seed: u64) -> Result<Vec<SimulatedDraw>> {
    cfg.validate()?;
    let point = Point::bare(cfg.clone(), pilots.build(cfg.s, cfg.u, cfg.n)?);
    let pair = |v: &[Complex64]| v.iter().map(|z| [z.re, z.im]).collect();
    (0..num_draws)
        .into_par_iter()
        .map(|d| {
            let draw = point.draw(derive_seed(seed, &[0, d as u64]))?;
            Ok(SimulatedDraw { sigma2: draw.sigma2, h: pair(&draw.h), y: pair(&draw.y) })
        })
        .collect()
}

/// One JSON object per line.
pub fn write_jsonl<W: Write>(draws: &[SimulatedDraw], mut out: W) -> Result<()> {
    for d in draws {
        serde_json::to_writer(&mut out, d)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}
