use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::network::sample_loss_and_grad;
use super::params::{Activation, CnnGrads, CnnParams};
use crate::channel::{noise_variance_for_snr, reference_noise_variance, sample_delta, sample_observation, ChannelModel, ScenarioConfig};
use crate::error::{Error, Result};
use crate::estimators::FeParams;
use crate::numerics::{derive_seed, CircConv2d, SimRng};
use crate::pilots::{PilotSet, QTransform};

/// One training pair and the noise variance of its observation.
#[derive(Clone, Debug)]
pub struct Sample {
    pub y: Vec<Complex64>,
    pub h: Vec<Complex64>,
    pub sigma2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batches_per_epoch: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub l2_lambda: f64,
    pub init_std: f64,
    pub seed: u64,
    #[serde(with = "activation_serde")]
    pub activation: Activation,
}

mod activation_serde {
    use super::Activation;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(a: &Activation, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&a.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Activation, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 250,
            batches_per_epoch: 40,
            batch_size: 20,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            l2_lambda: 1e-5,
            init_std: 0.05,
            seed: 0,
            activation: Activation::Relu,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("train config: {m}")));
        if self.epochs == 0 || self.batches_per_epoch == 0 || self.batch_size == 0 {
            return bad("counts must be positive");
        }
        if !(self.adam_beta1 > 0.0 && self.adam_beta1 < 1.0 && self.adam_beta2 > 0.0 && self.adam_beta2 < 1.0) {
            return bad("Adam betas must lie in (0, 1)");
        }
        if !(self.learning_rate >= 0.0 && self.adam_eps > 0.0 && self.l2_lambda >= 0.0 && self.init_std > 0.0) {
            return bad("learning_rate, l2_lambda must be >= 0 and adam_eps, init_std > 0");
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }
}

/// Starting point of training.
#[derive(Clone, Debug)]
pub enum TrainInit {
    /// Truncated-normal kernels, zero biases.
    Random,
    /// Warm start from the fast estimator's kernels and bias.
    Fe,
    Params(CnnParams),
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: CnnParams,
    /// Mean training NMSE per epoch, measured before each batch's update.
    pub loss_history: Vec<f64>,
}

/// Fresh channel parameters, channel and observation from the scenario.
pub fn draw_training_sample<R: Rng + ?Sized>(
    model: &ChannelModel,
    scenario: &ScenarioConfig,
    pilots: &PilotSet,
    rng: &mut R,
) -> Result<Sample> {
    let delta = sample_delta(scenario, rng);
    let cov = model.covariance(&delta)?;
    let sigma2 = noise_variance_for_snr(&cov, pilots, scenario.snr_db)?;
    let obs = sample_observation(&cov.sampler()?, pilots, sigma2, rng)?;
    Ok(Sample { y: obs.y, h: obs.h, sigma2 })
}

/// Mini-batch Adam on freshly simulated samples. Each sample's generator is
/// seeded from `(seed, epoch, batch, index)` and batch gradients are reduced
/// in index order, so results do not depend on thread scheduling.
pub fn train(cfg: &TrainConfig, scenario: &ScenarioConfig, pilots: &PilotSet, init: TrainInit) -> Result<TrainOutcome> {
    cfg.validate()?;
    scenario.validate()?;
    if !pilots.is_orthogonal() {
        return Err(Error::NonOrthogonalPilots);
    }
    let (s, u) = (scenario.s, scenario.u);
    if pilots.s() != s || pilots.u() != u || pilots.n() != scenario.n {
        return Err(Error::InvalidArgument("pilots do not match the scenario".into()));
    }
    let mut params = match init {
        TrainInit::Random => {
            let mut rng = SimRng::seed_from_u64(derive_seed(cfg.seed, &[u64::MAX]));
            CnnParams::random(s, u, cfg.activation, cfg.init_std, &mut rng)?
        }
        TrainInit::Fe => {
            let sigma2 = reference_noise_variance(scenario, pilots)?;
            let fe = FeParams::broadside(pilots, scenario.spread_tx(), scenario.spread_rx(), sigma2)?;
            CnnParams { activation: cfg.activation, ..CnnParams::from_fe(&fe) }
        }
        TrainInit::Params(p) => {
            p.validate()?;
            if p.s != s || p.u != u {
                return Err(Error::InvalidArgument("initial parameters do not match the scenario".into()));
            }
            p
        }
    };

    let model = ChannelModel::new(s, u);
    let qt = QTransform::new(s, u);
    let conv = CircConv2d::new(s, u);
    let adam = cfg.adam();
    let mut state = AdamState::new(4 * s * u);
    let mut history = Vec::with_capacity(cfg.epochs);
    let norm = (s * u) as f64;

    for epoch in 0..cfg.epochs {
        let mut epoch_loss = 0.0;
        for batch in 0..cfg.batches_per_epoch {
            let results: Vec<(f64, CnnGrads)> = (0..cfg.batch_size)
                .into_par_iter()
                .map(|i| {
                    let seed = derive_seed(cfg.seed, &[epoch as u64, batch as u64, i as u64]);
                    let mut rng = SimRng::seed_from_u64(seed);
                    let sample = draw_training_sample(&model, scenario, pilots, &mut rng)?;
                    sample_loss_and_grad(&params, &conv, &sample, pilots, &qt)
                })
                .collect::<Result<_>>()?;
            let mut grads = CnnGrads::zeros(s * u);
            let mut batch_loss = 0.0;
            for (loss, g) in &results {
                batch_loss += loss;
                grads.add_assign(g);
            }
            if !batch_loss.is_finite() {
                return Err(Error::Diverged { epoch, batch });
            }
            grads.scale(1.0 / cfg.batch_size as f64);
            grads.add_l2(&params, cfg.l2_lambda);
            let mut flat = params.flatten();
            adam_step(&mut state, &mut flat, &grads.flatten(), &adam)?;
            if flat.iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged { epoch, batch });
            }
            params.set_flat(&flat)?;
            epoch_loss += batch_loss / (cfg.batch_size as f64 * norm);
        }
        history.push(epoch_loss / cfg.batches_per_epoch as f64);
    }
    Ok(TrainOutcome { params, loss_history: history })
}
