use crate::error::{ensure_len, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates and the step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grads: &[f64], cfg: &AdamConfig) -> Result<()> {
    ensure_len("adam_step params", state.m.len(), params.len())?;
    ensure_len("adam_step grads", state.m.len(), grads.len())?;
    state.t += 1;
    let c1 = 1.0 - cfg.beta1.powf(state.t as f64);
    let c2 = 1.0 - cfg.beta2.powf(state.t as f64);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let mhat = state.m[i] / c1;
        let vhat = state.v[i] / c2;
        params[i] -= cfg.learning_rate * mhat / (vhat.sqrt() + cfg.eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut st = AdamState::new(3);
        let mut p = vec![1.0, -2.0, 0.5];
        for _ in 0..5 {
            adam_step(&mut st, &mut p, &[0.0; 3], &AdamConfig::default()).unwrap();
        }
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn first_step_by_hand() {
        // m = 0.1 g, v = 0.001 g², corrections 0.1 and 0.001:
        // update = lr · g / (|g| + ε)
        let cfg = AdamConfig { learning_rate: 0.01, ..Default::default() };
        for g in [0.5, -3.0, 1e-9] {
            let mut st = AdamState::new(1);
            let mut p = vec![0.0];
            adam_step(&mut st, &mut p, &[g], &cfg).unwrap();
            let want = -0.01 * g / (g.abs() + 1e-8);
            assert!((p[0] - want).abs() < 1e-15, "{g}: {} vs {want}", p[0]);
            assert!((st.m[0] - 0.1 * g).abs() <= 1e-15 * g.abs());
            assert!((st.v[0] - 0.001 * g * g).abs() <= 1e-15 * g * g);
        }
    }

    #[test]
    fn constant_gradient_step_tends_to_learning_rate() {
        let cfg = AdamConfig { learning_rate: 1e-3, ..Default::default() };
        let mut st = AdamState::new(1);
        let mut p = vec![0.0];
        let mut prev = 0.0;
        let mut step = 0.0;
        for _ in 0..1000 {
            adam_step(&mut st, &mut p, &[0.37], &cfg).unwrap();
            step = prev - p[0];
            prev = p[0];
        }
        assert!((step / 1e-3 - 1.0).abs() < 0.01, "{step}");
    }

    #[test]
    fn length_mismatch() {
        let mut st = AdamState::new(2);
        assert!(adam_step(&mut st, &mut [0.0; 3], &[0.0; 3], &AdamConfig::default()).is_err());
    }
}
