use num_complex::Complex64;

use super::params::{Activation, CnnGrads, CnnParams};
use super::train::Sample;
use crate::error::{ensure_len, Result};
use crate::numerics::{flip2, softmax, CircConv2d};
use crate::pilots::{PilotSet, QTransform};
use crate::structure::{apply_diagonal_filter, fe_input_chat, transformed_observation};

/// Intermediates of one forward pass, consumed by [`cnn_backward`].
#[derive(Clone, Debug)]
pub struct ForwardCache {
    pub chat: Vec<f64>,
    pub z1: Vec<f64>,
    pub hidden: Vec<f64>,
}

fn activate(act: Activation, z: &[f64]) -> Vec<f64> {
    match act {
        Activation::Relu => z.iter().map(|v| v.max(0.0)).collect(),
        Activation::Softmax => softmax(z),
    }
}

/// `w = a2 ⋆ ψ(a1 ⋆ ĉ + b1) + b2`.
pub fn cnn_forward(params: &CnnParams, conv: &CircConv2d, chat: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
    ensure_len("cnn_forward input", params.len(), chat.len())?;
    ensure_len("cnn_forward grid", params.len(), conv.len())?;
    let z1: Vec<f64> = conv.apply(&params.a1, chat)?.into_iter().zip(&params.b1).map(|(z, b)| z + b).collect();
    let hidden = activate(params.activation, &z1);
    let w = conv.apply(&params.a2, &hidden)?.into_iter().zip(&params.b2).map(|(z, b)| z + b).collect();
    Ok((w, ForwardCache { chat: chat.to_vec(), z1, hidden }))
}

/// `∂/∂w ‖Q h − w ⊙ u‖² = −2 Re(conj(u) ⊙ (Q h − w ⊙ u))`, which equals the
/// gradient of `‖h − ĥ‖²` since `Q` is unitary.
pub fn output_gradient(u: &[Complex64], qh: &[Complex64], w: &[f64]) -> Vec<f64> {
    u.iter()
        .zip(qh)
        .zip(w)
        .map(|((uk, hk), wk)| -2.0 * (uk.conj() * (hk - uk * wk)).re)
        .collect()
}

/// Backpropagates `gw = ∂L/∂w` through both convolution layers. Adjoint of
/// `x ↦ a ⋆ x` is `g ↦ flip(a) ⋆ g`; the kernel gradient is `flip(x) ⋆ g`.
pub fn cnn_backward(params: &CnnParams, conv: &CircConv2d, cache: &ForwardCache, gw: &[f64]) -> Result<CnnGrads> {
    let (s, u) = (params.s, params.u);
    ensure_len("cnn_backward gradient", params.len(), gw.len())?;
    let ga2 = conv.apply(&flip2(&cache.hidden, s, u), gw)?;
    let gh = conv.apply(&flip2(&params.a2, s, u), gw)?;
    let gz: Vec<f64> = match params.activation {
        // subgradient 0 at the kink
        Activation::Relu => gh.iter().zip(&cache.z1).map(|(g, z)| if *z > 0.0 { *g } else { 0.0 }).collect(),
        Activation::Softmax => {
            let dot: f64 = cache.hidden.iter().zip(&gh).map(|(p, g)| p * g).sum();
            cache.hidden.iter().zip(&gh).map(|(p, g)| p * (g - dot)).collect()
        }
    };
    let ga1 = conv.apply(&flip2(&cache.chat, s, u), &gz)?;
    Ok(CnnGrads {
        a1: ga1,
        b1: gz,
        a2: ga2,
        b2: gw.to_vec(),
    })
}

/// Loss `‖h − ĥ‖²` of one sample and its gradient (no regularization).
pub fn sample_loss_and_grad(
    params: &CnnParams,
    conv: &CircConv2d,
    sample: &Sample,
    pilots: &PilotSet,
    qt: &QTransform,
) -> Result<(f64, CnnGrads)> {
    let u = transformed_observation(&sample.y, pilots, qt)?;
    let chat: Vec<f64> = u.iter().map(|z| z.norm_sqr() / sample.sigma2).collect();
    let mut qh = sample.h.clone();
    qt.forward_in_place(&mut qh);
    let (w, cache) = cnn_forward(params, conv, &chat)?;
    let loss = qh.iter().zip(&u).zip(&w).map(|((h, x), g)| (h - x * g).norm_sqr()).sum();
    let gw = output_gradient(&u, &qh, &w);
    Ok((loss, cnn_backward(params, conv, &cache, &gw)?))
}

/// Inference with precomputed kernel spectra.
#[derive(Clone, Debug)]
pub struct CnnEstimator {
    params: CnnParams,
    conv: CircConv2d,
    a1_spec: Vec<Complex64>,
    a2_spec: Vec<Complex64>,
}

impl CnnEstimator {
    pub fn new(params: CnnParams) -> Result<Self> {
        params.validate()?;
        let conv = CircConv2d::new(params.s, params.u);
        let a1_spec = conv.spectrum(&params.a1);
        let a2_spec = conv.spectrum(&params.a2);
        Ok(Self { params, conv, a1_spec, a2_spec })
    }

    pub fn params(&self) -> &CnnParams {
        &self.params
    }

    pub fn filter(&self, chat: &[f64]) -> Result<Vec<f64>> {
        ensure_len("CNN input", self.conv.len(), chat.len())?;
        let z1: Vec<f64> = self
            .conv
            .apply_spectrum(&self.a1_spec, chat)
            .into_iter()
            .zip(&self.params.b1)
            .map(|(z, b)| z + b)
            .collect();
        let hidden = activate(self.params.activation, &z1);
        Ok(self
            .conv
            .apply_spectrum(&self.a2_spec, &hidden)
            .into_iter()
            .zip(&self.params.b2)
            .map(|(z, b)| z + b)
            .collect())
    }

    pub fn estimate(&self, y: &[Complex64], pilots: &PilotSet, qt: &QTransform, sigma2: f64) -> Result<Vec<Complex64>> {
        let chat = fe_input_chat(y, pilots, qt, sigma2)?;
        apply_diagonal_filter(&self.filter(&chat)?, y, pilots, qt)
    }
}

/// `ĥ = Qᴴ diag(w(ĉ)) Q Xᴴ y`.
pub fn cnn_estimate(params: &CnnParams, y: &[Complex64], pilots: &PilotSet, qt: &QTransform, sigma2: f64) -> Result<Vec<Complex64>> {
    CnnEstimator::new(params.clone())?.estimate(y, pilots, qt, sigma2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{FastEstimator, FeParams};
    use crate::numerics::{complex_gaussian_vec, SimRng};
    use crate::structure::diablk_expand;
    use crate::structure::DiablkVector;
    use rand::{Rng, SeedableRng};

    fn e0(n: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[0] = 1.0;
        v
    }

    #[test]
    fn identity_network_on_nonnegative_input() {
        let mut p = CnnParams::zeros(4, 2, Activation::Relu);
        p.a1 = e0(8);
        p.a2 = e0(8);
        let chat: Vec<f64> = (0..8).map(|k| k as f64 * 0.5).collect();
        let (w, _) = cnn_forward(&p, &CircConv2d::new(4, 2), &chat).unwrap();
        assert!(w.iter().zip(&chat).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn constant_output_network() {
        let mut rng = SimRng::seed_from_u64(1);
        let mut p = CnnParams::random(4, 2, Activation::Softmax, 0.3, &mut rng).unwrap();
        p.a2 = vec![0.0; 8];
        p.b2 = vec![0.25; 8];
        let chat: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..5.0)).collect();
        let (w, _) = cnn_forward(&p, &CircConv2d::new(4, 2), &chat).unwrap();
        assert!(w.iter().all(|v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn reproduces_fast_estimator() {
        let mut rng = SimRng::seed_from_u64(2);
        for (s, u) in [(2, 2), (8, 2), (16, 2), (5, 3)] {
            let w0: Vec<f64> = (0..s * u).map(|_| rng.random_range(0.0..1.0)).collect();
            let fe = FeParams::new(s, u, w0, rng.random_range(-4.0..0.0)).unwrap();
            let cnn = CnnParams::from_fe(&fe);
            let chat: Vec<f64> = (0..s * u).map(|_| rng.random_range(0.0..20.0)).collect();
            let want = FastEstimator::new(fe).filter(&chat).unwrap();
            let (got, _) = cnn_forward(&cnn, &CircConv2d::new(s, u), &chat).unwrap();
            assert!(got.iter().zip(&want).all(|(a, b)| (a - b).abs() < 1e-10));
        }
    }

    #[test]
    fn estimate_special_cases_and_dense_oracle() {
        let mut rng = SimRng::seed_from_u64(3);
        let (s, u) = (4, 2);
        let pilots = PilotSet::dft(s, u, u).unwrap();
        let qt = QTransform::new(s, u);
        let y = complex_gaussian_vec(&mut rng, s * u);
        let p = CnnParams::zeros(s, u, Activation::Relu);
        assert!(cnn_estimate(&p, &y, &pilots, &qt, 1.0).unwrap().iter().all(|z| z.norm() < 1e-15));
        let mut ones = p.clone();
        ones.b2 = vec![1.0; s * u];
        let est = cnn_estimate(&ones, &y, &pilots, &qt, 1.0).unwrap();
        let xhy = pilots.apply_xh(&y).unwrap();
        assert!(est.iter().zip(&xhy).all(|(a, b)| (a - b).norm() < 1e-12));

        let rp = CnnParams::random(s, u, Activation::Relu, 0.5, &mut rng).unwrap();
        let chat = fe_input_chat(&y, &pilots, &qt, 0.7).unwrap();
        let (w, _) = cnn_forward(&rp, &CircConv2d::new(s, u), &chat).unwrap();
        let wd = DiablkVector::from_block_diagonal(s, u, &w.iter().map(|&v| Complex64::new(v, 0.0)).collect::<Vec<_>>()).unwrap();
        let q = qt.dense();
        let want = q
            .adjoint()
            .matmul(&diablk_expand(&wd))
            .matmul(&q)
            .matmul(&pilots.x_lifted().adjoint())
            .matvec(&y);
        let got = cnn_estimate(&rp, &y, &pilots, &qt, 0.7).unwrap();
        assert!(got.iter().zip(&want).all(|(a, b)| (a - b).norm() < 1e-10));
    }

    #[test]
    fn zero_residual_gives_zero_output_layer_gradient() {
        let mut rng = SimRng::seed_from_u64(4);
        let (s, u) = (2, 2);
        let pilots = PilotSet::dft(s, u, 2).unwrap();
        let qt = QTransform::new(s, u);
        let p = CnnParams::random(s, u, Activation::Relu, 0.5, &mut rng).unwrap();
        let y = complex_gaussian_vec(&mut rng, 4);
        // choose h equal to the estimate, so the residual vanishes
        let h = cnn_estimate(&p, &y, &pilots, &qt, 0.5).unwrap();
        let sample = Sample { y, h, sigma2: 0.5 };
        let (loss, g) = sample_loss_and_grad(&p, &CircConv2d::new(s, u), &sample, &pilots, &qt).unwrap();
        assert!(loss < 1e-25);
        assert!(g.a2.iter().chain(&g.b2).all(|v| v.abs() < 1e-12));
    }
}
