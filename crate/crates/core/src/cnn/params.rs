use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{ensure_len, Error, Result};
use crate::estimators::FeParams;
use crate::numerics::flip2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Softmax,
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Softmax => "softmax",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "softmax" => Ok(Activation::Softmax),
            other => Err(Error::InvalidArgument(format!("unknown activation `{other}` (expected relu|softmax)"))),
        }
    }
}

/// Kernels and biases on the `S x U` grid (column-major `vec` order).
#[derive(Clone, Debug, PartialEq)]
pub struct CnnParams {
    pub s: usize,
    pub u: usize,
    pub activation: Activation,
    pub a1: Vec<f64>,
    pub b1: Vec<f64>,
    pub a2: Vec<f64>,
    pub b2: Vec<f64>,
}

/// Same layout as [`CnnParams`], holding gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct CnnGrads {
    pub a1: Vec<f64>,
    pub b1: Vec<f64>,
    pub a2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl CnnGrads {
    pub fn zeros(len: usize) -> Self {
        Self {
            a1: vec![0.0; len],
            b1: vec![0.0; len],
            a2: vec![0.0; len],
            b2: vec![0.0; len],
        }
    }

    pub fn add_assign(&mut self, other: &CnnGrads) {
        for (d, s) in self.slices_mut().into_iter().zip(other.slices()) {
            d.iter_mut().zip(s).for_each(|(a, b)| *a += b);
        }
    }

    pub fn scale(&mut self, f: f64) {
        for d in self.slices_mut() {
            d.iter_mut().for_each(|a| *a *= f);
        }
    }

    /// Adds the gradient of `λ (‖a1‖² + ‖a2‖²)`; biases are not regularized.
    pub fn add_l2(&mut self, params: &CnnParams, lambda: f64) {
        for (g, p) in [(&mut self.a1, &params.a1), (&mut self.a2, &params.a2)] {
            g.iter_mut().zip(p).for_each(|(g, p)| *g += 2.0 * lambda * p);
        }
    }

    pub fn slices(&self) -> [&[f64]; 4] {
        [&self.a1, &self.b1, &self.a2, &self.b2]
    }

    pub fn slices_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [&mut self.a1, &mut self.b1, &mut self.a2, &mut self.b2]
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.slices().concat()
    }
}

impl CnnParams {
    pub fn zeros(s: usize, u: usize, activation: Activation) -> Self {
        let z = vec![0.0; s * u];
        Self {
            s,
            u,
            activation,
            a1: z.clone(),
            b1: z.clone(),
            a2: z.clone(),
            b2: z,
        }
    }

    pub fn len(&self) -> usize {
        self.s * self.u
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Kernels from a normal distribution truncated at two standard
    /// deviations (rejection sampling); biases start at zero.
    pub fn random<R: Rng + ?Sized>(s: usize, u: usize, activation: Activation, init_std: f64, rng: &mut R) -> Result<Self> {
        let normal = Normal::new(0.0, init_std).map_err(|e| Error::InvalidArgument(format!("init_std: {e}")))?;
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|_| loop {
                    let v: f64 = normal.sample(rng);
                    if v.abs() <= 2.0 * init_std {
                        break v;
                    }
                })
                .collect()
        };
        let mut p = Self::zeros(s, u, activation);
        p.a1 = draw(s * u);
        p.a2 = draw(s * u);
        Ok(p)
    }

    /// The network that reproduces the fast estimator: `a1 = flip(w0)`,
    /// `b1 = b0·1`, `a2 = w0`, `b2 = 0`, softmax activation.
    pub fn from_fe(fe: &FeParams) -> Self {
        let mut p = Self::zeros(fe.s, fe.u, Activation::Softmax);
        p.a1 = flip2(&fe.w0, fe.s, fe.u);
        p.b1 = vec![fe.b0; fe.s * fe.u];
        p.a2 = fe.w0.clone();
        p
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.s * self.u;
        let named = [("CnnParams a1", &self.a1), ("CnnParams b1", &self.b1), ("CnnParams a2", &self.a2), ("CnnParams b2", &self.b2)];
        for (name, v) in named {
            ensure_len(name, n, v.len())?;
        }
        if self.slices().iter().any(|v| v.iter().any(|x| !x.is_finite())) {
            return Err(Error::NonFinite("CnnParams"));
        }
        Ok(())
    }

    pub fn slices(&self) -> [&[f64]; 4] {
        [&self.a1, &self.b1, &self.a2, &self.b2]
    }

    pub fn slices_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [&mut self.a1, &mut self.b1, &mut self.a2, &mut self.b2]
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.slices().concat()
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        let n = self.len();
        ensure_len("CnnParams::set_flat", 4 * n, flat.len())?;
        for (k, dst) in self.slices_mut().into_iter().enumerate() {
            dst.copy_from_slice(&flat[k * n..(k + 1) * n]);
        }
        Ok(())
    }

    /// Header `CNNv1 S U activation`, then `a1, b1, a2, b2`, one value per
    /// line (shortest round-trip decimal form).
    pub fn to_file_string(&self) -> String {
        let mut out = format!("CNNv1 {} {} {}\n", self.s, self.u, self.activation);
        for v in self.slices() {
            for x in v {
                out.push_str(&format!("{x}\n"));
            }
        }
        out
    }

    pub fn from_file_str(text: &str, source_name: &str) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            source_name: source_name.to_string(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (hl, header) = lines.next().ok_or_else(|| err(1, "empty model file".into()))?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        if toks.len() != 4 || toks[0] != "CNNv1" {
            return Err(err(hl + 1, "header must be `CNNv1 S U activation`".into()));
        }
        let dim = |t: &str| -> Result<usize> {
            match t.parse::<usize>() {
                Ok(v) if v > 0 => Ok(v),
                _ => Err(err(hl + 1, format!("bad dimension `{t}`"))),
            }
        };
        let (s, u) = (dim(toks[1])?, dim(toks[2])?);
        let activation: Activation = toks[3].parse().map_err(|e: Error| err(hl + 1, e.to_string()))?;
        let mut values = Vec::with_capacity(4 * s * u);
        for (i, line) in lines {
            for t in line.split_whitespace() {
                let v: f64 = t.parse().map_err(|e| err(i + 1, format!("bad number `{t}`: {e}")))?;
                if !v.is_finite() {
                    return Err(err(i + 1, "non-finite value".into()));
                }
                values.push(v);
            }
        }
        if values.len() != 4 * s * u {
            return Err(err(0, format!("expected {} values, found {}", 4 * s * u, values.len())));
        }
        let mut p = Self::zeros(s, u, activation);
        p.set_flat(&values)?;
        Ok(p)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_file_string())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_file_str(&text, &path.display().to_string())
    }
}
