//! Pilot matrices, the Kronecker lift `X = X′ᵀ ⊗ I_S`, and the unitary
//! transform `Q = F_U ⊗ F_S`.
//!
//! Vectors of length `S*U` are `vec(H)` for an `S x U` matrix `H`
//! (column-major, index `s + S*u`); vectors of length `S*N` are `vec(Y)`.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{ensure_len, Error, Result};
use crate::numerics::{kron, CMatrix, Fft2};

/// Tolerance for classifying a pilot matrix as orthogonal.
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct PilotSet {
    s: usize,
    x_small: CMatrix,
    x_lifted: CMatrix,
    is_orthogonal: bool,
}

impl PilotSet {
    /// Wraps an explicit `U x N` pilot matrix for an `S`-antenna receiver.
    pub fn from_matrix(s: usize, x_small: CMatrix) -> Result<Self> {
        if s == 0 || x_small.rows() == 0 || x_small.cols() == 0 {
            return Err(Error::InvalidArgument("pilot dimensions must be positive".into()));
        }
        let x_lifted = kron(&x_small.transpose(), &CMatrix::identity(s));
        let (u, n) = (x_small.rows(), x_small.cols());
        let target = n as f64 / u as f64;
        let gram = x_small.matmul(&x_small.adjoint());
        let dev = CMatrix::identity(u)
            .scale(Complex64::new(target, 0.0))
            .sub(&gram)
            .frobenius_norm();
        Ok(Self {
            s,
            x_small,
            x_lifted,
            is_orthogonal: dev < ORTHOGONALITY_TOL,
        })
    }

    /// `X′ = F_{U×N} / sqrt(U)` with `F_{U×N}` the first `U` rows of the
    /// `N x N` DFT matrix with unit-modulus entries `exp(-2πi un/N)`.
    pub fn dft(s: usize, u: usize, n: usize) -> Result<Self> {
        if u > n {
            return Err(Error::InvalidArgument(format!(
                "DFT pilots need U <= N (got U={u}, N={n})"
            )));
        }
        if u == 0 {
            return Err(Error::InvalidArgument("U must be positive".into()));
        }
        let scale = 1.0 / (u as f64).sqrt();
        let x_small = CMatrix::from_fn(u, n, |r, c| {
            Complex64::from_polar(scale, -2.0 * PI * ((r * c) % n) as f64 / n as f64)
        });
        let mut set = Self::from_matrix(s, x_small)?;
        // exact by construction; immune to rounding in the classification
        set.is_orthogonal = true;
        Ok(set)
    }

    /// Reads `U N` on the first line followed by `U*N` complex entries as
    /// `re im` pairs in row-major order.
    pub fn from_file(s: usize, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_file_contents(s, &text, &path.display().to_string())
    }

    pub fn from_file_contents(s: usize, text: &str, source_name: &str) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse {
            source_name: source_name.to_string(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "empty pilot file".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(hline + 1, format!("bad header: {e}")))?;
        if dims.len() != 2 || dims[0] == 0 || dims[1] == 0 {
            return Err(parse_err(hline + 1, "header must be `U N` with positive values".into()));
        }
        let (u, n) = (dims[0], dims[1]);
        let mut values = Vec::with_capacity(2 * u * n);
        for (i, line) in lines {
            for tok in line.split_whitespace() {
                let v: f64 = tok
                    .parse()
                    .map_err(|e| parse_err(i + 1, format!("bad number `{tok}`: {e}")))?;
                values.push(v);
            }
        }
        if values.len() != 2 * u * n {
            return Err(parse_err(
                0,
                format!("expected {} numbers, found {}", 2 * u * n, values.len()),
            ));
        }
        let data = values.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect();
        Self::from_matrix(s, CMatrix::new(u, n, data)?)
    }

    pub fn to_file_contents(&self) -> String {
        let mut out = format!("{} {}\n", self.u(), self.n());
        for r in 0..self.u() {
            let row: Vec<String> = self
                .x_small
                .row(r)
                .iter()
                .map(|z| format!("{} {}", z.re, z.im))
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn u(&self) -> usize {
        self.x_small.rows()
    }

    pub fn n(&self) -> usize {
        self.x_small.cols()
    }

    pub fn x_small(&self) -> &CMatrix {
        &self.x_small
    }

    pub fn x_lifted(&self) -> &CMatrix {
        &self.x_lifted
    }

    pub fn is_orthogonal(&self) -> bool {
        self.is_orthogonal
    }

    /// `N / U`, the scale of `XᴴX` for orthogonal pilots.
    pub fn gain(&self) -> f64 {
        self.n() as f64 / self.u() as f64
    }

    /// `G = conj(X′ X′ᴴ)`, so that `XᴴX = G ⊗ I_S`.
    pub fn gram_small(&self) -> CMatrix {
        self.x_small.matmul(&self.x_small.adjoint()).conj()
    }

    /// `X h = vec(H X′)`.
    pub fn apply_x(&self, h: &[Complex64]) -> Result<Vec<Complex64>> {
        let (s, u, n) = (self.s, self.u(), self.n());
        ensure_len("apply_x", s * u, h.len())?;
        let mut y = vec![Complex64::new(0.0, 0.0); s * n];
        for col in 0..n {
            let out = &mut y[col * s..(col + 1) * s];
            for k in 0..u {
                let x = self.x_small[(k, col)];
                for (o, hv) in out.iter_mut().zip(&h[k * s..(k + 1) * s]) {
                    *o += hv * x;
                }
            }
        }
        Ok(y)
    }

    /// `Xᴴ y = vec(Y X′ᴴ)` in `O(SUN)`.
    pub fn apply_xh(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        let (s, u, n) = (self.s, self.u(), self.n());
        ensure_len("apply_xh", s * n, y.len())?;
        let mut out = vec![Complex64::new(0.0, 0.0); s * u];
        for k in 0..u {
            let dst = &mut out[k * s..(k + 1) * s];
            for col in 0..n {
                let x = self.x_small[(k, col)].conj();
                for (o, yv) in dst.iter_mut().zip(&y[col * s..(col + 1) * s]) {
                    *o += yv * x;
                }
            }
        }
        Ok(out)
    }
}

/// Direction for [`QTransform::apply`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Adjoint,
}

/// Matrix-free `Q = F_U ⊗ F_S` (unitary DFTs).
#[derive(Clone, Debug)]
pub struct QTransform {
    fft: Fft2,
}

impl QTransform {
    pub fn new(s: usize, u: usize) -> Self {
        Self { fft: Fft2::new(s, u) }
    }

    pub fn s(&self) -> usize {
        self.fft.rows()
    }

    pub fn u(&self) -> usize {
        self.fft.cols()
    }

    pub fn len(&self) -> usize {
        self.fft.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn fft(&self) -> &Fft2 {
        &self.fft
    }

    pub fn forward_in_place(&self, v: &mut [Complex64]) {
        self.fft.forward_unitary(v);
    }

    pub fn adjoint_in_place(&self, v: &mut [Complex64]) {
        self.fft.inverse_unitary(v);
    }

    pub fn apply(&self, v: &[Complex64], dir: Direction) -> Result<Vec<Complex64>> {
        ensure_len("QTransform::apply", self.len(), v.len())?;
        let mut out = v.to_vec();
        match dir {
            Direction::Forward => self.forward_in_place(&mut out),
            Direction::Adjoint => self.adjoint_in_place(&mut out),
        }
        Ok(out)
    }

    /// Dense `Q`, for tests and small-size oracles.
    pub fn dense(&self) -> CMatrix {
        use crate::numerics::DftMatrix;
        kron(&DftMatrix::new(self.u()).matrix(), &DftMatrix::new(self.s()).matrix())
    }
}

/// Convenience matching the free-function form: `apply_q(v, dir)`.
pub fn apply_q(qt: &QTransform, v: &[Complex64], dir: Direction) -> Result<Vec<Complex64>> {
    qt.apply(v, dir)
}
