//! Monte-Carlo evaluation: sweep definitions, estimator selection, NMSE,
//! CSV output and desk-scale presets.

mod csv_io;
pub mod presets;
mod sweep;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pilots::PilotSet;

pub use csv_io::{emit_csv, parse_csv, read_csv, write_csv, CSV_HEADER};
pub use sweep::{
    point_scenario, run_sweep, simulate, write_jsonl, CnnSource, SimulatedDraw, SweepSpec,
};

/// Mean over draws of `‖h − ĥ‖² / (S U)`.
pub fn nmse(h_hats: &[Vec<Complex64>], hs: &[Vec<Complex64>], s: usize, u: usize) -> Result<f64> {
    if h_hats.is_empty() {
        return Err(Error::InvalidArgument("nmse needs at least one draw".into()));
    }
    if h_hats.len() != hs.len() {
        return Err(Error::dim("nmse draw count", hs.len(), h_hats.len()));
    }
    let mut total = 0.0;
    for (a, b) in h_hats.iter().zip(hs) {
        if a.len() != s * u || b.len() != s * u {
            return Err(Error::dim("nmse vector length", s * u, a.len().max(b.len())));
        }
        total += squared_error(a, b);
    }
    Ok(total / (h_hats.len() * s * u) as f64)
}

pub(crate) fn squared_error(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Genie,
    Ge,
    Fe,
    Ml,
    Ls,
    Omp,
    Cnn,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 7] = [
        EstimatorKind::Genie,
        EstimatorKind::Ge,
        EstimatorKind::Fe,
        EstimatorKind::Ml,
        EstimatorKind::Ls,
        EstimatorKind::Omp,
        EstimatorKind::Cnn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Genie => "genie",
            EstimatorKind::Ge => "ge",
            EstimatorKind::Fe => "fe",
            EstimatorKind::Ml => "ml",
            EstimatorKind::Ls => "ls",
            EstimatorKind::Omp => "omp",
            EstimatorKind::Cnn => "cnn",
        }
    }

    /// Comma-separated names, e.g. `genie,ge,fe`.
    pub fn parse_list(text: &str) -> Result<Vec<Self>> {
        let list: Vec<Self> = text
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect::<Result<_>>()?;
        if list.is_empty() {
            return Err(Error::InvalidArgument("estimator list is empty".into()));
        }
        Ok(list)
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown estimator `{s}` (expected genie|ge|fe|ml|ls|omp|cnn)")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    Snr,
    Pilots,
    #[serde(alias = "bs_antennas")]
    Antennas,
}

impl SweepKind {
    pub fn name(self) -> &'static str {
        match self {
            SweepKind::Snr => "snr",
            SweepKind::Pilots => "pilots",
            SweepKind::Antennas => "antennas",
        }
    }
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "snr" => Ok(SweepKind::Snr),
            "pilots" => Ok(SweepKind::Pilots),
            "antennas" | "bs_antennas" => Ok(SweepKind::Antennas),
            other => Err(Error::InvalidArgument(format!("unknown sweep kind `{other}` (expected snr|pilots|antennas)"))),
        }
    }
}

/// Pilot matrix choice: the DFT family or a file with header `U N`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum PilotSource {
    #[default]
    Dft,
    File(PathBuf),
}

impl PilotSource {
    pub fn build(&self, s: usize, u: usize, n: usize) -> Result<PilotSet> {
        let pilots = match self {
            PilotSource::Dft => PilotSet::dft(s, u, n)?,
            PilotSource::File(path) => PilotSet::from_file(s, path)?,
        };
        if pilots.u() != u || pilots.n() != n {
            return Err(Error::InvalidArgument(format!(
                "pilot file has U={} N={}, scenario needs U={u} N={n}",
                pilots.u(),
                pilots.n()
            )));
        }
        Ok(pilots)
    }
}

impl FromStr for PilotSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("dft") {
            Ok(PilotSource::Dft)
        } else if let Some(path) = t.strip_prefix("file:").filter(|p| !p.is_empty()) {
            Ok(PilotSource::File(PathBuf::from(path)))
        } else {
            Err(Error::InvalidArgument(format!("bad pilot source `{s}` (expected dft or file:<path>)")))
        }
    }
}

impl TryFrom<String> for PilotSource {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<PilotSource> for String {
    fn from(p: PilotSource) -> String {
        match p {
            PilotSource::Dft => "dft".into(),
            PilotSource::File(path) => format!("file:{}", path.display()),
        }
    }
}

/// One CSV row: NMSE of one estimator at one sweep point.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub estimator: EstimatorKind,
    pub sweep_kind: SweepKind,
    pub sweep_value: f64,
    pub nmse: f64,
    pub draws: usize,
    /// Median per-draw estimation time; 0 when timing is disabled.
    pub wall_time_ms: f64,
}
