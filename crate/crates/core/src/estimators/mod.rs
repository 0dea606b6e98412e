//! Channel estimators: genie MMSE, gridded (GE), fast (FE) and the ML, LS and
//! genie-OMP baselines.

mod fast;
mod genie;
mod grid;
mod kron;
mod ls;
mod ml;
mod omp;

pub use fast::{fe_estimate, FastEstimator, FeParams};
pub use genie::{dense_filter, genie_mmse, observation_covariance};
pub use grid::{build_grid, ge_estimate, grid_deltas, FilterBank, GridFilters, GridForm};
pub use kron::KronFilter;
pub use ls::{ls_estimate, LsEstimate, LsSolver};
pub use ml::ml_estimate;
pub use omp::{omp_genie, omp_path, OmpDictionary, OMP_OVERSAMPLING};

/// Phase tolerance on `log|I − X W|`; the determinant is real positive in exact
/// arithmetic.
pub const LOG_DET_PHASE_TOL: f64 = 1e-6;
