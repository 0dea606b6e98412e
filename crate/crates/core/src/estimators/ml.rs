use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::pilots::{PilotSet, QTransform};
use crate::structure::transformed_observation;

/// Structured-covariance ML estimate with clipped eigenvalues.
///
/// `s = |Q Xᴴ y|²`, `c = [s − σ²]₊`, and per transform bin
/// `ĥ_f[k] = c[k] / ((N/U) c[k] + σ²) · (Q Xᴴ y)[k]`, mapped back by `Qᴴ`.
pub fn ml_estimate(y: &[Complex64], pilots: &PilotSet, qt: &QTransform, sigma2: f64) -> Result<Vec<Complex64>> {
    if !pilots.is_orthogonal() {
        return Err(Error::NonOrthogonalPilots);
    }
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidArgument("noise variance must be positive".into()));
    }
    let g = pilots.gain();
    let mut u = transformed_observation(y, pilots, qt)?;
    for z in u.iter_mut() {
        let c = (z.norm_sqr() - sigma2).max(0.0);
        *z *= c / (g * c + sigma2);
    }
    qt.adjoint_in_place(&mut u);
    Ok(u)
}
