use crate::error::{Error, Result};

use super::gamma::{poisson_pmf, poisson_window};

/// Density of the pre-ADC reading `Z = ℓ + η` with `ℓ ~ Poisson(θ)` and
/// `η ~ N(0, σ²)`: a Poisson-weighted Gaussian mixture.
///
/// Only the Poisson window carrying all but ~1e-20 of the mass is summed.
pub fn pz_density(z: f64, theta: f64, sigma_read: f64) -> Result<f64> {
    if !(sigma_read > 0.0) || !sigma_read.is_finite() {
        return Err(Error::domain(format!(
            "density form needs σ_read > 0, got {sigma_read}; use the Poisson pmf for σ_read = 0"
        )));
    }
    if !theta.is_finite() || theta < 0.0 {
        return Err(Error::domain(format!("θ must be finite and ≥ 0, got {theta}")));
    }
    if !z.is_finite() {
        return Err(Error::domain("z must be finite"));
    }
    let (lo, hi) = poisson_window(theta);
    let norm = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * sigma_read);
    let inv_two_var = 1.0 / (2.0 * sigma_read * sigma_read);
    let density = (lo..=hi)
        .map(|l| {
            let d = z - l as f64;
            poisson_pmf(l as i64, theta) * (-d * d * inv_two_var).exp()
        })
        .sum::<f64>();
    Ok(norm * density)
}
