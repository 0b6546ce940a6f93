//! Linear-response CMOS baseline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CisParams {
    /// Full-well capacity in electrons.
    pub full_well: u32,
    /// Read noise, electrons r.m.s.
    pub read_noise: f64,
}

impl CisParams {
    pub fn new(full_well: u32, read_noise: f64) -> Result<Self> {
        if full_well < 1 {
            return Err(Error::domain("full-well capacity must be ≥ 1"));
        }
        if !read_noise.is_finite() || read_noise < 0.0 {
            return Err(Error::domain("read noise must be finite and ≥ 0"));
        }
        Ok(Self { full_well, read_noise })
    }
}

/// `E[Y] = min(θ, L)`.
pub fn cis_mean(theta: f64, params: &CisParams) -> f64 {
    theta.min(params.full_well as f64)
}

/// Linear SNR of a `K`-frame CIS sum; zero at and above full well.
pub fn cis_snr_linear(theta: f64, params: &CisParams, frames: u32) -> f64 {
    if theta <= 0.0 || theta >= params.full_well as f64 {
        return 0.0;
    }
    (frames as f64).sqrt() * theta / (theta + params.read_noise * params.read_noise).sqrt()
}

/// `20 log10(√K θ / √(θ + σ_read²))` below full well, `-∞` at or above it.
pub fn cis_snr_h(theta: f64, params: &CisParams, frames: u32) -> Result<f64> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::domain(format!("SNR undefined for θ = {theta}")));
    }
    if frames == 0 {
        return Err(Error::domain("frame count must be ≥ 1"));
    }
    Ok(20.0 * cis_snr_linear(theta, params, frames).log10())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CisWeights {
    pub weights: Vec<f64>,
    /// Every exposure saturated; all weight went to the shortest one.
    pub all_saturated: bool,
}

/// Exposure-proportional weights over the unsaturated exposures
/// (`Δ_m λ < L`).
pub fn cis_optimal_weights(durations: &[f64], flux: f64, full_well: f64) -> Result<CisWeights> {
    if durations.is_empty() {
        return Err(Error::domain("need at least one exposure"));
    }
    let raw: Vec<f64> = durations
        .iter()
        .map(|&d| if d * flux < full_well { d } else { 0.0 })
        .collect();
    let total: f64 = raw.iter().sum();
    if total > 0.0 {
        return Ok(CisWeights {
            weights: raw.iter().map(|w| w / total).collect(),
            all_saturated: false,
        });
    }
    let shortest = durations
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut weights = vec![0.0; durations.len()];
    weights[shortest] = 1.0;
    Ok(CisWeights {
        weights,
        all_saturated: true,
    })
}
