use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probabilities `p_k` that Gaussian read noise rounds to the integer `k`.
///
/// The support is symmetric, `-k_max ..= k_max`, truncated where the
/// two-sided tail mass drops below `truncation_epsilon`, then renormalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadNoisePmf {
    probs: Vec<f64>,
    k_max: i64,
    truncation_epsilon: f64,
}

/// Default tail mass discarded when truncating the read-noise pmf.
pub const DEFAULT_TRUNCATION_EPSILON: f64 = 1e-12;

/// `P[a < X < b]` for `X ~ N(0, σ²)` with `0 ≤ a < b`, via erfc so that
/// far-tail intervals keep their relative precision.
fn gaussian_interval(a: f64, b: f64, sigma: f64) -> f64 {
    let s = sigma * std::f64::consts::SQRT_2;
    0.5 * (libm::erfc(a / s) - libm::erfc(b / s))
}

impl ReadNoisePmf {
    pub fn new(sigma_read: f64, epsilon: f64) -> Result<Self> {
        if !sigma_read.is_finite() || sigma_read < 0.0 {
            return Err(Error::domain(format!(
                "read noise must be finite and ≥ 0, got {sigma_read}"
            )));
        }
        if !(epsilon > 0.0 && epsilon < 1e-3) {
            return Err(Error::domain(format!(
                "truncation epsilon must lie in (0, 1e-3), got {epsilon}"
            )));
        }
        if sigma_read == 0.0 {
            return Ok(Self {
                probs: vec![1.0],
                k_max: 0,
                truncation_epsilon: epsilon,
            });
        }

        let s = sigma_read * std::f64::consts::SQRT_2;
        // two-sided mass beyond |k| > k_max is erfc((k_max + 1/2) / (σ√2))
        let mut k_max: i64 = 0;
        while libm::erfc((k_max as f64 + 0.5) / s) >= epsilon {
            k_max += 1;
        }

        let half: Vec<f64> = (0..=k_max)
            .map(|k| {
                if k == 0 {
                    libm::erf(0.5 / s)
                } else {
                    gaussian_interval(k as f64 - 0.5, k as f64 + 0.5, sigma_read)
                }
            })
            .collect();
        let mut probs: Vec<f64> = half[1..].iter().rev().chain(half.iter()).copied().collect();
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);

        Ok(Self {
            probs,
            k_max,
            truncation_epsilon: epsilon,
        })
    }

    pub fn k_max(&self) -> i64 {
        self.k_max
    }

    pub fn truncation_epsilon(&self) -> f64 {
        self.truncation_epsilon
    }

    /// `p_k`, zero outside the retained support.
    pub fn prob(&self, k: i64) -> f64 {
        if k.abs() > self.k_max {
            0.0
        } else {
            self.probs[(k + self.k_max) as usize]
        }
    }

    /// `(k, p_k)` pairs in increasing `k`.
    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .map(move |(i, &p)| (i as i64 - self.k_max, p))
    }
}
