//! Poisson probabilities and the partial Poisson CDF
//! `Ψ_q(θ) = Σ_{k<q} θ^k e^{-θ} / k!`.
//!
//! All terms are formed in log space (log-gamma for the factorial) and
//! accumulated by ratio recurrences outward from the term nearest the mode,
//! so nothing overflows for θ up to ~10⁶ and beyond.

use crate::error::{Error, Result};

/// Relative size below which a tail term stops contributing.
const TAIL_STOP: f64 = 1e-19;

/// `ln P[ℓ = j]` for `ℓ ~ Poisson(θ)`.
#[inline]
pub fn ln_poisson_pmf(j: u64, theta: f64) -> f64 {
    if theta == 0.0 {
        return if j == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let j = j as f64;
    j * theta.ln() - theta - libm::lgamma(j + 1.0)
}

/// `P[ℓ = j]` for `ℓ ~ Poisson(θ)`; zero for negative `j`.
#[inline]
pub fn poisson_pmf(j: i64, theta: f64) -> f64 {
    if j < 0 {
        0.0
    } else {
        ln_poisson_pmf(j as u64, theta).exp()
    }
}

/// Partial Poisson CDF `Ψ_q(θ) = P[ℓ < q]`. `Ψ_0 = 0` (empty sum).
pub fn incomplete_gamma_psi(q: u64, theta: f64) -> Result<f64> {
    if !theta.is_finite() || theta < 0.0 {
        return Err(Error::domain(format!("Ψ_q requires finite θ ≥ 0, got {theta}")));
    }
    Ok(psi(q, theta))
}

/// Unchecked `Ψ_q(θ)`; callers guarantee `θ` is finite and non-negative.
pub(crate) fn psi(q: u64, theta: f64) -> f64 {
    if q == 0 {
        return 0.0;
    }
    if theta == 0.0 {
        return 1.0;
    }
    if (q - 1) as f64 <= theta {
        lower_tail(q - 1, theta)
    } else {
        1.0 - upper_tail(q, theta)
    }
}

/// Complement `1 - Ψ_q(θ) = P[ℓ ≥ q]`, accurate when it is tiny.
pub(crate) fn psi_complement(q: u64, theta: f64) -> f64 {
    if q == 0 {
        return 1.0;
    }
    if theta == 0.0 {
        return 0.0;
    }
    if (q - 1) as f64 <= theta {
        1.0 - lower_tail(q - 1, theta)
    } else {
        upper_tail(q, theta)
    }
}

/// `Σ_{k=0}^{top} pmf(k)` where `top ≤ θ`, so terms decrease walking down.
fn lower_tail(top: u64, theta: f64) -> f64 {
    let mut term = ln_poisson_pmf(top, theta).exp();
    if term == 0.0 {
        return 0.0;
    }
    let mut sum = term;
    let mut k = top;
    while k > 0 {
        term *= k as f64 / theta;
        sum += term;
        k -= 1;
        if term <= TAIL_STOP * sum {
            break;
        }
    }
    sum.min(1.0)
}

/// `Σ_{k≥start} pmf(k)` where `start > θ`, so terms decrease walking up.
fn upper_tail(start: u64, theta: f64) -> f64 {
    let mut term = ln_poisson_pmf(start, theta).exp();
    if term == 0.0 {
        return 0.0;
    }
    let mut sum = term;
    let mut k = start;
    loop {
        k += 1;
        term *= theta / k as f64;
        sum += term;
        if term <= TAIL_STOP * sum {
            break;
        }
    }
    sum.min(1.0)
}

/// Inclusive window `[lo, hi]` of Poisson(θ) outside which the pmf is
/// negligible (< ~1e-20 total mass).
pub(crate) fn poisson_window(theta: f64) -> (u64, u64) {
    let half = 10.0 * theta.sqrt() + 30.0;
    let lo = (theta - half).floor().max(0.0) as u64;
    let hi = (theta + half).ceil() as u64;
    (lo, hi)
}
