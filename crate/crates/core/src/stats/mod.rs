//! Exact statistics of the quantized Poisson–Gaussian pixel response.
//!
//! A jot collects `ℓ ~ Poisson(θ)` electrons, picks up Gaussian read noise,
//! and the ADC rounds and clips the result to `0..=L`. Because rounding
//! commutes with integer shifts, the output is `clamp(ℓ + k, 0, L)` where `k`
//! is the rounded read noise with probabilities `p_k`. Everything in this
//! module follows from that representation.

mod density;
mod gamma;
mod read_noise;

pub use density::pz_density;
pub use gamma::{incomplete_gamma_psi, ln_poisson_pmf, poisson_pmf};
pub use read_noise::{ReadNoisePmf, DEFAULT_TRUNCATION_EPSILON};

pub(crate) use gamma::{poisson_window, psi, psi_complement};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physics of one jot: ADC clip level, read noise and dark current.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorParams {
    /// Full-scale ADC code `L` in electrons. `L = 1` is single-bit mode.
    pub clip_level: u32,
    /// Read noise, electrons r.m.s.
    pub read_noise: f64,
    /// Dark current, electrons per second.
    pub dark_current: f64,
}

impl SensorParams {
    pub fn new(clip_level: u32, read_noise: f64, dark_current: f64) -> Result<Self> {
        let p = Self {
            clip_level,
            read_noise,
            dark_current,
        };
        p.validate()?;
        Ok(p)
    }

    /// Sensor with `bits`-bit ADC, i.e. `L = 2^bits - 1`.
    pub fn with_bits(bits: u32, read_noise: f64, dark_current: f64) -> Result<Self> {
        if bits == 0 || bits > 16 {
            return Err(Error::domain(format!("bit depth must be 1..=16, got {bits}")));
        }
        Self::new((1u32 << bits) - 1, read_noise, dark_current)
    }

    pub fn validate(&self) -> Result<()> {
        if self.clip_level < 1 {
            return Err(Error::domain("clip level L must be ≥ 1"));
        }
        if !self.read_noise.is_finite() || self.read_noise < 0.0 {
            return Err(Error::domain(format!(
                "read noise must be finite and ≥ 0, got {}",
                self.read_noise
            )));
        }
        if !self.dark_current.is_finite() || self.dark_current < 0.0 {
            return Err(Error::domain(format!(
                "dark current must be finite and ≥ 0, got {}",
                self.dark_current
            )));
        }
        Ok(())
    }

    pub fn is_single_bit(&self) -> bool {
        self.clip_level == 1
    }

    /// Total Poisson mean for a signal mean `theta` integrated over `exposure`
    /// seconds: dark electrons are folded in here.
    pub fn total_mean(&self, theta: f64, exposure: f64) -> f64 {
        theta + self.dark_current * exposure
    }
}

/// Mean, variance and response slope of one ADC reading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelStats {
    pub mean: f64,
    pub variance: f64,
    /// `dμ_Y/dθ`.
    pub slope: f64,
}

impl PixelStats {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Distribution of a single ADC code at a fixed `θ`: point masses at `0` and
/// `L`, plus interior codes `first..first + interior.len()`. The `d_*`
/// fields hold the θ-derivatives of the same probabilities.
#[derive(Debug, Clone)]
pub struct CodeDistribution {
    pub clip_level: u64,
    pub p_zero: f64,
    pub p_full: f64,
    pub first: u64,
    pub interior: Vec<f64>,
    pub d_zero: f64,
    pub d_full: f64,
    pub d_interior: Vec<f64>,
}

impl CodeDistribution {
    /// `(code, probability)` pairs with non-zero support.
    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        std::iter::once((0, self.p_zero))
            .chain(
                self.interior
                    .iter()
                    .enumerate()
                    .map(move |(i, &p)| (self.first + i as u64, p)),
            )
            .chain(std::iter::once((self.clip_level, self.p_full)))
    }
}

/// A sensor with its read-noise pmf precomputed; the workhorse behind
/// [`pixel_stats`] for callers that evaluate many `θ`.
#[derive(Debug, Clone)]
pub struct PixelModel {
    params: SensorParams,
    pmf: ReadNoisePmf,
}

impl PixelModel {
    pub fn new(params: SensorParams) -> Result<Self> {
        params.validate()?;
        let pmf = ReadNoisePmf::new(params.read_noise, DEFAULT_TRUNCATION_EPSILON)?;
        Ok(Self { params, pmf })
    }

    pub fn params(&self) -> &SensorParams {
        &self.params
    }

    pub fn read_noise_pmf(&self) -> &ReadNoisePmf {
        &self.pmf
    }

    fn check_theta(theta: f64) -> Result<()> {
        if !theta.is_finite() || theta < 0.0 {
            return Err(Error::domain(format!("θ must be finite and ≥ 0, got {theta}")));
        }
        Ok(())
    }

    /// Full distribution of the output code and its θ-derivative.
    pub fn code_distribution(&self, theta: f64) -> Result<CodeDistribution> {
        Self::check_theta(theta)?;
        Ok(self.code_distribution_unchecked(theta))
    }

    fn code_distribution_unchecked(&self, theta: f64) -> CodeDistribution {
        let l = self.params.clip_level as i64;
        let k_max = self.pmf.k_max();
        let (wlo, whi) = poisson_window(theta);
        let (wlo, whi) = (wlo as i64, whi as i64);
        let pois_lo = (wlo - 1).max(0);
        let pois: Vec<f64> = (pois_lo..=whi + 1).map(|j| poisson_pmf(j, theta)).collect();
        let pois_at = |j: i64| -> f64 {
            if j < pois_lo || j > whi + 1 {
                0.0
            } else {
                pois[(j - pois_lo) as usize]
            }
        };

        let first = (wlo - k_max).max(1);
        let last = (whi + k_max + 1).min(l - 1);
        let n_interior = (last - first + 1).max(0) as usize;
        let mut interior = vec![0.0; n_interior];
        let mut d_interior = vec![0.0; n_interior];
        let (mut p_zero, mut p_full, mut d_zero, mut d_full) = (0.0, 0.0, 0.0, 0.0);

        for (k, pk) in self.pmf.iter() {
            // code 0 <=> ℓ ≤ -k
            if k <= 0 {
                p_zero += pk * psi((1 - k) as u64, theta);
                d_zero -= pk * pois_at(-k);
            }
            // code L <=> ℓ ≥ L - k
            let q = l - k;
            p_full += pk * psi_complement(q.max(0) as u64, theta);
            if q >= 1 {
                d_full += pk * pois_at(q - 1);
            }
            for (i, (p, d)) in interior.iter_mut().zip(d_interior.iter_mut()).enumerate() {
                let j = first + i as i64 - k;
                let here = pois_at(j);
                *p += pk * here;
                *d += pk * (pois_at(j - 1) - here);
            }
        }

        CodeDistribution {
            clip_level: l as u64,
            p_zero,
            p_full,
            first: first as u64,
            interior,
            d_zero,
            d_full,
            d_interior,
        }
    }

    /// Mean, variance and slope of one reading at Poisson mean `theta`.
    pub fn stats(&self, theta: f64) -> Result<PixelStats> {
        Self::check_theta(theta)?;
        Ok(self.stats_unchecked(theta))
    }

    pub(crate) fn stats_unchecked(&self, theta: f64) -> PixelStats {
        let dist = self.code_distribution_unchecked(theta);
        let l = dist.clip_level as f64;
        let mut mean = l * dist.p_full;
        let mut deficit = l * dist.p_zero;
        let mut slope = l * dist.d_full;
        for (i, (&p, &d)) in dist.interior.iter().zip(&dist.d_interior).enumerate() {
            let y = (dist.first + i as u64) as f64;
            mean += y * p;
            deficit += (l - y) * p;
            slope += y * d;
        }
        // centre on whichever end keeps the most significant digits
        let center = if mean <= 0.5 * l { mean } else { l - deficit };
        let mut variance = dist.p_zero * center * center + dist.p_full * (l - center) * (l - center);
        for (i, &p) in dist.interior.iter().enumerate() {
            let dy = (dist.first + i as u64) as f64 - center;
            variance += p * dy * dy;
        }
        PixelStats {
            mean: center,
            variance: variance.max(0.0),
            slope: slope.max(0.0),
        }
    }

    /// The read-noise terms `(Δ_μ, Δ_σ²)` that turn the noise-free truncated
    /// Poisson moments into the noisy ones:
    ///
    /// `μ_Y = θ Ψ_{L-1}(θ) + L(1 - Ψ_L(θ)) + Δ_μ`
    /// `E[Y²] = L² - Σ_{q<L} (2q+1) Ψ_{q+1}(θ) + Δ_σ²`
    ///
    /// Each shift `k` contributes `Σ_{q=[k]+}^{L-1} (P(q-k) - P(q)) q^j +
    /// L^j (Ψ_L - Ψ_{[L-k]+})`. For `k ≥ 2` the codes `q < k` are unreachable,
    /// so their noise-free mass `Σ_{q<min(k,L)} q^j P(q)` is removed as well.
    pub fn read_noise_corrections(&self, theta: f64) -> Result<(f64, f64)> {
        Self::check_theta(theta)?;
        let l = self.params.clip_level as i64;
        let (wlo, whi) = poisson_window(theta);
        let (wlo, whi) = (wlo as i64, whi as i64);
        let mut d_mean = 0.0;
        let mut d_second = 0.0;
        for (k, pk) in self.pmf.iter() {
            if k == 0 {
                continue;
            }
            let q_start = k.max(0).max(wlo.min(wlo + k));
            let q_end = (l - 1).min(whi.max(whi + k));
            let (mut m1, mut m2) = (0.0, 0.0);
            for q in q_start..=q_end {
                let diff = poisson_pmf(q - k, theta) - poisson_pmf(q, theta);
                let qf = q as f64;
                m1 += diff * qf;
                m2 += diff * qf * qf;
            }
            let lf = l as f64;
            // Ψ_L - Ψ_{[L-k]+} written with complements for precision
            let tail = psi_complement((l - k).max(0) as u64, theta) - psi_complement(l as u64, theta);
            m1 += lf * tail;
            m2 += lf * lf * tail;
            if k >= 2 {
                for q in 1..k.min(l) {
                    let p = poisson_pmf(q, theta);
                    let qf = q as f64;
                    m1 -= qf * p;
                    m2 -= qf * qf * p;
                }
            }
            d_mean += pk * m1;
            d_second += pk * m2;
        }
        Ok((d_mean, d_second))
    }
}

/// Mean, variance and `dμ_Y/dθ` of one reading at total Poisson mean `theta`
/// (dark electrons already included).
pub fn pixel_stats(theta: f64, params: &SensorParams) -> Result<PixelStats> {
    PixelModel::new(*params)?.stats(theta)
}

/// Slopes below this are treated as a fully saturated response.
pub const SATURATION_SLOPE: f64 = 1e-300;

/// Exposure-referred noise `√K σ_Y / (dμ_Y/dθ)`; `+∞` once saturated.
pub fn exposure_referred_noise(theta: f64, params: &SensorParams, frames: u32) -> Result<f64> {
    let model = PixelModel::new(*params)?;
    exposure_referred_noise_with(&model, theta, frames)
}

pub(crate) fn exposure_referred_noise_with(model: &PixelModel, theta: f64, frames: u32) -> Result<f64> {
    if frames == 0 {
        return Err(Error::domain("frame count must be ≥ 1"));
    }
    let s = model.stats(theta)?;
    if s.slope < SATURATION_SLOPE {
        return Ok(f64::INFINITY);
    }
    Ok((frames as f64).sqrt() * s.std_dev() / s.slope)
}

/// Linear exposure-referred SNR `√N θ (dμ_Y/dθ) / σ_Y` of an `N`-frame sum.
/// `signal` is the photo-electron mean; `total` additionally includes dark
/// electrons and is where the response is evaluated.
pub(crate) fn snr_linear(model: &PixelModel, signal: f64, total: f64, frames: u32) -> f64 {
    if signal <= 0.0 {
        return 0.0;
    }
    let s = model.stats_unchecked(total);
    if s.slope < SATURATION_SLOPE {
        return 0.0;
    }
    let sd = s.std_dev();
    if sd == 0.0 {
        return f64::INFINITY;
    }
    (frames as f64).sqrt() * signal * s.slope / sd
}

/// Exposure-referred SNR of an `N`-frame sum in dB.
///
/// `θ = 0` and saturated responses give `-∞`.
pub fn snr_h(theta: f64, params: &SensorParams, frames: u32) -> Result<f64> {
    let model = PixelModel::new(*params)?;
    snr_h_with(&model, theta, frames)
}

pub(crate) fn snr_h_with(model: &PixelModel, theta: f64, frames: u32) -> Result<f64> {
    if !theta.is_finite() || theta < 0.0 {
        return Err(Error::domain(format!("SNR undefined for θ = {theta}")));
    }
    if frames == 0 {
        return Err(Error::domain("frame count must be ≥ 1"));
    }
    let single = snr_linear(model, theta, theta, 1);
    Ok(20.0 * single.log10() + 10.0 * (frames as f64).log10())
}
