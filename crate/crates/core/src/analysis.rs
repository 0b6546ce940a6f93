//! SNR curves, dynamic range, photon-counting histogram fits and the
//! log-domain MSE.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cis::{cis_optimal_weights, cis_snr_linear, CisParams};
use crate::error::{Error, Result};
use crate::fusion::{fill_optimal, fused_snr, snr_per_exposure_with};
use crate::sim::ExposureSchedule;
use crate::stats::{pz_density, snr_linear, PixelModel, SensorParams};

/// Sampled `(abscissa, SNR in dB)` pairs. The abscissa is flux (photons/s)
/// unless the provenance says otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrCurve {
    pub abscissa: Vec<f64>,
    pub snr_db: Vec<f64>,
    #[serde(default)]
    pub provenance: serde_json::Value,
}

impl SnrCurve {
    pub fn new(abscissa: Vec<f64>, snr_db: Vec<f64>, provenance: serde_json::Value) -> Result<Self> {
        if abscissa.len() != snr_db.len() {
            return Err(Error::domain("abscissa and SNR lengths differ"));
        }
        if abscissa.len() < 2 {
            return Err(Error::domain("a curve needs at least 2 samples"));
        }
        if abscissa.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("abscissae must be strictly increasing"));
        }
        Ok(Self {
            abscissa,
            snr_db,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.abscissa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.abscissa.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.abscissa.iter().copied().zip(self.snr_db.iter().copied())
    }

    pub fn peak(&self) -> (f64, f64) {
        self.iter().fold(
            (f64::NAN, f64::NEG_INFINITY),
            |acc, s| if s.1 > acc.1 { s } else { acc },
        )
    }
}

/// `points` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) || points < 2 {
        return Err(Error::domain("log grid needs 0 < lo < hi and ≥ 2 points"));
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..points)
        .map(|i| {
            if i == points - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (points - 1) as f64).exp()
            }
        })
        .collect())
}

/// Default resolution for dynamic-range work.
pub const POINTS_PER_DECADE: usize = 512;

/// Log grid with `per_decade` points per decade.
pub fn log_grid_per_decade(lo: f64, hi: f64, per_decade: usize) -> Result<Vec<f64>> {
    let decades = (hi / lo).log10();
    let points = ((decades * per_decade as f64).ceil() as usize + 1).max(2);
    log_grid(lo, hi, points)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 || grid[0] <= 0.0 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain("grid must be positive, strictly increasing, ≥ 2 points"));
    }
    Ok(())
}

fn to_db(x: f64) -> f64 {
    20.0 * x.log10()
}

/// Single-exposure QIS curve: `N` frames of `exposure` seconds, evaluated
/// at each flux `λ` of the grid.
pub fn qis_snr_curve(params: &SensorParams, exposure: f64, frames: u32, grid: &[f64]) -> Result<SnrCurve> {
    check_grid(grid)?;
    if !(exposure > 0.0) || frames == 0 {
        return Err(Error::domain("exposure must be positive and frames ≥ 1"));
    }
    let model = PixelModel::new(*params)?;
    let snr_db = grid
        .par_iter()
        .map(|&flux| {
            let signal = exposure * flux;
            to_db(snr_linear(&model, signal, params.total_mean(signal, exposure), frames))
        })
        .collect();
    SnrCurve::new(
        grid.to_vec(),
        snr_db,
        serde_json::json!({
            "sensor": "qis",
            "params": params,
            "exposure": exposure,
            "frames": frames,
        }),
    )
}

/// Single-exposure CIS curve.
pub fn cis_snr_curve(params: &CisParams, exposure: f64, frames: u32, grid: &[f64]) -> Result<SnrCurve> {
    check_grid(grid)?;
    if !(exposure > 0.0) || frames == 0 {
        return Err(Error::domain("exposure must be positive and frames ≥ 1"));
    }
    let snr_db = grid
        .iter()
        .map(|&flux| to_db(cis_snr_linear(exposure * flux, params, frames)))
        .collect();
    SnrCurve::new(
        grid.to_vec(),
        snr_db,
        serde_json::json!({
            "sensor": "cis",
            "params": params,
            "exposure": exposure,
            "frames": frames,
        }),
    )
}

/// How a fused curve weights its exposures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum WeightRule {
    /// `w ∝ SNR²` evaluated at the true flux.
    Optimal,
    Equal,
    /// Exposure-proportional over exposures with `Δ λ < L`.
    CisIndicator,
    Fixed(Vec<f64>),
}

impl WeightRule {
    fn weights(&self, snr: &[f64], durations: &[f64], flux: f64, clip_level: f64) -> Vec<f64> {
        match self {
            WeightRule::Optimal => {
                let mut w = vec![0.0; snr.len()];
                if !fill_optimal(snr, &mut w) {
                    w.fill(1.0 / snr.len() as f64);
                }
                w
            }
            WeightRule::Equal => vec![1.0 / snr.len() as f64; snr.len()],
            WeightRule::CisIndicator => cis_optimal_weights(durations, flux, clip_level)
                .map(|w| w.weights)
                .unwrap_or_else(|_| vec![1.0 / snr.len() as f64; snr.len()]),
            WeightRule::Fixed(w) => w.clone(),
        }
    }
}

/// Per-exposure SNR curves (each with its own `K_m`).
pub fn per_exposure_snr_curves(
    params: &SensorParams,
    schedule: &ExposureSchedule,
    grid: &[f64],
) -> Result<Vec<SnrCurve>> {
    schedule.validate()?;
    schedule
        .groups
        .iter()
        .map(|g| qis_snr_curve(params, g.duration, g.frames, grid))
        .collect()
}

/// SNR of the fused HDR estimate `Σ w[m] S[m]` at each flux:
/// `1 / √(Σ w[m]² / SNR[m]²)` with `SNR[m]` the `K_m`-frame SNR.
pub fn fused_snr_curve(
    params: &SensorParams,
    schedule: &ExposureSchedule,
    rule: &WeightRule,
    grid: &[f64],
) -> Result<SnrCurve> {
    schedule.validate()?;
    check_grid(grid)?;
    if let WeightRule::Fixed(w) = rule {
        if w.len() != schedule.len() {
            return Err(Error::domain("fixed weights must have one entry per exposure"));
        }
    }
    let model = PixelModel::new(*params)?;
    let durations = schedule.durations();
    let clip = params.clip_level as f64;
    let snr_db = grid
        .par_iter()
        .map(|&flux| {
            let snr: Vec<f64> = schedule
                .groups
                .iter()
                .map(|g| snr_per_exposure_with(&model, flux, g.duration, g.frames))
                .collect();
            let w = rule.weights(&snr, &durations, flux, clip);
            to_db(fused_snr(&w, &snr))
        })
        .collect();
    SnrCurve::new(
        grid.to_vec(),
        snr_db,
        serde_json::json!({
            "sensor": "qis",
            "fused": true,
            "rule": rule,
            "params": params,
            "schedule": schedule,
        }),
    )
}

/// Fused CIS curve using the exposure-proportional CIS weights.
pub fn cis_fused_snr_curve(params: &CisParams, schedule: &ExposureSchedule, grid: &[f64]) -> Result<SnrCurve> {
    schedule.validate()?;
    check_grid(grid)?;
    let durations = schedule.durations();
    let snr_db = grid
        .iter()
        .map(|&flux| {
            let snr: Vec<f64> = schedule
                .groups
                .iter()
                .map(|g| cis_snr_linear(g.duration * flux, params, g.frames))
                .collect();
            let w = WeightRule::CisIndicator.weights(&snr, &durations, flux, params.full_well as f64);
            to_db(fused_snr(&w, &snr))
        })
        .collect();
    SnrCurve::new(
        grid.to_vec(),
        snr_db,
        serde_json::json!({
            "sensor": "cis",
            "fused": true,
            "params": params,
            "schedule": schedule,
        }),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicRangeReport {
    pub floor: f64,
    pub ceiling: f64,
    pub range_db: f64,
    pub threshold_db: f64,
}

/// Crossing of `threshold` between samples `a` (inside) and `b` (outside),
/// interpolated linearly in `(ln x, dB)`. A non-finite outside value means the
/// curve falls off a cliff, and the inside abscissa is kept.
fn crossing(a: (f64, f64), b: (f64, f64), threshold: f64) -> f64 {
    if !b.1.is_finite() || !a.1.is_finite() || a.1 == b.1 {
        return a.0;
    }
    let t = (a.1 - threshold) / (a.1 - b.1);
    (a.0.ln() + t * (b.0.ln() - a.0.ln())).exp()
}

/// Range of abscissae over which the SNR is at least `threshold_db`.
pub fn dynamic_range(curve: &SnrCurve, threshold_db: f64) -> Result<DynamicRangeReport> {
    let samples: Vec<(f64, f64)> = curve.iter().collect();
    let first = samples
        .iter()
        .position(|s| s.1 >= threshold_db)
        .ok_or_else(|| Error::domain(format!("no dynamic range: SNR never reaches {threshold_db} dB")))?;
    let last = samples.iter().rposition(|s| s.1 >= threshold_db).unwrap_or(first);
    let floor = if first > 0 {
        crossing(samples[first], samples[first - 1], threshold_db)
    } else {
        samples[first].0
    };
    let ceiling = if last + 1 < samples.len() {
        crossing(samples[last], samples[last + 1], threshold_db)
    } else {
        samples[last].0
    };
    Ok(DynamicRangeReport {
        floor,
        ceiling,
        range_db: 20.0 * (ceiling / floor).log10(),
        threshold_db,
    })
}

/// Bin width of the photon-counting histogram, electrons.
pub const HISTOGRAM_BIN_WIDTH: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramFit {
    /// Fitted flux, photons per second.
    pub flux: f64,
    /// Fitted signal electrons per reading, `λ Δ`.
    pub theta: f64,
    pub mse: f64,
    pub bins: usize,
}

const FIT_THETA_MIN: f64 = 1e-6;
const FIT_SCAN_POINTS: usize = 64;
const GOLDEN_ITERATIONS: usize = 100;

/// Fit the flux of a pixel from analog readings by least-squares matching of
/// their histogram against the Poisson–Gaussian density.
pub fn histogram_fit(samples: &[f64], read_noise: f64, dark_current: f64, exposure: f64) -> Result<HistogramFit> {
    if samples.len() < 1000 {
        return Err(Error::Fit(format!("need ≥ 1000 samples, got {}", samples.len())));
    }
    if !(read_noise > 0.0) {
        return Err(Error::domain("histogram fit needs σ_read > 0"));
    }
    if !(exposure > 0.0) || !(dark_current >= 0.0) {
        return Err(Error::domain("exposure must be positive and dark current ≥ 0"));
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::Fit("samples must be finite".into()));
    }
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bins = (((hi - lo) / HISTOGRAM_BIN_WIDTH).floor() as usize + 1).max(1);
    if bins < 2 {
        return Err(Error::Fit("degenerate histogram: all samples fall in one bin".into()));
    }
    let mut counts = vec![0u64; bins];
    for &s in samples {
        let i = (((s - lo) / HISTOGRAM_BIN_WIDTH).floor() as usize).min(bins - 1);
        counts[i] += 1;
    }
    let norm = 1.0 / (samples.len() as f64 * HISTOGRAM_BIN_WIDTH);
    let centers: Vec<f64> = (0..bins).map(|i| lo + (i as f64 + 0.5) * HISTOGRAM_BIN_WIDTH).collect();
    let density: Vec<f64> = counts.iter().map(|&c| c as f64 * norm).collect();
    let dark = dark_current * exposure;

    let mse = |ln_theta: f64| -> f64 {
        let theta = ln_theta.exp() + dark;
        centers
            .iter()
            .zip(&density)
            .map(|(&z, &d)| {
                let m = pz_density(z, theta, read_noise).unwrap_or(f64::NAN);
                (m - d) * (m - d)
            })
            .sum::<f64>()
            / bins as f64
    };

    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let upper = (4.0 * mean).max(1.0) + 10.0;
    let (a, b) = (FIT_THETA_MIN.ln(), upper.ln());
    let scan: Vec<(f64, f64)> = (0..FIT_SCAN_POINTS)
        .into_par_iter()
        .map(|i| {
            let x = a + (b - a) * i as f64 / (FIT_SCAN_POINTS - 1) as f64;
            (x, mse(x))
        })
        .collect();
    let best = scan
        .iter()
        .enumerate()
        .min_by(|x, y| x.1 .1.total_cmp(&y.1 .1))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::Fit("empty scan".into()))?;
    let left = scan[best.saturating_sub(1)].0;
    let right = scan[(best + 1).min(FIT_SCAN_POINTS - 1)].0;
    let x = golden_section(&mse, left, right);
    let value = mse(x);
    if !value.is_finite() {
        return Err(Error::Fit("objective is not finite".into()));
    }
    let theta = x.exp();
    Ok(HistogramFit {
        flux: theta / exposure,
        theta,
        mse: value,
        bins,
    })
}

fn golden_section(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..GOLDEN_ITERATIONS {
        if (b - a).abs() < 1e-10 {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Relative offset added before taking logs, as a fraction of the ground
/// truth maximum.
pub const LMSE_EPSILON_FRACTION: f64 = 1e-4;

/// Mean squared difference of `log10` intensities.
pub fn lmse(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::domain(format!(
            "estimate has {} pixels, ground truth {}",
            estimate.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::domain("empty images"));
    }
    if truth.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
        return Err(Error::domain("ground truth must be finite and ≥ 0"));
    }
    if estimate.iter().any(|e| !(*e >= 0.0) || !e.is_finite()) {
        return Err(Error::domain("estimate must be finite and ≥ 0"));
    }
    let peak = truth.iter().copied().fold(0.0, f64::max);
    let eps = (LMSE_EPSILON_FRACTION * peak).max(f64::MIN_POSITIVE);
    Ok(estimate
        .iter()
        .zip(truth)
        .map(|(e, t)| {
            let d = (e + eps).log10() - (t + eps).log10();
            d * d
        })
        .sum::<f64>()
        / truth.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{simulate_analog_samples, Exposure};

    fn sensor(l: u32, s: f64) -> SensorParams {
        SensorParams::new(l, s, 0.0).unwrap()
    }

    #[test]
    fn frame_count_shifts_curve_by_ten_db() {
        let grid = log_grid(10.0, 1e5, 50).unwrap();
        let a = qis_snr_curve(&sensor(3, 0.25), 1e-3, 1, &grid).unwrap();
        let b = qis_snr_curve(&sensor(3, 0.25), 1e-3, 10, &grid).unwrap();
        for (x, y) in a.snr_db.iter().zip(&b.snr_db) {
            assert!((y - x - 10.0).abs() < 1e-9);
        }
    }

    #[test]
    fn bit_depth_ordering() {
        let grid = vec![3.0, 3.0 + 1e-9];
        let snr = |l| qis_snr_curve(&sensor(l, 0.25), 1.0, 16, &grid).unwrap().snr_db[0];
        assert!(snr(15) > snr(3));
        assert!(snr(3) > snr(1));
    }

    #[test]
    fn single_bit_soft_saturation() {
        let grid = log_grid(1e-2, 40.0, 400).unwrap();
        let c = qis_snr_curve(&sensor(1, 0.25), 1.0, 1000, &grid).unwrap();
        let (peak_at, _) = c.peak();
        let tail: Vec<f64> = c.iter().filter(|s| s.0 > peak_at).map(|s| s.1).collect();
        assert!(tail.iter().all(|v| v.is_finite()));
        assert!(tail.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn fused_single_exposure_matches_plain_curve() {
        let grid = log_grid(1.0, 1e6, 80).unwrap();
        let sched = ExposureSchedule::from_groups(vec![Exposure {
            duration: 1e-3,
            frames: 37,
        }])
        .unwrap();
        let p = sensor(3, 0.25);
        let fused = fused_snr_curve(&p, &sched, &WeightRule::Optimal, &grid).unwrap();
        let plain = qis_snr_curve(&p, 1e-3, 37, &grid).unwrap();
        for (a, b) in fused.snr_db.iter().zip(&plain.snr_db) {
            assert!((a - b).abs() < 1e-9 || (a.is_infinite() && b.is_infinite()));
        }
    }

    #[test]
    fn dynamic_range_of_cis() {
        let cis = CisParams::new(4000, 2.0).unwrap();
        let grid = log_grid_per_decade(0.1, 1e5, POINTS_PER_DECADE).unwrap();
        let c = cis_snr_curve(&cis, 1.0, 1, &grid).unwrap();
        let dr = dynamic_range(&c, 0.0).unwrap();
        assert!((dr.floor - 2.5616).abs() < 1e-3, "{dr:?}");
        assert!((dr.range_db - 64.0).abs() < 1.0, "{dr:?}");
    }

    #[test]
    fn no_dynamic_range() {
        let c = SnrCurve::new(vec![1.0, 2.0], vec![-5.0, -3.0], serde_json::Value::Null).unwrap();
        assert!(dynamic_range(&c, 0.0).is_err());
    }

    #[test]
    fn curve_validation() {
        assert!(SnrCurve::new(vec![1.0], vec![0.0], serde_json::Value::Null).is_err());
        assert!(SnrCurve::new(vec![2.0, 1.0], vec![0.0, 0.0], serde_json::Value::Null).is_err());
    }

    #[test]
    fn lmse_examples() {
        let truth = vec![1.0, 10.0, 100.0, 1e3];
        assert_eq!(lmse(&truth, &truth).unwrap(), 0.0);
        let tenfold: Vec<f64> = truth.iter().map(|t| t * 10.0).collect();
        let eps = 0.1;
        let expect = truth
            .iter()
            .map(|t: &f64| ((10.0 * t + eps) / (t + eps)).log10().powi(2))
            .sum::<f64>()
            / 4.0;
        assert!((lmse(&tenfold, &truth).unwrap() - expect).abs() < 1e-12);
        assert!(expect > 0.9 && expect < 1.0);
        assert!(lmse(&truth[..2], &truth).is_err());
        assert!(lmse(&[1.0], &[-1.0]).is_err());
    }

    #[test]
    fn histogram_fit_recovers_pure_read_noise() {
        let samples = simulate_analog_samples(0.0, 0.25, 50_000, 17);
        let fit = histogram_fit(&samples, 0.25, 0.0, 50e-6).unwrap();
        assert!(fit.theta <= 0.02, "{fit:?}");
    }

    #[test]
    fn histogram_fit_rejects_bad_input() {
        assert!(histogram_fit(&[0.0; 10], 0.25, 0.0, 1.0).is_err());
        assert!(histogram_fit(&vec![0.01; 2000], 0.25, 0.0, 1.0).is_err());
        assert!(histogram_fit(&vec![0.01; 2000], 0.0, 0.0, 1.0).is_err());
    }
}
