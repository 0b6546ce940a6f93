//! Optimal linear HDR fusion.
//!
//! Given per-exposure flux estimates `S[m]`, the linear combination
//! `λ̂ = Σ w[m] S[m]` with `Σ w[m] = 1` has the highest exposure-referred SNR
//! when `w[m] ∝ SNR[m]²`. The SNRs depend on the unknown flux, so the
//! reconstruction alternates between fusing and re-evaluating the SNRs at the
//! current estimate, reading them from a precomputed table.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cis::cis_optimal_weights;
use crate::error::{Error, Result};
use crate::ldr::{ldr_estimate, LdrEstimate};
use crate::sim::{ExposureSchedule, FrameStack};
use crate::stats::{snr_linear, PixelModel, SensorParams};

/// How each iteration moves toward the fixed point `λ = Σ w(λ) S`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    /// Re-weight at the current estimate and re-fuse.
    #[default]
    FixedPoint,
    /// Per-pixel Newton step on `Σ w(λ) S - λ`, falling back to the
    /// fixed-point update where the step is unsafe.
    Newton,
}

/// Headroom above `10 L` in the default table range. For `L = 1` the SNR
/// there is ~`60 e^{-30}`, small enough that clamping is harmless.
pub const LUT_SATURATION_MARGIN: f64 = 64.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub max_iterations: u32,
    /// Stop once the relative change of λ̂ falls below this.
    pub convergence_tol: f64,
    pub lut_points: usize,
    /// `[θ_min, θ_max]` of the SNR table; `None` means `[1e-6, 10 L + 64]`.
    /// Queries past either end clamp, so `θ_max` should sit where a
    /// saturated exposure's SNR is negligible.
    pub lut_range: Option<(f64, f64)>,
    #[serde(default)]
    pub solver: Solver,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            max_iterations: 10,
            convergence_tol: 1e-6,
            lut_points: 2048,
            lut_range: None,
            solver: Solver::FixedPoint,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::domain("max_iterations must be ≥ 1"));
        }
        if !(self.convergence_tol >= 0.0) {
            return Err(Error::domain("convergence tolerance must be ≥ 0"));
        }
        if self.lut_points < 16 {
            return Err(Error::domain("lut_points must be ≥ 16"));
        }
        if let Some((lo, hi)) = self.lut_range {
            if !(lo > 0.0 && hi > lo && hi.is_finite()) {
                return Err(Error::domain("lut_range must satisfy 0 < θ_min < θ_max"));
            }
        }
        Ok(())
    }

    pub fn resolved_lut_range(&self, params: &SensorParams) -> (f64, f64) {
        self.lut_range
            .unwrap_or((1e-6, 10.0 * params.clip_level as f64 + LUT_SATURATION_MARGIN))
    }
}

/// SNR of the `K`-frame estimate of exposure `m` at flux `λ`:
/// `√K θ (dμ_Y/dθ) / σ_Y` with `θ = Δ λ`. Zero once saturated or for `λ ≤ 0`.
pub fn snr_per_exposure(flux: f64, exposure: f64, frames: u32, params: &SensorParams) -> Result<f64> {
    if !(exposure > 0.0) || frames == 0 {
        return Err(Error::domain("exposure must be positive and frames ≥ 1"));
    }
    if !flux.is_finite() {
        return Err(Error::domain("flux must be finite"));
    }
    let model = PixelModel::new(*params)?;
    Ok(snr_per_exposure_with(&model, flux, exposure, frames))
}

pub(crate) fn snr_per_exposure_with(model: &PixelModel, flux: f64, exposure: f64, frames: u32) -> f64 {
    if flux <= 0.0 {
        return 0.0;
    }
    let signal = exposure * flux;
    let total = model.params().total_mean(signal, exposure);
    snr_linear(model, signal, total, frames)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalWeights {
    pub weights: Vec<f64>,
    /// All SNRs were zero; weights fell back to uniform.
    pub degenerate: bool,
}

/// `w[m] = s[m]² / Σ s²`.
pub fn optimal_weights(snr: &[f64]) -> Result<OptimalWeights> {
    if snr.is_empty() {
        return Err(Error::domain("need at least one SNR value"));
    }
    if let Some(s) = snr.iter().find(|s| !(**s >= 0.0)) {
        return Err(Error::domain(format!("SNR values must be ≥ 0, got {s}")));
    }
    let mut weights = vec![0.0; snr.len()];
    let degenerate = !fill_optimal(snr, &mut weights);
    if degenerate {
        weights.fill(1.0 / snr.len() as f64);
    }
    Ok(OptimalWeights { weights, degenerate })
}

/// Writes `s²/Σs²` into `out`; returns false (leaving `out` untouched) when
/// every SNR is zero.
pub(crate) fn fill_optimal(snr: &[f64], out: &mut [f64]) -> bool {
    let peak = snr.iter().copied().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return false;
    }
    if peak.is_infinite() {
        let n = snr.iter().filter(|s| s.is_infinite()).count() as f64;
        for (w, s) in out.iter_mut().zip(snr) {
            *w = if s.is_infinite() { 1.0 / n } else { 0.0 };
        }
        return true;
    }
    let total: f64 = snr.iter().map(|s| (s / peak) * (s / peak)).sum();
    for (w, s) in out.iter_mut().zip(snr) {
        let r = s / peak;
        *w = r * r / total;
    }
    true
}

/// Relative noise `1/SNR` of `Σ w[m] S[m]` when `S[m]` has SNR `s[m]`:
/// `√(Σ w² / s²)`.
pub fn fused_noise(weights: &[f64], snr: &[f64]) -> f64 {
    weights
        .iter()
        .zip(snr)
        .map(|(&w, &s)| {
            if w == 0.0 {
                0.0
            } else if s == 0.0 {
                f64::INFINITY
            } else {
                (w / s) * (w / s)
            }
        })
        .sum::<f64>()
        .sqrt()
}

/// SNR of the fused estimate, `1 / fused_noise`.
pub fn fused_snr(weights: &[f64], snr: &[f64]) -> f64 {
    1.0 / fused_noise(weights, snr)
}

const NEWTON_RELATIVE_STEP: f64 = 1e-4;
const NEWTON_MIN_GAIN: f64 = 0.05;

/// Per-pixel, per-exposure weights stored pixel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMap {
    exposures: usize,
    data: Vec<f64>,
}

impl WeightMap {
    pub fn uniform(pixels: usize, exposures: usize) -> Self {
        Self {
            exposures,
            data: vec![1.0 / exposures as f64; pixels * exposures],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let exposures = rows.first().map(Vec::len).unwrap_or(0);
        if exposures == 0 || rows.iter().any(|r| r.len() != exposures) {
            return Err(Error::domain("weight rows must be non-empty and equal length"));
        }
        Ok(Self {
            exposures,
            data: rows.concat(),
        })
    }

    pub fn exposures(&self) -> usize {
        self.exposures
    }

    pub fn pixels(&self) -> usize {
        self.data.len() / self.exposures
    }

    pub fn pixel(&self, p: usize) -> &[f64] {
        &self.data[p * self.exposures..(p + 1) * self.exposures]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.exposures)
    }

    /// Weight of exposure `m` at every pixel.
    pub fn plane(&self, m: usize) -> Vec<f64> {
        self.rows().map(|r| r[m]).collect()
    }

    /// Largest `|Σ_m w - 1|` and whether every weight is non-negative.
    pub fn normalization_error(&self) -> (f64, bool) {
        let nonneg = self.data.iter().all(|&w| w >= 0.0);
        let err = self
            .rows()
            .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max);
        (err, nonneg)
    }
}

/// `λ̂ = Σ_m w[m] S[m]` per pixel.
pub fn fuse(ldrs: &[LdrEstimate], weights: &WeightMap) -> Result<Vec<f64>> {
    check_ldrs(ldrs)?;
    if weights.exposures() != ldrs.len() || weights.pixels() != ldrs[0].flux.len() {
        return Err(Error::domain("weight map shape does not match the LDR stack"));
    }
    Ok(fuse_unchecked(ldrs, weights))
}

fn fuse_unchecked(ldrs: &[LdrEstimate], weights: &WeightMap) -> Vec<f64> {
    (0..weights.pixels())
        .into_par_iter()
        .map(|p| weights.pixel(p).iter().zip(ldrs).map(|(w, l)| w * l.flux[p]).sum())
        .collect()
}

fn check_ldrs(ldrs: &[LdrEstimate]) -> Result<()> {
    let first = ldrs.first().ok_or_else(|| Error::domain("no LDR estimates"))?;
    if ldrs.iter().any(|l| l.flux.len() != first.flux.len()) {
        return Err(Error::domain("LDR estimates differ in size"));
    }
    Ok(())
}

/// Tabulated per-exposure SNR on a log-spaced `θ = Δ_m λ` grid, stored in dB
/// (`-∞` for zero) and interpolated linearly in `(ln θ, dB)`.
#[derive(Debug, Clone)]
pub struct SnrLut {
    ln_theta_min: f64,
    step: f64,
    points: usize,
    durations: Vec<f64>,
    tables: Vec<Vec<f64>>,
}

/// Tabulate [`snr_per_exposure`] for every exposure of `schedule`.
pub fn build_snr_lut(schedule: &ExposureSchedule, params: &SensorParams, config: &FusionConfig) -> Result<SnrLut> {
    schedule.validate()?;
    config.validate()?;
    let model = PixelModel::new(*params)?;
    let (lo, hi) = config.resolved_lut_range(params);
    let points = config.lut_points;
    let ln_theta_min = lo.ln();
    let step = (hi.ln() - ln_theta_min) / (points - 1) as f64;
    let tables = schedule
        .groups
        .iter()
        .map(|g| {
            (0..points)
                .into_par_iter()
                .map(|i| {
                    let theta = (ln_theta_min + i as f64 * step).exp();
                    let s = snr_per_exposure_with(&model, theta / g.duration, g.duration, g.frames);
                    20.0 * s.log10()
                })
                .collect()
        })
        .collect();
    Ok(SnrLut {
        ln_theta_min,
        step,
        points,
        durations: schedule.durations(),
        tables,
    })
}

impl SnrLut {
    pub fn exposures(&self) -> usize {
        self.tables.len()
    }

    /// The tabulated `θ` values.
    pub fn grid(&self) -> Vec<f64> {
        (0..self.points)
            .map(|i| (self.ln_theta_min + i as f64 * self.step).exp())
            .collect()
    }

    /// Interpolated SNR of exposure `m` in dB; outside the grid the endpoint
    /// value is returned.
    pub fn query_db(&self, m: usize, flux: f64) -> f64 {
        let table = &self.tables[m];
        let theta = self.durations[m] * flux;
        if !(theta > 0.0) {
            return table[0];
        }
        let x = (theta.ln() - self.ln_theta_min) / self.step;
        if x <= 0.0 {
            return table[0];
        }
        let last = self.points - 1;
        if x >= last as f64 {
            return table[last];
        }
        let i = x.floor() as usize;
        let t = x - i as f64;
        let (a, b) = (table[i], table[i + 1]);
        if t == 0.0 {
            return a;
        }
        if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        a + t * (b - a)
    }

    /// Interpolated linear SNR of exposure `m` at `flux`.
    pub fn query(&self, m: usize, flux: f64) -> f64 {
        10f64.powf(self.query_db(m, flux) / 20.0)
    }
}

/// Output of [`iterative_reconstruct`].
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub flux: Vec<f64>,
    pub weights: WeightMap,
    /// Number of weight updates performed.
    pub iterations: u32,
    pub converged: bool,
    /// Relative change of λ̂ after each iteration.
    pub changes: Vec<f64>,
    /// Pixels where every exposure had zero SNR; they carry the shortest
    /// exposure's estimate.
    pub degenerate: Vec<bool>,
}

/// The fixed-point iteration behind [`iterative_reconstruct`], exposed so
/// callers can step it by hand.
#[derive(Debug, Clone)]
pub struct Reconstructor {
    ldrs: Vec<LdrEstimate>,
    lut: SnrLut,
    shortest: usize,
    change_floor: f64,
}

impl Reconstructor {
    pub fn new(stack: &FrameStack, config: &FusionConfig) -> Result<Self> {
        if stack.frames.is_empty() {
            return Err(Error::domain("stack has no exposure groups"));
        }
        stack.validate()?;
        let ldrs = ldr_estimates(stack)?;
        Self::from_ldrs(ldrs, &stack.schedule, &stack.params, config)
    }

    pub fn from_ldrs(
        ldrs: Vec<LdrEstimate>,
        schedule: &ExposureSchedule,
        params: &SensorParams,
        config: &FusionConfig,
    ) -> Result<Self> {
        check_ldrs(&ldrs)?;
        if ldrs.len() != schedule.len() {
            return Err(Error::domain("LDR count does not match the schedule"));
        }
        let lut = build_snr_lut(schedule, params, config)?;
        let (theta_min, _) = config.resolved_lut_range(params);
        let shortest = shortest_index(&ldrs);
        Ok(Self {
            ldrs,
            lut,
            shortest,
            change_floor: theta_min / schedule.longest(),
        })
    }

    pub fn ldrs(&self) -> &[LdrEstimate] {
        &self.ldrs
    }

    pub fn lut(&self) -> &SnrLut {
        &self.lut
    }

    /// Fuse with uniform weights.
    pub fn initial_estimate(&self) -> Vec<f64> {
        fuse_unchecked(
            &self.ldrs,
            &WeightMap::uniform(self.ldrs[0].flux.len(), self.ldrs.len()),
        )
    }

    /// Optimal weights at the current estimate.
    pub fn weights_at(&self, flux: &[f64]) -> (WeightMap, Vec<bool>) {
        let m = self.ldrs.len();
        let rows: Vec<(Vec<f64>, bool)> = flux
            .par_iter()
            .map(|&f| {
                let snr: Vec<f64> = (0..m).map(|i| self.lut.query(i, f)).collect();
                let mut w = vec![0.0; m];
                if fill_optimal(&snr, &mut w) {
                    (w, false)
                } else {
                    w[self.shortest] = 1.0;
                    (w, true)
                }
            })
            .collect();
        let mut data = Vec::with_capacity(flux.len() * m);
        let mut degenerate = Vec::with_capacity(flux.len());
        for (w, d) in rows {
            data.extend_from_slice(&w);
            degenerate.push(d);
        }
        (WeightMap { exposures: m, data }, degenerate)
    }

    /// One update: weights at `flux`, then re-fuse.
    pub fn step(&self, flux: &[f64]) -> (Vec<f64>, WeightMap, Vec<bool>) {
        let (weights, degenerate) = self.weights_at(flux);
        let next = fuse_unchecked(&self.ldrs, &weights);
        (next, weights, degenerate)
    }

    /// `Σ w(λ) S` at a single pixel.
    fn refuse(&self, p: usize, flux: f64, snr: &mut [f64], w: &mut [f64]) -> f64 {
        for (m, s) in snr.iter_mut().enumerate() {
            *s = self.lut.query(m, flux);
        }
        if !fill_optimal(snr, w) {
            return self.ldrs[self.shortest].flux[p];
        }
        w.iter().zip(&self.ldrs).map(|(w, l)| w * l.flux[p]).sum()
    }

    /// One Newton update per pixel, returning the new estimate and the
    /// weights at it.
    pub fn newton_step(&self, flux: &[f64]) -> (Vec<f64>, WeightMap, Vec<bool>) {
        let m = self.ldrs.len();
        let next: Vec<f64> = flux
            .par_iter()
            .enumerate()
            .map(|(p, &x)| {
                let mut snr = vec![0.0; m];
                let mut w = vec![0.0; m];
                let fx = self.refuse(p, x, &mut snr, &mut w);
                if !(x > 0.0) || !x.is_finite() {
                    return fx;
                }
                let h = NEWTON_RELATIVE_STEP;
                let up = self.refuse(p, x * (1.0 + h), &mut snr, &mut w);
                let down = self.refuse(p, x * (1.0 - h), &mut snr, &mut w);
                let slope = (up - down) / (2.0 * h * x);
                let gain = 1.0 - slope;
                if !(gain > NEWTON_MIN_GAIN) {
                    return fx;
                }
                let candidate = x + (fx - x) / gain;
                let (lo, hi) = self
                    .ldrs
                    .iter()
                    .map(|l| l.flux[p])
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
                if candidate.is_finite() && candidate >= lo && candidate <= hi {
                    candidate
                } else {
                    fx
                }
            })
            .collect();
        let (weights, degenerate) = self.weights_at(&next);
        (next, weights, degenerate)
    }

    /// `max_p |new - old| / max(old, θ_min / Δ_max)`.
    pub fn relative_change(&self, new: &[f64], old: &[f64]) -> f64 {
        new.iter()
            .zip(old)
            .map(|(n, o)| (n - o).abs() / o.max(self.change_floor))
            .fold(0.0, f64::max)
    }

    pub fn run(&self, config: &FusionConfig) -> Reconstruction {
        self.run_observed(config, |_, _, _| {})
    }

    /// Like [`run`](Self::run), calling `observe(iteration, flux, weights)`
    /// after every update.
    pub fn run_observed(
        &self,
        config: &FusionConfig,
        mut observe: impl FnMut(u32, &[f64], &WeightMap),
    ) -> Reconstruction {
        let mut flux = self.initial_estimate();
        let mut changes = Vec::new();
        let mut last = None;
        for it in 1..=config.max_iterations {
            let (next, weights, degenerate) = match config.solver {
                Solver::FixedPoint => self.step(&flux),
                Solver::Newton => self.newton_step(&flux),
            };
            let change = self.relative_change(&next, &flux);
            changes.push(change);
            flux = next;
            observe(it, &flux, &weights);
            let done = change < config.convergence_tol;
            last = Some((weights, degenerate, it, done));
            if done {
                break;
            }
        }
        let (weights, degenerate, iterations, converged) = last.expect("max_iterations ≥ 1");
        Reconstruction {
            flux,
            weights,
            iterations,
            converged,
            changes,
            degenerate,
        }
    }
}

fn shortest_index(ldrs: &[LdrEstimate]) -> usize {
    ldrs.iter()
        .enumerate()
        .min_by(|a, b| a.1.exposure.total_cmp(&b.1.exposure))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Per-group LDR estimates of a stack.
pub fn ldr_estimates(stack: &FrameStack) -> Result<Vec<LdrEstimate>> {
    stack
        .frames
        .iter()
        .zip(&stack.schedule.groups)
        .map(|(group, exp)| ldr_estimate(group, exp.duration, &stack.params))
        .collect()
}

/// Iterative optimal HDR reconstruction of a frame stack.
pub fn iterative_reconstruct(stack: &FrameStack, config: &FusionConfig) -> Result<Reconstruction> {
    config.validate()?;
    Ok(Reconstructor::new(stack, config)?.run(config))
}

/// Plain average of the LDR estimates.
pub fn fuse_equal_weight(ldrs: &[LdrEstimate]) -> Result<Vec<f64>> {
    check_ldrs(ldrs)?;
    Ok(fuse_unchecked(
        ldrs,
        &WeightMap::uniform(ldrs[0].flux.len(), ldrs.len()),
    ))
}

/// Exposure-proportional weights over exposures judged unsaturated
/// (`Δ_m λ̂ < L`) at the equal-weight estimate λ̂.
pub fn fuse_cis_weights(ldrs: &[LdrEstimate], clip_level: f64) -> Result<Vec<f64>> {
    let rows = cis_weight_rows(ldrs, clip_level)?;
    Ok(fuse_unchecked(ldrs, &WeightMap::from_rows(&rows)?))
}

/// The weights [`fuse_cis_weights`] applies, one row per pixel.
pub fn cis_weight_rows(ldrs: &[LdrEstimate], clip_level: f64) -> Result<Vec<Vec<f64>>> {
    let init = fuse_equal_weight(ldrs)?;
    let durations: Vec<f64> = ldrs.iter().map(|l| l.exposure).collect();
    init.par_iter()
        .map(|&f| cis_optimal_weights(&durations, f, clip_level).map(|w| w.weights))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldr::Validity;

    fn ldr(flux: Vec<f64>, exposure: f64) -> LdrEstimate {
        let n = flux.len();
        LdrEstimate {
            exposure,
            frames: 1,
            flux,
            validity: vec![Validity::Ok; n],
        }
    }

    #[test]
    fn weight_examples() {
        assert_eq!(optimal_weights(&[3.0]).unwrap().weights, vec![1.0]);
        let w = optimal_weights(&[2.5, 2.5, 2.5]).unwrap().weights;
        assert!(w.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
        let w = optimal_weights(&[1.0, 2.0, 0.0]).unwrap().weights;
        assert!((w[0] - 0.2).abs() < 1e-15 && (w[1] - 0.8).abs() < 1e-15 && w[2] == 0.0);
        let d = optimal_weights(&[0.0, 0.0]).unwrap();
        assert!(d.degenerate);
        assert_eq!(d.weights, vec![0.5, 0.5]);
        assert!(optimal_weights(&[]).is_err());
        assert!(optimal_weights(&[1.0, -1.0]).is_err());
    }

    #[test]
    fn fuse_examples() {
        let ls = vec![ldr(vec![5.0, 4.0], 1.0), ldr(vec![99.0, 6.0], 2.0)];
        let w = WeightMap::from_rows(&[vec![1.0, 0.0], vec![0.5, 0.5]]).unwrap();
        assert_eq!(fuse(&ls, &w).unwrap(), vec![5.0, 5.0]);
        let c = vec![ldr(vec![7.25], 1.0), ldr(vec![7.25], 3.0), ldr(vec![7.25], 9.0)];
        let w = WeightMap::from_rows(&[vec![0.125, 0.375, 0.5]]).unwrap();
        assert_eq!(fuse(&c, &w).unwrap(), vec![7.25]);
    }

    #[test]
    fn equal_weight_examples() {
        let ls = vec![ldr(vec![2.0], 1.0), ldr(vec![4.0], 2.0)];
        assert_eq!(fuse_equal_weight(&ls).unwrap(), vec![3.0]);
        let u = WeightMap::uniform(1, 2);
        assert_eq!(fuse(&ls, &u).unwrap(), fuse_equal_weight(&ls).unwrap());
    }

    #[test]
    fn cis_fusion_examples() {
        // equal-weight init λ̂ = 0.5 → both unsaturated at L = 100
        let ls = vec![ldr(vec![0.5], 1.0), ldr(vec![0.5], 10.0)];
        assert!((fuse_cis_weights(&ls, 100.0).unwrap()[0] - 0.5).abs() < 1e-15);
        let rows = cis_weight_rows(&ls, 100.0).unwrap();
        assert!((rows[0][1] - 10.0 / 11.0).abs() < 1e-15);
        // long exposure saturated
        let ls = vec![ldr(vec![50.0], 1.0), ldr(vec![30.0], 10.0)];
        assert_eq!(fuse_cis_weights(&ls, 100.0).unwrap(), vec![50.0]);
        let one = vec![ldr(vec![3.0, 8.0], 1.0)];
        assert_eq!(fuse_cis_weights(&one, 1.0).unwrap(), vec![3.0, 8.0]);
    }

    #[test]
    fn shot_noise_limit_snr() {
        let p = SensorParams::new(u16::MAX as u32, 0.0, 0.0).unwrap();
        let s = snr_per_exposure(1e3, 1e-3, 1, &p).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
        let sat = SensorParams::new(1, 0.0, 0.0).unwrap();
        assert_eq!(snr_per_exposure(1e9, 1.0, 4, &sat).unwrap(), 0.0);
        assert_eq!(snr_per_exposure(-1.0, 1.0, 4, &sat).unwrap(), 0.0);
    }

    #[test]
    fn scale_invariant_weights() {
        let s = [0.3, 4.0, 1.7, 0.0];
        let a = optimal_weights(&s).unwrap().weights;
        for c in [1e-8, 0.5, 3.0, 1e9] {
            let scaled: Vec<f64> = s.iter().map(|x| x * c).collect();
            let b = optimal_weights(&scaled).unwrap().weights;
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(FusionConfig::default().validate().is_ok());
        let bad = FusionConfig {
            lut_points: 8,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = FusionConfig {
            lut_range: Some((1.0, 0.5)),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
