//! Monte Carlo forward model: radiance → photo-electrons → read noise → ADC.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{poisson, standard_normal, PixelRng, StreamKey};
use crate::stats::SensorParams;

/// Static scene radiance, photons per second per pixel, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RadianceMap {
    width: usize,
    height: usize,
    flux: Vec<f64>,
}

impl RadianceMap {
    pub fn new(width: usize, height: usize, flux: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::domain("radiance map dimensions must be ≥ 1"));
        }
        if flux.len() != width * height {
            return Err(Error::domain(format!(
                "radiance map has {} values, expected {}×{}",
                flux.len(),
                width,
                height
            )));
        }
        if let Some(i) = flux.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::domain(format!(
                "flux at pixel {i} is {}, must be finite and ≥ 0",
                flux[i]
            )));
        }
        Ok(Self { width, height, flux })
    }

    pub fn uniform(width: usize, height: usize, flux: f64) -> Result<Self> {
        Self::new(width, height, vec![flux; width * height])
    }

    /// Horizontal log-spaced ramp from `lo` to `hi` photons/s, constant down
    /// each column.
    pub fn log_ramp(width: usize, height: usize, lo: f64, hi: f64) -> Result<Self> {
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::domain("ramp needs 0 < lo ≤ hi"));
        }
        let (llo, lhi) = (lo.ln(), hi.ln());
        let row: Vec<f64> = (0..width)
            .map(|x| {
                let t = if width > 1 { x as f64 / (width - 1) as f64 } else { 0.0 };
                (llo + t * (lhi - llo)).exp()
            })
            .collect();
        let flux = (0..height).flat_map(|_| row.iter().copied()).collect();
        Self::new(width, height, flux)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.flux.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flux.is_empty()
    }

    pub fn flux(&self) -> &[f64] {
        &self.flux
    }

    pub fn into_flux(self) -> Vec<f64> {
        self.flux
    }
}

/// One exposure group: `frames` frames of `duration` seconds each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exposure {
    pub duration: f64,
    pub frames: u32,
}

/// The bracketing plan: ordered exposure groups and the frame period `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposureSchedule {
    pub groups: Vec<Exposure>,
    pub frame_period: f64,
}

impl ExposureSchedule {
    pub fn new(groups: Vec<Exposure>, frame_period: f64) -> Result<Self> {
        let s = Self { groups, frame_period };
        s.validate()?;
        Ok(s)
    }

    /// Schedule whose frame period is the longest exposure.
    pub fn from_groups(groups: Vec<Exposure>) -> Result<Self> {
        let period = groups.iter().map(|g| g.duration).fold(0.0, f64::max);
        Self::new(groups, period)
    }

    pub fn validate(&self) -> Result<()> {
        if self.groups.is_empty() {
            return Err(Error::domain("schedule needs at least one exposure group"));
        }
        if !(self.frame_period > 0.0) || !self.frame_period.is_finite() {
            return Err(Error::domain("frame period must be positive"));
        }
        for (m, g) in self.groups.iter().enumerate() {
            if !(g.duration > 0.0) || !g.duration.is_finite() {
                return Err(Error::domain(format!("exposure {m}: duration must be positive")));
            }
            if g.frames == 0 {
                return Err(Error::domain(format!("exposure {m}: frame count must be ≥ 1")));
            }
            if g.duration > self.frame_period {
                return Err(Error::domain(format!(
                    "exposure {m}: duration {} s exceeds frame period {} s",
                    g.duration, self.frame_period
                )));
            }
        }
        Ok(())
    }

    /// `M`.
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// `N = Σ K_m`.
    pub fn total_frames(&self) -> u64 {
        self.groups.iter().map(|g| g.frames as u64).sum()
    }

    pub fn durations(&self) -> Vec<f64> {
        self.groups.iter().map(|g| g.duration).collect()
    }

    pub fn longest(&self) -> f64 {
        self.groups.iter().map(|g| g.duration).fold(0.0, f64::max)
    }

    /// Parse `"75us:10,375us:10,1.875ms:10"`. Durations accept the suffixes
    /// `s`, `ms`, `us`, `µs`, `ns` or a bare number of seconds.
    pub fn parse(text: &str, frame_period: Option<f64>) -> Result<Self> {
        let groups = text
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|item| {
                let (dur, count) = item
                    .split_once(':')
                    .ok_or_else(|| Error::domain(format!("exposure `{item}` is not `duration:count`")))?;
                let duration = parse_duration(dur.trim())?;
                let frames = count
                    .trim()
                    .parse::<u32>()
                    .map_err(|_| Error::domain(format!("bad frame count in `{item}`")))?;
                Ok(Exposure { duration, frames })
            })
            .collect::<Result<Vec<_>>>()?;
        match frame_period {
            Some(t) => Self::new(groups, t),
            None => Self::from_groups(groups),
        }
    }
}

/// Seconds from a string such as `75us`, `1.5ms`, `0.1` or `2e-4s`.
pub fn parse_duration(s: &str) -> Result<f64> {
    let (num, scale) = if let Some(v) = s.strip_suffix("ns") {
        (v, 1e-9)
    } else if let Some(v) = s.strip_suffix("us").or_else(|| s.strip_suffix("µs")) {
        (v, 1e-6)
    } else if let Some(v) = s.strip_suffix("ms") {
        (v, 1e-3)
    } else if let Some(v) = s.strip_suffix('s') {
        (v, 1.0)
    } else {
        (s, 1.0)
    };
    let v: f64 = num
        .trim()
        .parse()
        .map_err(|_| Error::domain(format!("bad duration `{s}`")))?;
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::domain(format!("duration `{s}` must be positive")));
    }
    Ok(v * scale)
}

/// One digitized frame, row-major ADC codes.
pub type Frame = Vec<u16>;

/// Digitized frames grouped by exposure, with everything needed to
/// regenerate them.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameStack {
    pub width: usize,
    pub height: usize,
    pub params: SensorParams,
    pub schedule: ExposureSchedule,
    pub seed: u64,
    /// `frames[m][n]` is frame `n` of exposure group `m`.
    pub frames: Vec<Vec<Frame>>,
    /// Header keys this crate does not interpret, kept for round-tripping.
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl FrameStack {
    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    /// Check shape and code range against the metadata.
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.schedule.validate()?;
        if self.frames.len() != self.schedule.len() {
            return Err(Error::domain(format!(
                "stack has {} groups, schedule has {}",
                self.frames.len(),
                self.schedule.len()
            )));
        }
        let l = self.params.clip_level;
        for (m, (group, exp)) in self.frames.iter().zip(&self.schedule.groups).enumerate() {
            if group.len() != exp.frames as usize {
                return Err(Error::domain(format!(
                    "group {m} holds {} frames, schedule says {}",
                    group.len(),
                    exp.frames
                )));
            }
            for (n, frame) in group.iter().enumerate() {
                if frame.len() != self.pixels() {
                    return Err(Error::domain(format!("group {m} frame {n} has wrong size")));
                }
                if let Some(i) = frame.iter().position(|&c| c as u32 > l) {
                    return Err(Error::domain(format!(
                        "group {m} frame {n} pixel {i}: code {} exceeds L = {l}",
                        frame[i]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Per-pixel Poisson mean `θ = (λ + μ_dark)·Δ` for a static scene.
pub fn integrate_flux(radiance: &RadianceMap, exposure: f64, dark_current: f64) -> Result<Vec<f64>> {
    if !(exposure > 0.0) || !exposure.is_finite() {
        return Err(Error::domain("exposure must be positive"));
    }
    if !(dark_current >= 0.0) {
        return Err(Error::domain("dark current must be ≥ 0"));
    }
    Ok(radiance
        .flux()
        .iter()
        .map(|&l| l * exposure + dark_current * exposure)
        .collect())
}

/// Pre-ADC reading `ℓ + η` for one pixel draw.
#[inline]
pub fn sample_analog(theta: f64, read_noise: f64, rng: &mut PixelRng) -> f64 {
    let electrons = poisson(rng, theta) as f64;
    if read_noise > 0.0 {
        electrons + read_noise * standard_normal(rng)
    } else {
        electrons
    }
}

/// Round then clip to `0..=L`.
#[inline]
pub fn adc(z: f64, clip_level: u32) -> u16 {
    z.round().clamp(0.0, clip_level as f64) as u16
}

#[inline]
fn sample_code(theta: f64, params: &SensorParams, rng: &mut PixelRng) -> u16 {
    adc(sample_analog(theta, params.read_noise, rng), params.clip_level)
}

fn check_codes_fit(params: &SensorParams) -> Result<()> {
    params.validate()?;
    if params.clip_level > u16::MAX as u32 {
        return Err(Error::domain(format!(
            "clip level {} exceeds the 16-bit code range",
            params.clip_level
        )));
    }
    Ok(())
}

fn check_theta_map(theta: &[f64]) -> Result<()> {
    if let Some(i) = theta.iter().position(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::domain(format!("θ at pixel {i} is {}", theta[i])));
    }
    Ok(())
}

/// Simulate one frame from a per-pixel θ map. Pixel `i` draws from the stream
/// `key.pixel(i)`.
pub fn simulate_frame(theta: &[f64], params: &SensorParams, key: StreamKey) -> Result<Frame> {
    check_codes_fit(params)?;
    check_theta_map(theta)?;
    Ok(theta
        .par_iter()
        .enumerate()
        .map(|(i, &t)| sample_code(t, params, &mut key.pixel(i as u64)))
        .collect())
}

fn simulate_frame_serial(theta: &[f64], params: &SensorParams, key: StreamKey) -> Frame {
    theta
        .iter()
        .enumerate()
        .map(|(i, &t)| sample_code(t, params, &mut key.pixel(i as u64)))
        .collect()
}

/// Simulate the whole bracketed stack. Frames are generated in parallel; the
/// result is bit-identical for any thread count.
pub fn simulate_stack(
    radiance: &RadianceMap,
    schedule: &ExposureSchedule,
    params: &SensorParams,
    seed: u64,
) -> Result<FrameStack> {
    schedule.validate()?;
    check_codes_fit(params)?;
    let mut frames = Vec::with_capacity(schedule.len());
    for (m, exp) in schedule.groups.iter().enumerate() {
        let theta = integrate_flux(radiance, exp.duration, params.dark_current)?;
        let group: Vec<Frame> = (0..exp.frames)
            .into_par_iter()
            .map(|n| simulate_frame_serial(&theta, params, StreamKey::new(seed, m as u32, n)))
            .collect();
        frames.push(group);
    }
    Ok(FrameStack {
        width: radiance.width(),
        height: radiance.height(),
        params: *params,
        schedule: schedule.clone(),
        seed,
        frames,
        extra: serde_json::Map::new(),
    })
}

/// `n` pre-ADC readings of a uniform pixel, e.g. for photon-counting
/// histograms.
pub fn simulate_analog_samples(theta: f64, read_noise: f64, n: usize, seed: u64) -> Vec<f64> {
    let key = StreamKey::new(seed, u32::MAX, 0);
    (0..n)
        .into_par_iter()
        .map(|i| sample_analog(theta, read_noise, &mut key.pixel(i as u64)))
        .collect()
}

/// Effective frame count of `frames` temporal samples binned over an `s×s`
/// jot neighbourhood. For locally constant flux the `s²` jots are
/// statistically the same as `s²` extra frames.
pub fn oversampled_frames(frames: u32, spatial: u32) -> u32 {
    frames * spatial * spatial
}
