//! Per-exposure flux estimates: average the frames of one exposure group,
//! undo the sensor's nonlinear response and normalize by exposure time.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::Frame;
use crate::stats::{PixelModel, SensorParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Validity {
    Ok,
    /// No signal above the read-noise floor; the estimate is 0.
    ClippedLow,
    /// At or beyond the saturation clamp; the estimate is `θ_cap / Δ`.
    ClippedHigh,
}

/// Low-dynamic-range flux estimate `S[m]` from one exposure group.
#[derive(Debug, Clone, PartialEq)]
pub struct LdrEstimate {
    pub exposure: f64,
    pub frames: u32,
    /// Photons per second.
    pub flux: Vec<f64>,
    pub validity: Vec<Validity>,
}

fn group_sums(group: &[Frame]) -> Result<Vec<u64>> {
    let first = group.first().ok_or_else(|| Error::domain("empty exposure group"))?;
    let n = first.len();
    if let Some(i) = group.iter().position(|f| f.len() != n) {
        return Err(Error::domain(format!("frame {i} size differs from frame 0")));
    }
    Ok((0..n)
        .into_par_iter()
        .map(|p| group.iter().map(|f| f[p] as u64).sum())
        .collect())
}

/// Per-pixel arithmetic mean of `K` frames.
pub fn mean_frame(group: &[Frame]) -> Result<Vec<f64>> {
    let k = group.len() as f64;
    Ok(group_sums(group)?.into_iter().map(|s| s as f64 / k).collect())
}

const BISECTION_MAX_ITER: usize = 200;
const BISECTION_REL_WIDTH: f64 = 1e-13;

/// Inverse of the mean response `θ ↦ μ_Y(θ)` for a `K`-frame average.
///
/// Averages at or below `μ_Y(0)` map to 0; averages above
/// `μ_Y(θ_cap) = L - 1/(2K)` are clamped to `θ_cap` so saturated pixels stay
/// finite.
#[derive(Debug, Clone)]
pub struct ToneInverse {
    model: PixelModel,
    frames: u32,
    theta_cap: f64,
    mean_cap: f64,
    mean_floor: f64,
    closed_form: bool,
}

impl ToneInverse {
    pub fn new(params: &SensorParams, frames: u32) -> Result<Self> {
        if frames == 0 {
            return Err(Error::domain("frame count must be ≥ 1"));
        }
        let model = PixelModel::new(*params)?;
        let l = params.clip_level as f64;
        let target = l - 0.5 / frames as f64;
        let closed_form = params.is_single_bit() && params.read_noise == 0.0;
        let mean_floor = model.stats_unchecked(0.0).mean;

        let theta_cap = if closed_form {
            (2.0 * frames as f64).ln()
        } else {
            let mut hi = l.max(1.0);
            while model.stats_unchecked(hi).mean < target {
                hi *= 2.0;
                if hi > 1e12 {
                    return Err(Error::Numerical("saturation cap not bracketed".into()));
                }
            }
            bisect(&model, target, 0.0, hi)
        };
        let mean_cap = if closed_form {
            target
        } else {
            model.stats_unchecked(theta_cap).mean
        };
        Ok(Self {
            model,
            frames,
            theta_cap,
            mean_cap,
            mean_floor,
            closed_form,
        })
    }

    pub fn frames(&self) -> u32 {
        self.frames
    }

    pub fn theta_cap(&self) -> f64 {
        self.theta_cap
    }

    pub fn params(&self) -> &SensorParams {
        self.model.params()
    }

    pub fn invert(&self, mean: f64) -> Result<(f64, Validity)> {
        let l = self.model.params().clip_level as f64;
        if !(0.0..=l).contains(&mean) {
            return Err(Error::domain(format!("mean {mean} outside [0, {l}]")));
        }
        if mean <= self.mean_floor {
            return Ok((0.0, Validity::ClippedLow));
        }
        if mean > self.mean_cap {
            return Ok((self.theta_cap, Validity::ClippedHigh));
        }
        let theta = if self.closed_form {
            -(-mean).ln_1p()
        } else {
            bisect(&self.model, mean, 0.0, self.theta_cap)
        };
        Ok((theta, Validity::Ok))
    }
}

/// Solve `μ_Y(θ) = target` on `[lo, hi]`; `μ_Y` is non-decreasing.
fn bisect(model: &PixelModel, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..BISECTION_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if model.stats_unchecked(mid).mean < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= BISECTION_REL_WIDTH * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// `θ̂ = f⁻¹(mean)` for a `K`-frame average.
pub fn tonemap_inverse(mean: f64, params: &SensorParams, frames: u32) -> Result<(f64, Validity)> {
    ToneInverse::new(params, frames)?.invert(mean)
}

/// `S[m] = (θ̂ - μ_dark Δ) / Δ` per pixel, in photons per second.
pub fn ldr_estimate(group: &[Frame], exposure: f64, params: &SensorParams) -> Result<LdrEstimate> {
    if !(exposure > 0.0) || !exposure.is_finite() {
        return Err(Error::domain("exposure must be positive"));
    }
    let sums = group_sums(group)?;
    let k = group.len() as u32;
    let inverse = ToneInverse::new(params, k)?;

    // the average only takes K·L + 1 distinct values, so invert each once
    let mut table: HashMap<u64, (f64, Validity)> = HashMap::new();
    for &s in &sums {
        if let std::collections::hash_map::Entry::Vacant(e) = table.entry(s) {
            e.insert(inverse.invert(s as f64 / k as f64)?);
        }
    }
    let dark = params.dark_current * exposure;
    let (flux, validity) = sums
        .iter()
        .map(|s| {
            let (theta, v) = table[s];
            (((theta - dark) / exposure).max(0.0), v)
        })
        .unzip();
    Ok(LdrEstimate {
        exposure,
        frames: k,
        flux,
        validity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{simulate_stack, ExposureSchedule, RadianceMap};
    use crate::stats::pixel_stats;

    fn p(l: u32, s: f64) -> SensorParams {
        SensorParams::new(l, s, 0.0).unwrap()
    }

    #[test]
    fn mean_frame_examples() {
        let one = vec![vec![3u16, 0, 7]];
        assert_eq!(mean_frame(&one).unwrap(), vec![3.0, 0.0, 7.0]);
        let g = vec![vec![0u16], vec![1], vec![1], vec![0]];
        assert_eq!(mean_frame(&g).unwrap(), vec![0.5]);
        let sat = vec![vec![7u16; 2]; 5];
        assert_eq!(mean_frame(&sat).unwrap(), vec![7.0, 7.0]);
        assert!(mean_frame(&[]).is_err());
    }

    #[test]
    fn single_bit_inverse() {
        let (t, v) = tonemap_inverse(0.5, &p(1, 0.0), 100).unwrap();
        assert!((t - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(v, Validity::Ok);
    }

    #[test]
    fn zero_mean_is_clipped_low() {
        for params in [p(1, 0.0), p(7, 0.25), p(3, 0.0)] {
            assert_eq!(tonemap_inverse(0.0, &params, 10).unwrap(), (0.0, Validity::ClippedLow));
        }
    }

    #[test]
    fn out_of_range_mean_is_rejected() {
        assert!(tonemap_inverse(7.5, &p(7, 0.25), 10).is_err());
        assert!(tonemap_inverse(-0.1, &p(7, 0.25), 10).is_err());
    }

    #[test]
    fn multibit_inverse_hits_target() {
        let params = p(7, 0.25);
        let (t, v) = tonemap_inverse(3.2, &params, 100).unwrap();
        assert_eq!(v, Validity::Ok);
        assert!((pixel_stats(t, &params).unwrap().mean - 3.2).abs() < 1e-9);
        // bracket against a dense forward table
        let grid: Vec<(f64, f64)> = (0..=20_000)
            .map(|i| {
                let th = i as f64 * 1e-3;
                (th, pixel_stats(th, &params).unwrap().mean)
            })
            .collect();
        let idx = grid.iter().position(|&(_, m)| m >= 3.2).unwrap();
        assert!(grid[idx - 1].0 <= t && t <= grid[idx].0);
    }

    #[test]
    fn saturated_mean_stays_finite() {
        for params in [p(1, 0.0), p(1, 0.25), p(7, 0.25)] {
            let l = params.clip_level as f64;
            let (t, v) = tonemap_inverse(l, &params, 50).unwrap();
            assert!(t.is_finite() && t > 0.0);
            assert_eq!(v, Validity::ClippedHigh);
        }
        let inv = ToneInverse::new(&p(1, 0.0), 50).unwrap();
        assert!((inv.theta_cap() - 100f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn ldr_examples() {
        let params = p(1, 0.0);
        let dark = vec![vec![0u16; 3]; 4];
        let e = ldr_estimate(&dark, 1e-3, &params).unwrap();
        assert!(e.flux.iter().all(|&s| s == 0.0));
        assert!(e.validity.iter().all(|&v| v == Validity::ClippedLow));

        let half = vec![vec![0u16], vec![1]];
        let e = ldr_estimate(&half, 1e-3, &params).unwrap();
        assert!((e.flux[0] - std::f64::consts::LN_2 / 1e-3).abs() < 1e-9);
        assert!((e.flux[0] - 693.1).abs() < 0.1);
    }

    #[test]
    fn ldr_is_consistent_on_uniform_scene() {
        let scene = RadianceMap::uniform(32, 32, 1e3).unwrap();
        let sched = ExposureSchedule::parse("1ms:10000", None).unwrap();
        let params = p(3, 0.0);
        let stack = simulate_stack(&scene, &sched, &params, 3).unwrap();
        let e = ldr_estimate(&stack.frames[0], 1e-3, &params).unwrap();
        let mean = e.flux.iter().sum::<f64>() / e.flux.len() as f64;
        assert!((mean / 1e3 - 1.0).abs() < 0.02, "{mean}");
    }
}
