//! Weighting, lookup tables and reconstruction checked from the outside.

use qis_hdr::fusion::{build_snr_lut, fused_noise, Solver};
use qis_hdr::sim::simulate_analog_samples;
use qis_hdr::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn one_bit() -> SensorParams {
    SensorParams::new(1, 0.25, 0.0).unwrap()
}

fn decades(frames: u32) -> ExposureSchedule {
    ExposureSchedule::from_groups(
        [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&d| Exposure { duration: d, frames })
            .collect(),
    )
    .unwrap()
}

#[test]
fn per_exposure_snr_is_the_scaled_inverse_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let bits = rng.random_range(1..=4u32);
        let sigma = rng.random_range(0.0..0.8);
        let params = SensorParams::with_bits(bits, sigma, 0.0).unwrap();
        let exposure = 10f64.powf(rng.random_range(-5.0..-1.0));
        let flux = 10f64.powf(rng.random_range(0.0..6.0));
        let frames = rng.random_range(1..2000u32);
        let theta = flux * exposure;
        let st = pixel_stats(theta, &params).unwrap();
        let want = if st.variance > 0.0 {
            (frames as f64).sqrt() * theta * st.slope / st.variance.sqrt()
        } else {
            0.0
        };
        let got = snr_per_exposure(flux, exposure, frames, &params).unwrap();
        assert!(
            (got - want).abs() <= 1e-10 * want.max(1e-300),
            "bits={bits} σ={sigma} θ={theta}: {got} vs {want}"
        );
    }
}

#[test]
fn lut_is_exact_on_the_grid_and_close_between() {
    let params = SensorParams::with_bits(3, 0.25, 0.0).unwrap();
    let schedule = decades(100);
    let config = FusionConfig::default();
    let lut = build_snr_lut(&schedule, &params, &config).unwrap();
    let grid = lut.grid();
    for (m, g) in schedule.groups.iter().enumerate() {
        for &theta in grid.iter().step_by(97) {
            let exact = snr_per_exposure(theta / g.duration, g.duration, g.frames, &params).unwrap();
            let got = lut.query(m, theta / g.duration);
            assert!((got - exact).abs() <= 1e-9 * exact, "m={m} θ={theta}");
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..1000 {
        let m = rng.random_range(0..schedule.len());
        let d = schedule.groups[m].duration;
        // stay below the saturation cliff where the SNR falls off a ledge
        let theta = 10f64.powf(rng.random_range(-5.0..1.0));
        let exact = snr_per_exposure(theta / d, d, 100, &params).unwrap();
        let got = lut.query(m, theta / d);
        assert!((got - exact).abs() <= 1e-3 * exact, "m={m} θ={theta}: {got} vs {exact}");
    }
    // below θ_min the first entry is returned
    let first = lut.query_db(0, grid[0] / schedule.groups[0].duration);
    assert_eq!(lut.query_db(0, 1e-12), first);
}

#[test]
fn optimal_weights_beat_every_simplex_point() {
    let snr = [1.0, 2.0, 0.0];
    let w = optimal_weights(&snr).unwrap();
    assert!(!w.degenerate);
    for (a, b) in w.weights.iter().zip([0.2, 0.8, 0.0]) {
        assert!((a - b).abs() < 1e-15);
    }
    let best = fused_noise(&w.weights, &snr);
    let snr = [0.7, 3.1, 1.9];
    let best3 = fused_noise(&optimal_weights(&snr).unwrap().weights, &snr);
    let n = 200;
    for i in 0..=n {
        let a = i as f64 / n as f64;
        assert!(fused_noise(&[a, 1.0 - a, 0.0], &[1.0, 2.0, 0.0]) >= best - 1e-12);
        for j in 0..=(n - i) {
            let b = j as f64 / n as f64;
            let c = 1.0 - a - b;
            assert!(fused_noise(&[a, b, c], &snr) >= best3 - 1e-12);
        }
    }
}

#[test]
fn single_exposure_reconstruction_is_its_ldr() {
    let radiance = RadianceMap::log_ramp(64, 2, 10.0, 1e5).unwrap();
    let schedule = ExposureSchedule::from_groups(vec![Exposure {
        duration: 1e-3,
        frames: 200,
    }])
    .unwrap();
    let stack = simulate_stack(&radiance, &schedule, &one_bit(), 5).unwrap();
    let ldr = ldr_estimates(&stack).unwrap();
    let rec = iterative_reconstruct(&stack, &FusionConfig::default()).unwrap();
    assert_eq!(rec.flux, ldr[0].flux);
    assert!(rec.converged);
    assert_eq!(rec.iterations, 1);
}

#[test]
fn converged_weights_match_the_weights_at_the_truth() {
    let params = one_bit();
    let radiance = RadianceMap::log_ramp(240, 1, 1.0, 1e7).unwrap();
    let stack = simulate_stack(&radiance, &decades(1000), &params, 21).unwrap();
    let config = FusionConfig {
        max_iterations: 30,
        solver: Solver::Newton,
        ..FusionConfig::default()
    };
    let recon = Reconstructor::new(&stack, &config).unwrap();
    let out = recon.run(&config);
    let (ideal, _) = recon.weights_at(radiance.flux());
    let mut checked = 0;
    for (p, &truth) in radiance.flux().iter().enumerate() {
        let snr: Vec<f64> = (0..3).map(|m| recon.lut().query(m, truth)).collect();
        if 20.0 * fused_snr(ideal.pixel(p), &snr).log10() < 10.0 {
            continue;
        }
        checked += 1;
        for (a, b) in out.weights.pixel(p).iter().zip(ideal.pixel(p)) {
            assert!(
                (a - b).abs() < 0.05,
                "pixel {p} at λ={truth} est {}: {:?} vs {:?} snr {snr:?}",
                out.flux[p],
                out.weights.pixel(p),
                ideal.pixel(p)
            );
        }
    }
    assert!(checked > 150, "only {checked} pixels above 10 dB");
}

#[test]
fn fixed_point_changes_shrink_and_newton_converges() {
    let radiance = RadianceMap::log_ramp(200, 1, 1e2, 1e5).unwrap();
    let stack = simulate_stack(&radiance, &decades(1000), &one_bit(), 22).unwrap();
    let fixed = iterative_reconstruct(
        &stack,
        &FusionConfig {
            max_iterations: 12,
            ..FusionConfig::default()
        },
    )
    .unwrap();
    let c = &fixed.changes;
    assert!(c[c.len() - 1] < c[1], "{c:?}");
    let newton = iterative_reconstruct(
        &stack,
        &FusionConfig {
            max_iterations: 20,
            solver: Solver::Newton,
            ..FusionConfig::default()
        },
    )
    .unwrap();
    assert!(newton.converged, "{:?}", newton.changes);
    // both iterations share a fixed point
    let gap = newton
        .flux
        .iter()
        .zip(&fixed.flux)
        .map(|(a, b)| (a - b).abs() / a)
        .fold(0.0, f64::max);
    assert!(gap < 0.05, "gap {gap}");
}

#[test]
fn proposed_fusion_beats_the_baselines_at_three_bits() {
    let params = SensorParams::with_bits(3, 0.25, 0.0).unwrap();
    let radiance = RadianceMap::log_ramp(300, 1, 1e2, 1e6).unwrap();
    let schedule = ExposureSchedule::parse("8ms:40,1ms:40,125us:40", None).unwrap();
    let stack = simulate_stack(&radiance, &schedule, &params, 23).unwrap();
    let ldr = ldr_estimates(&stack).unwrap();
    let truth = radiance.flux();
    let proposed = lmse(
        &iterative_reconstruct(&stack, &FusionConfig::default()).unwrap().flux,
        truth,
    )
    .unwrap();
    let equal = lmse(&fuse_equal_weight(&ldr).unwrap(), truth).unwrap();
    let cis = lmse(&fuse_cis_weights(&ldr, params.clip_level as f64).unwrap(), truth).unwrap();
    assert!(proposed < equal && proposed < cis, "{proposed} {equal} {cis}");
}

#[test]
fn histogram_fit_is_unbiased() {
    let sigma = 0.25;
    let dt = 1e-3;
    for &theta in &[0.5, 1.48, 3.0] {
        let reps = 10;
        let fits: Vec<f64> = (0..reps)
            .map(|r| {
                let s = simulate_analog_samples(theta, sigma, 20_000, 100 + r);
                histogram_fit(&s, sigma, 0.0, dt).unwrap().theta
            })
            .collect();
        let mean = fits.iter().sum::<f64>() / reps as f64;
        let var = fits.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let se = (var / reps as f64).sqrt();
        assert!(
            (mean - theta).abs() <= 3.0 * se + 1e-3 * theta,
            "θ={theta}: {mean} ± {se}"
        );
    }
}

#[test]
fn uniform_three_bit_scenes_converge_within_five_iterations() {
    let params = SensorParams::with_bits(3, 0.25, 0.0).unwrap();
    let schedule = decades(100);
    for &flux in &[300.0, 3000.0, 30000.0] {
        let scene = RadianceMap::uniform(64, 64, flux).unwrap();
        let stack = simulate_stack(&scene, &schedule, &params, 7).unwrap();
        let r = iterative_reconstruct(&stack, &FusionConfig::default()).unwrap();
        assert!(r.converged && r.iterations <= 5, "λ={flux}: {:?}", r.changes);
    }
}
