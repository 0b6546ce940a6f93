//! Pixel statistics against independent brute-force evaluations.

use num_complex::Complex64;
use qis_hdr::rng::StreamKey;
use qis_hdr::sim::simulate_analog_samples;
use qis_hdr::*;

fn gaussian_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

fn rounding_pmf(sigma: f64) -> Vec<(i64, f64)> {
    if sigma == 0.0 {
        return vec![(0, 1.0)];
    }
    let raw: Vec<(i64, f64)> = (-30..=30)
        .map(|k| {
            let k = k as f64;
            (
                k as i64,
                gaussian_cdf((k + 0.5) / sigma) - gaussian_cdf((k - 0.5) / sigma),
            )
        })
        .collect();
    let total: f64 = raw.iter().map(|p| p.1).sum();
    raw.into_iter().map(|(k, p)| (k, p / total)).collect()
}

fn pois(j: i64, theta: f64) -> f64 {
    if j < 0 {
        return 0.0;
    }
    if theta == 0.0 {
        return if j == 0 { 1.0 } else { 0.0 };
    }
    (-theta + j as f64 * theta.ln() - libm::lgamma(j as f64 + 1.0)).exp()
}

/// `(mean, E[Y²], dmean/dθ)` by summing over every photon count and every
/// read-noise shift.
fn enumerate(theta: f64, l: u32, sigma: f64) -> (f64, f64, f64) {
    let top = (theta + 40.0 * theta.sqrt() + 80.0) as i64;
    let (mut m1, mut m2, mut d1) = (0.0, 0.0, 0.0);
    for (k, pk) in rounding_pmf(sigma) {
        for j in 0..=top {
            let y = (j + k).clamp(0, l as i64) as f64;
            let p = pois(j, theta);
            m1 += pk * p * y;
            m2 += pk * p * y * y;
            d1 += pk * (pois(j - 1, theta) - p) * y;
        }
    }
    (m1, m2, d1)
}

#[test]
fn moments_match_enumeration() {
    for &theta in &[0.0, 0.05, 0.3, 1.0, 2.5, 6.0, 17.0, 60.0] {
        for &l in &[1u32, 2, 3, 7, 15, 255] {
            for &sigma in &[0.0, 0.1, 0.25, 0.4, 0.7] {
                let p = SensorParams::new(l, sigma, 0.0).unwrap();
                let s = pixel_stats(theta, &p).unwrap();
                let (m1, m2, d1) = enumerate(theta, l, sigma);
                let var = m2 - m1 * m1;
                let tol = |x: f64| 1e-10 * (1.0 + x.abs());
                assert!(
                    (s.mean - m1).abs() <= tol(m1),
                    "mean θ={theta} L={l} σ={sigma}: {} vs {m1}",
                    s.mean
                );
                assert!(
                    (s.variance - var).abs() <= tol(m2),
                    "var θ={theta} L={l} σ={sigma}: {} vs {var}",
                    s.variance
                );
                if theta > 0.0 {
                    assert!(
                        (s.slope - d1).abs() <= tol(d1),
                        "slope θ={theta} L={l} σ={sigma}: {} vs {d1}",
                        s.slope
                    );
                }
            }
        }
    }
}

#[test]
fn noise_terms_recombine_into_enumerated_moments() {
    for &theta in &[0.2, 1.5, 4.0, 9.0] {
        for &l in &[1u32, 3, 7] {
            for &sigma in &[0.25, 0.5, 0.9] {
                let model = PixelModel::new(SensorParams::new(l, sigma, 0.0).unwrap()).unwrap();
                let (dmu, dsq) = model.read_noise_corrections(theta).unwrap();
                let psi = |q: u64| incomplete_gamma_psi(q, theta).unwrap();
                let lf = l as f64;
                let mean0 = theta * psi(l as u64 - 1) + lf * (1.0 - psi(l as u64));
                let sq0 = lf * lf - (0..l as u64).map(|q| (2 * q + 1) as f64 * psi(q + 1)).sum::<f64>();
                let (m1, m2, _) = enumerate(theta, l, sigma);
                assert!((mean0 + dmu - m1).abs() < 1e-11, "θ={theta} L={l} σ={sigma}");
                assert!((sq0 + dsq - m2).abs() < 1e-10, "θ={theta} L={l} σ={sigma}");
            }
        }
    }
}

#[test]
fn incomplete_gamma_against_compensated_series() {
    let theta: f64 = 2.5;
    // Neumaier summation of e^{-θ} θ^k / k!, k < 4
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    let mut term = (-theta).exp();
    for k in 0..4 {
        if k > 0 {
            term *= theta / k as f64;
        }
        let t = sum + term;
        c += if sum.abs() >= term.abs() {
            (sum - t) + term
        } else {
            (term - t) + sum
        };
        sum = t;
    }
    let oracle = sum + c;
    assert!((incomplete_gamma_psi(4, theta).unwrap() - oracle).abs() < 1e-12);
    assert!((incomplete_gamma_psi(1, 1.0).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
    assert_eq!(incomplete_gamma_psi(0, 5.0).unwrap(), 0.0);
}

/// Inverse Fourier transform of the characteristic function
/// `exp(θ(e^{it} - 1) - σ²t²/2)`, trapezoidal on a truncated line.
fn density_by_quadrature(z: f64, theta: f64, sigma: f64) -> f64 {
    let t_max = 9.0 / sigma;
    let n = 40_000;
    let h = 2.0 * t_max / n as f64;
    let mut acc = 0.0;
    for i in 0..=n {
        let t = -t_max + i as f64 * h;
        let phi = (Complex64::new(0.0, t).exp() - 1.0) * theta - 0.5 * sigma * sigma * t * t;
        let v = (phi - Complex64::new(0.0, t * z)).exp().re;
        acc += if i == 0 || i == n { 0.5 * v } else { v };
    }
    acc * h / (2.0 * std::f64::consts::PI)
}

#[test]
fn density_matches_fourier_quadrature() {
    for &(z, theta, sigma) in &[(1.0, 1.48, 0.25), (0.4, 1.48, 0.25), (3.0, 5.0, 0.5), (-0.3, 0.2, 0.3)] {
        let a = pz_density(z, theta, sigma).unwrap();
        let b = density_by_quadrature(z, theta, sigma);
        assert!((a - b).abs() < 1e-9, "z={z} θ={theta} σ={sigma}: {a} vs {b}");
    }
}

#[test]
fn ten_million_sample_moments() {
    let p = SensorParams::new(7, 0.25, 0.0).unwrap();
    let s = pixel_stats(2.0, &p).unwrap();
    let n = 10_000_000;
    let frame = simulate_frame(&vec![2.0; n], &p, StreamKey::new(77, 0, 0)).unwrap();
    let nf = n as f64;
    let mean = frame.iter().map(|&c| c as f64).sum::<f64>() / nf;
    let (mut m2, mut m4) = (0.0, 0.0);
    for &c in &frame {
        let d = c as f64 - mean;
        m2 += d * d;
        m4 += d * d * d * d;
    }
    let var = m2 / (nf - 1.0);
    assert!((s.mean - mean).abs() < 3.0 * (var / nf).sqrt());
    assert!((s.variance - var).abs() < 3.0 * ((m4 / nf - var * var) / nf).sqrt());
}

#[test]
fn analog_histogram_passes_chi_square() {
    let (theta, sigma) = (1.48, 0.25);
    let samples = simulate_analog_samples(theta, sigma, 100_000, 3);
    let (lo, width, bins) = (-1.0, 0.1, 80);
    let mut counts = vec![0.0; bins];
    for s in &samples {
        let i = ((s - lo) / width).floor();
        if i >= 0.0 && (i as usize) < bins {
            counts[i as usize] += 1.0;
        }
    }
    // expected bin mass by Simpson's rule on the density
    let mass = |a: f64| {
        let f = |z: f64| pz_density(z, theta, sigma).unwrap();
        let n = 20;
        let h = width / n as f64;
        (0..=n)
            .map(|i| {
                let w = if i == 0 || i == n {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                w * f(a + i as f64 * h)
            })
            .sum::<f64>()
            * h
            / 3.0
    };
    let mut chi2 = 0.0;
    let mut dof = 0;
    for (i, &c) in counts.iter().enumerate() {
        let e = samples.len() as f64 * mass(lo + i as f64 * width);
        if e >= 5.0 {
            chi2 += (c - e) * (c - e) / e;
            dof += 1;
        }
    }
    // Wilson–Hilferty: (χ²/ν)^(1/3) is close to normal
    let nu = (dof - 1) as f64;
    let z = ((chi2 / nu).cbrt() - (1.0 - 2.0 / (9.0 * nu))) / (2.0 / (9.0 * nu)).sqrt();
    let p = 1.0 - gaussian_cdf(z);
    assert!(p > 0.01, "χ² = {chi2} over {dof} bins, p = {p}");
}

#[test]
fn mean_is_monotone_and_bounded() {
    for &l in &[1u32, 3, 7] {
        for &sigma in &[0.0, 0.25, 0.6] {
            let p = SensorParams::new(l, sigma, 0.0).unwrap();
            let mut last = -1.0;
            for i in 0..2000 {
                let theta = 1e-3 * 1.01f64.powi(i);
                let s = pixel_stats(theta, &p).unwrap();
                assert!(s.mean >= last - 1e-14);
                assert!(s.mean >= 0.0 && s.mean <= l as f64);
                assert!(s.variance <= (l as f64).powi(2) / 4.0 + 1e-12);
                last = s.mean;
            }
        }
    }
}

#[test]
fn bit_depth_pushes_the_drop_to_larger_theta() {
    let n = 16;
    let drop_at = |l: u32| {
        let p = SensorParams::new(l, 0.25, 0.0).unwrap();
        (0..4000)
            .map(|i| 1e-2 * 10f64.powf(i as f64 / 1000.0))
            .find(|&t| snr_h(t, &p, n).unwrap() < 0.0 && t > 1.0)
            .unwrap_or(f64::INFINITY)
    };
    let (a, b, c) = (drop_at(1), drop_at(3), drop_at(15));
    assert!(a < b && b < c, "{a} {b} {c}");
}
