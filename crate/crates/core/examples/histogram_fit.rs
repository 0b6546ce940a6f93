//! Recover the signal level of a photon-counting pixel from the histogram
//! of its analog readings.
//!
//! ```text
//! cargo run --release --example histogram_fit
//! ```

use qis_hdr::sim::simulate_analog_samples;
use qis_hdr::{histogram_fit, pz_density};

fn main() -> qis_hdr::Result<()> {
    let (theta, sigma, dt) = (1.48, 0.25, 1e-3);
    let samples = simulate_analog_samples(theta, sigma, 50_000, 11);
    let fit = histogram_fit(&samples, sigma, 0.0, dt)?;
    println!(
        "true λΔ {theta}, fitted {:.4} ({:.0} photons/s), {} bins, mse {:.3e}",
        fit.theta, fit.flux, fit.bins, fit.mse
    );

    // coarse text histogram with the fitted density
    let width = 0.25;
    for i in 0..24 {
        let lo = -0.5 + i as f64 * width;
        let count = samples.iter().filter(|&&z| z >= lo && z < lo + width).count();
        let empirical = count as f64 / (samples.len() as f64 * width);
        let model = pz_density(lo + width / 2.0, fit.theta, sigma)?;
        println!(
            "{lo:6.2} {:<40} {empirical:.3} / {model:.3}",
            "#".repeat((empirical * 40.0) as usize)
        );
    }
    Ok(())
}
