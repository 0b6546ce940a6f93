//! Mean response, noise and exposure-referred SNR of a single pixel for a
//! few ADC bit depths, with a Monte Carlo spot check.
//!
//! ```text
//! cargo run --release --example pixel_statistics
//! ```

use qis_hdr::rng::StreamKey;
use qis_hdr::{pixel_stats, simulate_frame, snr_h, SensorParams};

fn main() -> qis_hdr::Result<()> {
    let read_noise = 0.25;
    println!(
        "{:>8} {:>5} {:>10} {:>10} {:>10} {:>9}",
        "theta", "bits", "mean", "std", "slope", "snr_dB"
    );
    for bits in [1, 3, 5] {
        let params = SensorParams::with_bits(bits, read_noise, 0.0)?;
        for theta in [0.1, 1.0, 4.0, 20.0, 100.0] {
            let s = pixel_stats(theta, &params)?;
            let db = snr_h(theta, &params, 1)?;
            println!(
                "{theta:>8} {bits:>5} {:>10.4} {:>10.4} {:>10.3e} {db:>9.2}",
                s.mean,
                s.std_dev(),
                s.slope
            );
        }
    }

    // one 3-bit frame of 200k identical pixels against the analytic moments
    let params = SensorParams::with_bits(3, read_noise, 0.0)?;
    let theta = 2.5;
    let frame = simulate_frame(&vec![theta; 200_000], &params, StreamKey::new(1, 0, 0))?;
    let n = frame.len() as f64;
    let mean = frame.iter().map(|&c| c as f64).sum::<f64>() / n;
    let var = frame.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let s = pixel_stats(theta, &params)?;
    println!(
        "\nθ = {theta}, 3-bit: simulated mean {mean:.4} var {var:.4}, analytic {:.4} {:.4}",
        s.mean, s.variance
    );
    Ok(())
}
