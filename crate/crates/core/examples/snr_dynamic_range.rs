//! SNR curves and dynamic range of a conventional sensor, a single 1-bit
//! exposure and four fused decade exposures.
//!
//! ```text
//! cargo run --release --example snr_dynamic_range -- [curve.csv]
//! ```

use qis_hdr::analysis::POINTS_PER_DECADE;
use qis_hdr::{
    cis_snr_curve, dynamic_range, fused_snr_curve, io, log_grid_per_decade, per_exposure_snr_curves, qis_snr_curve,
    CisParams, ExposureSchedule, SensorParams, WeightRule,
};

fn main() -> qis_hdr::Result<()> {
    let one_bit = SensorParams::with_bits(1, 0.25, 0.0)?;

    let grid = log_grid_per_decade(1e-4, 1e8, POINTS_PER_DECADE)?;
    let cis = cis_snr_curve(&CisParams::new(4000, 2.0)?, 1.0, 1, &grid)?;
    let qis = qis_snr_curve(&one_bit, 1.0, 4000, &grid)?;
    let schedule = ExposureSchedule::parse("100ms:1000,10ms:1000,1ms:1000,100us:1000", None)?;
    let fused = fused_snr_curve(&one_bit, &schedule, &WeightRule::Optimal, &grid)?;
    let equal = fused_snr_curve(&one_bit, &schedule, &WeightRule::Equal, &grid)?;

    for (name, curve) in [
        ("CIS", &cis),
        ("1-bit QIS", &qis),
        ("fused", &fused),
        ("fused, equal w", &equal),
    ] {
        let dr = dynamic_range(curve, 0.0)?;
        let (at, peak) = curve.peak();
        println!(
            "{name:>15}: DR {:6.2} dB  [{:.3e}, {:.3e}]  peak {peak:.1} dB at {at:.3e}",
            dr.range_db, dr.floor, dr.ceiling
        );
    }

    // dips between neighbouring exposure peaks
    let peaks: Vec<f64> = per_exposure_snr_curves(&one_bit, &schedule, &grid)?
        .iter()
        .map(|c| c.peak().0)
        .collect();
    for pair in peaks.windows(2) {
        let dip = fused
            .iter()
            .filter(|(x, _)| *x > pair[0] && *x < pair[1])
            .map(|(_, db)| db)
            .fold(f64::INFINITY, f64::min);
        println!(
            "fused minimum between peaks at {:.2e} and {:.2e}: {dip:.2} dB",
            pair[0], pair[1]
        );
    }

    if let Some(path) = std::env::args().nth(1) {
        io::write_curve_csv(&path, &fused)?;
        println!("wrote {path}");
    }
    Ok(())
}
