//! Simulate a bracketed stack of a log-ramp scene and save it along with
//! the ground truth.
//!
//! ```text
//! cargo run --release --example simulate_stack -- [out_dir]
//! ```

use std::path::PathBuf;

use qis_hdr::{io, simulate_stack, ExposureSchedule, RadianceMap, SensorParams};

fn main() -> qis_hdr::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(std::env::temp_dir);
    let scene = RadianceMap::log_ramp(256, 64, 1e2, 1e6)?;
    let schedule = ExposureSchedule::parse("10ms:200,1ms:200,100us:200", None)?;
    let params = SensorParams::with_bits(1, 0.25, 0.0)?;

    let stack = simulate_stack(&scene, &schedule, &params, 2024)?;
    for (group, exp) in stack.frames.iter().zip(&schedule.groups) {
        let ones = group.iter().flatten().filter(|&&c| c > 0).count();
        let total = group.len() * stack.pixels();
        println!(
            "{:>8.0e} s × {}: {:.1}% of readings non-zero",
            exp.duration,
            exp.frames,
            100.0 * ones as f64 / total as f64
        );
    }

    let truth = dir.join("ramp_truth.pfm");
    let frames = dir.join("ramp.qstk");
    io::write_pfm(&truth, &scene)?;
    io::write_stack(&frames, &stack)?;
    println!("wrote {} and {}", truth.display(), frames.display());
    Ok(())
}
