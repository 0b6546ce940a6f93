//! Fuse a simulated 3-bit stack with the iterative SNR-optimal weights and
//! compare against equal and exposure-proportional weights.
//!
//! ```text
//! cargo run --release --example hdr_fusion
//! ```

use qis_hdr::fusion::Solver;
use qis_hdr::{
    fuse_cis_weights, fuse_equal_weight, ldr_estimates, lmse, simulate_stack, ExposureSchedule, FusionConfig,
    RadianceMap, Reconstructor, SensorParams,
};

fn main() -> qis_hdr::Result<()> {
    let scene = RadianceMap::log_ramp(256, 32, 1e2, 1e5)?;
    let schedule = ExposureSchedule::parse("10ms:100,1ms:100,100us:100", None)?;
    let params = SensorParams::with_bits(3, 0.25, 0.0)?;
    let stack = simulate_stack(&scene, &schedule, &params, 7)?;
    let truth = scene.flux();

    for solver in [Solver::FixedPoint, Solver::Newton] {
        let config = FusionConfig {
            max_iterations: 15,
            solver,
            ..FusionConfig::default()
        };
        let recon = Reconstructor::new(&stack, &config)?;
        println!("{solver:?}:");
        let r = recon.run_observed(&config, |it, flux, _| {
            println!("  iteration {it:2}: log-MSE {:.5e}", lmse(flux, truth).unwrap());
        });
        println!("  converged {} after {} iterations", r.converged, r.iterations);
    }

    let ldrs = ldr_estimates(&stack)?;
    println!(
        "equal weights:       log-MSE {:.5e}",
        lmse(&fuse_equal_weight(&ldrs)?, truth)?
    );
    println!(
        "exposure weights:    log-MSE {:.5e}",
        lmse(&fuse_cis_weights(&ldrs, params.clip_level as f64)?, truth)?
    );
    for (m, l) in ldrs.iter().enumerate() {
        println!("exposure {m} alone:    log-MSE {:.5e}", lmse(&l.flux, truth)?);
    }
    Ok(())
}
