//! Quanta image sensor (QIS) simulation, exposure-referred SNR analysis and
//! SNR-optimal fusion of bracketed exposures into HDR flux estimates.
//!
//! ```
//! use qis_hdr::{snr_h, SensorParams};
//!
//! let one_bit = SensorParams::new(1, 0.25, 0.0).unwrap();
//! let db = snr_h(1.0, &one_bit, 1).unwrap();
//! assert!(db > -3.0 && db < 0.0);
//! ```

pub mod analysis;
pub mod cis;
pub mod cli;
pub mod error;
pub mod fusion;
pub mod io;
pub mod ldr;
pub mod rng;
pub mod sim;
pub mod stats;

pub use analysis::{
    cis_fused_snr_curve, cis_snr_curve, dynamic_range, fused_snr_curve, histogram_fit, lmse, log_grid,
    log_grid_per_decade, per_exposure_snr_curves, qis_snr_curve, DynamicRangeReport, HistogramFit, SnrCurve,
    WeightRule,
};
pub use cis::{cis_optimal_weights, cis_snr_h, CisParams};
pub use error::{Error, Result};
pub use fusion::{
    fuse, fuse_cis_weights, fuse_equal_weight, fused_snr, iterative_reconstruct, ldr_estimates, optimal_weights,
    snr_per_exposure, FusionConfig, Reconstruction, Reconstructor, WeightMap,
};
pub use ldr::{ldr_estimate, tonemap_inverse, LdrEstimate, Validity};
pub use sim::{simulate_frame, simulate_stack, Exposure, ExposureSchedule, FrameStack, RadianceMap};
pub use stats::{
    exposure_referred_noise, incomplete_gamma_psi, pixel_stats, pz_density, snr_h, PixelModel, PixelStats, SensorParams,
};
