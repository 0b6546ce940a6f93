//! Per-pixel random streams.
//!
//! Every pixel of every frame draws from its own ChaCha8 stream: the key is
//! derived from `(seed, group, frame)` and the stream number is the pixel
//! index. Simulated stacks therefore do not depend on thread count or
//! evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

pub type PixelRng = ChaCha8Rng;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Identifies one frame of a simulated stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey {
    pub seed: u64,
    pub group: u32,
    pub frame: u32,
}

impl StreamKey {
    pub fn new(seed: u64, group: u32, frame: u32) -> Self {
        Self { seed, group, frame }
    }

    fn key_bytes(&self) -> [u8; 32] {
        let a = mix64(self.seed ^ 0x5155_4953_5354_4b31);
        let b = mix64(a ^ (self.group as u64).wrapping_mul(0xD2B7_4407_B1CE_6E93));
        let c = mix64(b ^ (self.frame as u64).wrapping_mul(0xCA5A_8263_9512_1157));
        let d = mix64(c ^ 0x9E37_79B9_7F4A_7C15);
        let mut out = [0u8; 32];
        for (chunk, w) in out.chunks_exact_mut(8).zip([a, b, c, d]) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        out
    }

    pub fn pixel(&self, pixel: u64) -> PixelRng {
        let mut rng = ChaCha8Rng::from_seed(self.key_bytes());
        rng.set_stream(pixel);
        rng
    }
}

/// Poisson draw; zero for non-positive means.
#[inline]
pub fn poisson(rng: &mut PixelRng, mean: f64) -> u64 {
    if !(mean > 0.0) {
        return 0;
    }
    Poisson::new(mean).map(|d| d.sample(rng) as u64).unwrap_or(u64::MAX)
}

#[inline]
pub fn standard_normal(rng: &mut PixelRng) -> f64 {
    StandardNormal.sample(rng)
}
