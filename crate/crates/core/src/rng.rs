//! Counter-based random streams.
//!
//! Every random draw in a chain is taken from a ChaCha8 stream addressed by
//! `(seed, sweep, phase, index)`. Row-parallel updates therefore produce the
//! same numbers whatever the worker count or scheduling order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::scalar::Real;

/// Named purposes for sub-streams within one sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Phase {
    Init = 1,
    Latent = 2,
    Allocation = 3,
    Traits = 4,
    Weights = 5,
    Loadings = 6,
    Thresholds = 7,
    ThresholdLatent = 8,
    Simulate = 9,
    Replicate = 10,
    Residual = 11,
    Geweke = 12,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Address of a family of streams; `stream(index)` selects one member.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey {
    key: [u8; 32],
}

impl StreamKey {
    pub fn new(seed: u64, sweep: u64, phase: Phase) -> Self {
        Self::with_tag(seed, sweep, phase, 0)
    }

    /// Same as [`StreamKey::new`] with an extra discriminator (item, cluster, ...).
    pub fn with_tag(seed: u64, sweep: u64, phase: Phase, tag: u64) -> Self {
        let mut state = seed ^ 0x6A09_E667_F3BC_C908;
        let mut key = [0u8; 32];
        let words = [
            splitmix64(&mut state) ^ sweep.wrapping_mul(0xD1B5_4A32_D192_ED03),
            splitmix64(&mut state) ^ (phase as u64).wrapping_mul(0x8CB9_2BA7_2F3D_8DD7),
            splitmix64(&mut state) ^ tag.wrapping_mul(0xABC9_8388_FB8F_AC03),
            splitmix64(&mut state),
        ];
        let mut mix = words[0] ^ words[1].rotate_left(17) ^ words[2].rotate_left(41);
        for (chunk, w) in key.chunks_mut(8).zip(words) {
            let v = w ^ splitmix64(&mut mix);
            chunk.copy_from_slice(&v.to_le_bytes());
        }
        StreamKey { key }
    }

    pub fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(index);
        rng
    }
}

#[inline]
pub fn std_normal<T: Real, R: Rng + ?Sized>(rng: &mut R) -> T {
    T::of(rng.sample::<f64, _>(StandardNormal))
}

/// Uniform on the open interval (0, 1).
#[inline]
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}
