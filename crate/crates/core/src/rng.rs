//! Seedable, splittable uniform random streams.
//!
//! Each stream is a ChaCha8 keystream. The 256-bit key holds the run seed in
//! its first eight bytes (little endian, remaining bytes zero) and the 64-bit
//! ChaCha stream number holds the stream id, so `(seed, stream_id)` fixes the
//! output on every platform. Child ids are derived with the SplitMix64
//! finalizer (constants `0x9E3779B97F4A7C15`, `0xBF58476D1CE4E5B9`,
//! `0x94D049BB133111EB`).

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream id of child `child_id` forked from stream `parent`.
pub fn child_stream_id(parent: u64, child_id: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ child_id.wrapping_mul(GOLDEN_GAMMA).rotate_left(29))
}

/// Single-owner uniform random stream.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(stream_id);
        RngStream {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform draw from the open interval (0, 1), 53 bits of resolution.
    /// Zero is resampled; one cannot occur.
    #[inline]
    pub fn next_uniform(&mut self) -> f64 {
        loop {
            let bits = self.rng.next_u64() >> 11;
            if bits != 0 {
                return bits as f64 * (1.0 / (1u64 << 53) as f64);
            }
        }
    }

    /// Independent child stream. Depends only on `(seed, stream_id, child_id)`,
    /// never on how far the parent has advanced, and leaves the parent as is.
    pub fn fork(&self, child_id: u64) -> RngStream {
        RngStream::new(self.seed, child_stream_id(self.stream_id, child_id))
    }
}
