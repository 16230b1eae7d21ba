//! Reproducible random streams.
//!
//! A stream is identified by `(master_seed, stream_index)` and backed by
//! ChaCha8 with the 64-bit stream selector set to `stream_index`. The
//! generator is defined bit-for-bit, so a given pair reproduces the same
//! sequence on every platform.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self { master_seed, stream_index }
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn generator(&self) -> StreamRng {
        let mut inner = ChaCha8Rng::seed_from_u64(self.master_seed);
        inner.set_stream(self.stream_index);
        StreamRng(inner)
    }
}

/// Generator handed out by [`RngStream::generator`].
#[derive(Debug, Clone)]
pub struct StreamRng(ChaCha8Rng);

impl RngCore for StreamRng {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.0.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand_core::Error> {
        self.0.try_fill_bytes(dest)
    }
}

/// Uniform draw from the open interval `(0, 1)`.
#[inline]
pub fn open01<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    ((rng.next_u64() >> 11) as f64 + 0.5) * SCALE
}

/// Fair coin.
#[inline]
pub fn coin<R: RngCore + ?Sized>(rng: &mut R) -> bool {
    rng.next_u64() >> 63 == 1
}

/// Derives an unrelated master seed from `seed` and a label (SplitMix64
/// finalizer), for experiments that need several independent families of
/// streams under one configured seed.
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    let mut z = seed ^ label.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
