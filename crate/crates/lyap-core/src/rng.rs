//! Seed derivation and per-consumer random streams.
//!
//! All randomness in the crate flows from one master `u64` seed. Every
//! consumer (a path, a lattice site, a sample index) gets its own stream
//! derived from `(master, domain tag, index)` by a SplitMix64 chain, so
//! work can be farmed out in any order and still reproduce the sequential
//! result bit for bit.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Domain tag for potential-field site draws.
pub const TAG_FIELD: u64 = 0x5149_44e1;
/// Domain tag for walk path streams.
pub const TAG_PATH: u64 = 0x9a3c_02b7;
/// Domain tag for per-sample disorder realizations.
pub const TAG_SAMPLE: u64 = 0x3d71_66cd;

/// One SplitMix64 step: advances `state` and returns the next output.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent sub-seed from `(master, tag, index)`.
pub fn derive_seed(master: u64, tag: u64, index: u64) -> u64 {
    let mut s = master;
    let a = splitmix64(&mut s);
    let mut t = a ^ tag;
    let b = splitmix64(&mut t);
    let mut u = b ^ index;
    splitmix64(&mut u)
}

/// Hashes integer lattice coordinates to a stream index, so a site draws the
/// same value regardless of which finite box it is viewed through.
pub fn site_stream_index(coords: &[i64]) -> u64 {
    let mut acc: u64 = 0x243f_6a88_85a3_08d3 ^ (coords.len() as u64);
    for &c in coords {
        acc ^= c as u64;
        acc = splitmix64(&mut acc);
    }
    acc
}

/// Maps a `u64` to a double in `[0, 1)` using the top 53 bits.
pub fn u64_to_unit(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// One-shot uniform draw in `[0, 1)` for the given stream coordinates.
pub fn unit_draw(master: u64, tag: u64, index: u64) -> f64 {
    u64_to_unit(derive_seed(master, tag, index))
}

/// Buffered bit stream over a ChaCha8 generator.
///
/// Bits are consumed LSB-first out of 64-bit blocks. Walkers draw their step
/// directions from here; the block-skipping fast paths in [`crate::walk`]
/// consume the exact same bits in the exact same order as the step-by-step
/// code, which is what makes the two interchangeable under one seed.
pub struct BitSource {
    rng: ChaCha8Rng,
    buf: u64,
    left: u32,
}

impl BitSource {
    pub fn new(seed: u64) -> Self {
        BitSource { rng: ChaCha8Rng::seed_from_u64(seed), buf: 0, left: 0 }
    }

    #[inline]
    fn refill(&mut self) {
        self.buf = self.rng.next_u64();
        self.left = 64;
    }

    /// Next single bit.
    #[inline]
    pub fn next_bit(&mut self) -> u64 {
        if self.left == 0 {
            self.refill();
        }
        let b = self.buf & 1;
        self.buf >>= 1;
        self.left -= 1;
        b
    }

    /// Next `n` bits (LSB of the result is the first bit drawn), `n <= 16`.
    #[inline]
    pub fn next_bits(&mut self, n: u32) -> u64 {
        debug_assert!(n <= 16);
        if self.left < n {
            // Keep block alignment for the fast paths: never splice a draw
            // across two blocks for the 1- and 2-bit streams used by walks.
            self.refill();
        }
        let v = self.buf & ((1u64 << n) - 1);
        self.buf >>= n;
        self.left -= n;
        v
    }

    /// Number of unread bits left in the current block.
    #[inline]
    pub fn bits_in_block(&self) -> u32 {
        self.left
    }

    /// Consumes every unread bit of the current block and returns them
    /// (LSB-first packed) together with their count.
    #[inline]
    pub fn take_block(&mut self) -> (u64, u32) {
        if self.left == 0 {
            self.refill();
        }
        let out = (self.buf, self.left);
        self.buf = 0;
        self.left = 0;
        out
    }

    /// Consumes exactly `n` unread bits of the current block (`n <= bits_in_block`).
    #[inline]
    pub fn take_bits(&mut self, n: u32) -> u64 {
        debug_assert!(n <= self.left && n >= 1 && n <= 64);
        let v = if n == 64 { self.buf } else { self.buf & ((1u64 << n) - 1) };
        self.buf = if n == 64 { 0 } else { self.buf >> n };
        self.left -= n;
        v
    }

    /// Uniform draw in `[0, 1)` (consumes the rest of the current block).
    pub fn next_unit(&mut self) -> f64 {
        self.buf = 0;
        self.left = 0;
        u64_to_unit(self.rng.next_u64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn derive_seed_changes_with_every_coordinate() {
        let base = derive_seed(1, 2, 3);
        assert_ne!(base, derive_seed(2, 2, 3));
        assert_ne!(base, derive_seed(1, 3, 3));
        assert_ne!(base, derive_seed(1, 2, 4));
        assert_eq!(base, derive_seed(1, 2, 3));
    }

    #[test]
    fn site_stream_index_distinguishes_signs_and_length() {
        assert_ne!(site_stream_index(&[1, 0]), site_stream_index(&[-1, 0]));
        assert_ne!(site_stream_index(&[1]), site_stream_index(&[1, 0]));
        assert_ne!(site_stream_index(&[0, 1]), site_stream_index(&[1, 0]));
    }

    #[test]
    fn unit_draws_lie_in_unit_interval() {
        for i in 0..1000 {
            let u = unit_draw(42, TAG_FIELD, i);
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn bit_stream_matches_whole_block_reads() {
        let mut a = BitSource::new(7);
        let mut b = BitSource::new(7);
        let bits: Vec<u64> = (0..64).map(|_| a.next_bit()).collect();
        let (block, n) = b.take_block();
        assert_eq!(n, 64);
        for (i, &bit) in bits.iter().enumerate() {
            assert_eq!(bit, (block >> i) & 1);
        }
    }
}
