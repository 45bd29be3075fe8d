//! Randomness plumbing.
//!
//! Protocol code draws randomness only through [`coin`] and
//! [`fill_random`], so that a [`TapeRng`] replaying a fixed bit string
//! drives exactly one tape bit per draw. Enumerating all tapes of the right
//! length then enumerates every execution of a protocol with one-bit values.

use rand::{Error, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

/// A fair coin.
pub fn coin<R: RngCore + ?Sized>(rng: &mut R) -> bool {
    rng.next_u32() & 1 == 1
}

/// Fills `buf` with random bytes.
pub fn fill_random<R: RngCore + ?Sized>(rng: &mut R, buf: &mut [u8]) {
    rng.fill_bytes(buf);
}

/// Uniform float in `[0, 1)` with 53 bits of precision.
pub fn unit_interval<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

/// Uniform integer in `0..bound`.
pub fn below<R: RngCore + ?Sized>(rng: &mut R, bound: usize) -> usize {
    debug_assert!(bound > 0);
    // Rejection sampling keeps the draw exactly uniform.
    let bound = bound as u64;
    let zone = u64::MAX - (u64::MAX % bound);
    loop {
        let v = rng.next_u64();
        if v < zone {
            return (v % bound) as usize;
        }
    }
}

/// Deterministic stream for a seed.
pub fn seeded(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Seed of trial `index` under `master`: the first eight bytes of
/// SHA-256(master || index), little-endian.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(index.to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Replays the bits of `tape` (least significant first), one per draw.
///
/// `next_u32`/`next_u64` return the bit as 0 or 1; each byte written by
/// `fill_bytes` becomes `0x00` or `0xff`. Reading past `len` bits yields
/// zeros and is recorded in [`TapeRng::overrun`].
#[derive(Debug, Clone)]
pub struct TapeRng {
    tape: u64,
    len: u32,
    pos: u32,
    overrun: bool,
}

impl TapeRng {
    pub fn new(tape: u64, len: u32) -> TapeRng {
        assert!(len <= 64);
        TapeRng { tape, len, pos: 0, overrun: false }
    }

    /// An all-zero tape that never overruns; used to count draws.
    pub fn counter() -> TapeRng {
        TapeRng { tape: 0, len: u32::MAX, pos: 0, overrun: false }
    }

    pub fn consumed(&self) -> u32 {
        self.pos
    }

    pub fn overrun(&self) -> bool {
        self.overrun
    }

    fn next_bit(&mut self) -> bool {
        let bit = if self.pos < self.len.min(64) {
            (self.tape >> self.pos) & 1 == 1
        } else {
            if self.pos >= self.len {
                self.overrun = true;
            }
            false
        };
        self.pos = self.pos.saturating_add(1);
        bit
    }
}

impl RngCore for TapeRng {
    fn next_u32(&mut self) -> u32 {
        self.next_bit() as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.next_bit() as u64
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for b in dest {
            *b = if self.next_bit() { 0xff } else { 0x00 };
        }
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), Error> {
        self.fill_bytes(dest);
        Ok(())
    }
}
