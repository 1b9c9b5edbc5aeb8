//! Counter-based random draws addressed by what they decide.
//!
//! Every stochastic decision in a run (a beacon loss, a handshake collision,
//! a cycle loss) reads its own fixed block of a ChaCha8 keystream. The block
//! is selected by the run seed, the attempt index (stream) and a [`DrawKey`]
//! describing the decision. Two runs that differ only in loss probability or
//! safety mode therefore see the same uniform variates for the same
//! decisions, which keeps durations pathwise comparable.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// What a draw decides; occupies the top four bits of a key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    BeaconPhase = 1,
    Beacon = 2,
    Handshake = 3,
    Cycle = 4,
    SessionKey = 5,
    Backoff = 6,
}

/// Packs purpose (4 bits), master (4 bits) and three 16-bit indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DrawKey(u64);

impl DrawKey {
    pub fn new(purpose: Purpose, master: u8, a: u16, b: u16, c: u16) -> Self {
        debug_assert!(master < 16);
        DrawKey(
            (purpose as u64) << 52
                | u64::from(master & 0xF) << 48
                | u64::from(a) << 32
                | u64::from(b) << 16
                | u64::from(c),
        )
    }

    pub fn raw(self) -> u64 {
        self.0
    }
}

/// Clamps a running index into the 16-bit key field.
pub fn key_index(i: impl TryInto<u16>) -> u16 {
    i.try_into().unwrap_or(u16::MAX)
}

#[derive(Clone)]
pub struct KeyedRng {
    base: ChaCha8Rng,
}

impl KeyedRng {
    /// Each attempt index selects an independent keystream.
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut base = ChaCha8Rng::seed_from_u64(seed);
        base.set_stream(stream);
        Self { base }
    }

    /// Generator positioned at the two 64-byte blocks reserved for `key`.
    pub fn at(&self, key: DrawKey) -> ChaCha8Rng {
        let mut rng = self.base.clone();
        rng.set_word_pos(u128::from(key.raw()) << 5);
        rng
    }

    /// First uniform variate in [0, 1) of the block for `key`.
    pub fn uniform(&self, key: DrawKey) -> f64 {
        self.at(key).random()
    }
}
