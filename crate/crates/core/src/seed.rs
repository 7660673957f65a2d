//! Sub-seed derivation.
//!
//! Every random stream in a run descends from one root seed. A purpose gets
//! its own seed as `root ^ PURPOSE_CONSTANT`, and streams that need further
//! splitting (one per table, one per shard) pass that through [`split`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Trace generation (rank permutations and Zipf draws).
pub const TRACE: u64 = 0x7472_6163_655f_6765;
/// Feistel round keys used by the access logger randomizer.
pub const FEISTEL: u64 = 0x6665_6973_7465_6c5f;
/// Mini-batch selection during the learning phase.
pub const LEARN: u64 = 0x6c65_6172_6e5f_7361;
/// Pseudorandom embedding row values.
pub const ROWS: u64 = 0x726f_7773_5f76_616c;

/// Seed for one purpose derived from the root seed.
pub fn derive(root: u64, purpose: u64) -> u64 {
    root ^ purpose
}

/// SplitMix64 finalizer; decorrelates `seed` and `stream`.
pub fn split(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_streams_differ() {
        let a = split(7, 0);
        let b = split(7, 1);
        assert_ne!(a, b);
        assert_eq!(a, split(7, 0));
    }

    #[test]
    fn purposes_are_distinct() {
        let all = [TRACE, FEISTEL, LEARN, ROWS];
        for (i, a) in all.iter().enumerate() {
            for b in &all[i + 1..] {
                assert_ne!(derive(1, *a), derive(1, *b));
            }
        }
    }
}
