//! Seeded generators and stable per-cell seed derivation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash of an index tuple that does not depend on platform or std version.
pub fn hash_indices(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x2545_F491_4F6C_DD1D, |acc, &x| mix(acc ^ mix(x)))
}

/// `base ⊕ hash(parts)`.
pub fn cell_seed(base: u64, parts: &[u64]) -> u64 {
    base ^ hash_indices(parts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_seeds_differ_by_index_order() {
        assert_ne!(cell_seed(1, &[40, 0, 1]), cell_seed(1, &[40, 1, 0]));
        assert_eq!(cell_seed(9, &[1, 2, 3]), cell_seed(9, &[1, 2, 3]));
    }

    #[test]
    fn frozen_hash_value() {
        // Guards against accidental changes to the mixing function, which
        // would silently change every experiment's instances.
        assert_eq!(hash_indices(&[1, 2, 3]), 0xea55_72c6_f762_8896);
    }
}
