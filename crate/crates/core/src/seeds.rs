//! Named sub-seeds derived from one root seed.
//!
//! Each consumer asks for `derive(root, label, index)` so results depend only on the
//! root seed and the consumer's identity, never on scheduling or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

pub fn derive(root: u64, label: &str, index: u64) -> u64 {
    splitmix64(splitmix64(root ^ fnv1a(label)) ^ splitmix64(index))
}

pub fn rng(root: u64, label: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(root, label, index))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_and_indices_separate_streams() {
        assert_eq!(derive(1, "dagger", 3), derive(1, "dagger", 3));
        assert_ne!(derive(1, "dagger", 3), derive(1, "dagger", 4));
        assert_ne!(derive(1, "dagger", 3), derive(1, "rollout", 3));
        assert_ne!(derive(1, "dagger", 3), derive(2, "dagger", 3));
    }
}
