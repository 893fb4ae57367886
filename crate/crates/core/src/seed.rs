//! Named sub-seeds. Every stage draws from its own stream derived from the
//! single pipeline seed, so a stage can be rerun in isolation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub const GENERATION: &str = "generation";
pub const PARTITION: &str = "partition";
pub const BALANCED: &str = "balanced";
pub const ADAPTIVE: &str = "adaptive";
pub const MOCK: &str = "mock";
pub const EMBEDDING: &str = "embedding";

/// Stable across platforms and releases.
pub fn derive(base: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(base.to_le_bytes());
    hasher.update((label.len() as u64).to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn rng(base: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(base, label))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_separate_streams() {
        assert_eq!(derive(7, "a"), derive(7, "a"));
        assert_ne!(derive(7, "a"), derive(7, "b"));
        assert_ne!(derive(7, "a"), derive(8, "a"));
        // length prefix keeps ("ab", base) and ("a", ...) apart
        assert_ne!(derive(1, "ab"), derive(1, "a"));
    }
}
