//! Seeded random streams.
//!
//! Every stochastic routine takes its generator explicitly. Independent
//! streams are derived from a 64-bit seed and a text label:
//!
//! ```text
//! key    = SHA-256(seed as 8 little-endian bytes || label as UTF-8)
//! stream = ChaCha8 keyed by `key`
//! ```
//!
//! The derivation depends only on bytes, so it is stable across platforms,
//! runs and thread schedules.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Stream = ChaCha8Rng;

pub fn derive_substream(seed: u64, label: &str) -> Stream {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(label.as_bytes());
    let key: [u8; 32] = hasher.finalize().into();
    ChaCha8Rng::from_seed(key)
}

/// Stream for the `index`-th work item under `label`. Used by parallel loops
/// so that each item owns its randomness regardless of scheduling.
pub fn item_stream(seed: u64, label: &str, index: usize) -> Stream {
    derive_substream(seed, &format!("{label}/{index}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_seed_and_label_give_same_prefix() {
        let mut a = derive_substream(7, "axioms");
        let mut b = derive_substream(7, "axioms");
        for _ in 0..100 {
            assert_eq!(a.random::<u64>(), b.random::<u64>());
        }
    }

    #[test]
    fn seed_and_label_both_matter() {
        let first = |s: u64, l: &str| derive_substream(s, l).random::<u64>();
        assert_ne!(first(7, "a"), first(7, "b"));
        assert_ne!(first(7, "a"), first(8, "a"));
    }

    #[test]
    fn distinct_labels_are_uncorrelated() {
        let n = 100_000;
        let mut a = derive_substream(1, "left");
        let mut b = derive_substream(1, "right");
        let xs: Vec<f64> = (0..n).map(|_| a.random()).collect();
        let ys: Vec<f64> = (0..n).map(|_| b.random()).collect();
        let mx = xs.iter().sum::<f64>() / n as f64;
        let my = ys.iter().sum::<f64>() / n as f64;
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for (x, y) in xs.iter().zip(&ys) {
            sxy += (x - mx) * (y - my);
            sxx += (x - mx) * (x - mx);
            syy += (y - my) * (y - my);
        }
        let rho = sxy / (sxx * syy).sqrt();
        // 3/sqrt(n) is about 0.0095
        assert!(rho.abs() < 0.01, "rho = {rho}");
    }

    #[test]
    fn derivation_is_pinned() {
        // Guards against accidental changes to the derivation scheme.
        assert_eq!(derive_substream(0, "").random::<u64>(), 5365756809105173090);
    }
}
