//! Reproducible random streams.
//!
//! Every Monte-Carlo trial draws from its own ChaCha8 stream selected by
//! `(seed, index)`. Streams are counter-based, so the outcome of trial `i`
//! does not depend on how trials are scheduled across worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Independent substream `index` of the master `seed`.
pub fn substream(seed: u64, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Stream index space reserved for auxiliary draws (cross-check
/// expectations, audits) so they never collide with per-trial streams.
pub(crate) const AUX_STREAM_BASE: u64 = 1 << 62;

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_seed_and_index_repeat() {
        let a: Vec<u64> = substream(7, 3).random_iter().take(16).collect();
        let b: Vec<u64> = substream(7, 3).random_iter().take(16).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn neighbouring_streams_differ() {
        let a: Vec<u64> = substream(7, 3).random_iter().take(4).collect();
        let b: Vec<u64> = substream(7, 4).random_iter().take(4).collect();
        let c: Vec<u64> = substream(8, 3).random_iter().take(4).collect();
        assert_ne!(a, b);
        assert_ne!(a, c);
    }
}
