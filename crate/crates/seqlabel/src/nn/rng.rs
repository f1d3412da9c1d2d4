//! Seeded, platform-stable random streams.

use crate::hash::Fnv1a;
use crate::Real;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A deterministic pseudo-random stream. Identical seeds yield identical
/// draw sequences on every platform.
///
/// Streams are never forked from each other's state; derived streams are
/// keyed by `(seed, context parts)` so that any consumer can re-create the
/// exact stream later (dropout masks are replayed this way).
#[derive(Debug, Clone)]
pub struct RngStream(ChaCha8Rng);

impl RngStream {
    pub fn from_seed(seed: u64) -> Self {
        RngStream(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Derives an independent stream from a base seed and a context key.
    pub fn derive(seed: u64, parts: &[u64]) -> Self {
        let mut h = Fnv1a::new();
        h.write_u64(seed);
        for &p in parts {
            h.write_u64(p);
        }
        Self::from_seed(h.finish())
    }

    /// Uniform draw in `[0, 1)`.
    pub fn unit(&mut self) -> Real {
        self.0.random::<f64>() as Real
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn range(&mut self, lo: Real, hi: Real) -> Real {
        (self.0.random_range(lo as f64..hi as f64)) as Real
    }

    /// Uniform index in `[0, n)`.
    pub fn index(&mut self, n: usize) -> usize {
        self.0.random_range(0..n)
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.index(i + 1);
            xs.swap(i, j);
        }
    }
}
