//! Seeded fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use canids_core::canbus::Label;
use canids_core::ingest::{FeatureVector, FEATURE_LEN};

/// `n` feature vectors with uniform `[0, 1)` features and random labels.
pub fn random_rows(n: usize, seed: u64) -> Vec<FeatureVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut x = [0.0; FEATURE_LEN];
            x.iter_mut().for_each(|v| *v = rng.gen_range(0.0..1.0));
            let y = if rng.gen_bool(0.5) { Label::Attack } else { Label::Normal };
            FeatureVector { x, y, kind: None }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    #[test]
    fn fixtures_are_seeded() {
        assert_eq!(super::random_rows(5, 1), super::random_rows(5, 1));
        assert_ne!(super::random_rows(5, 1), super::random_rows(5, 2));
    }
}
