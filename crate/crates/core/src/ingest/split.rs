use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{encode_record, FeatureVector, NormalizationParams};
use super::IngestError;
use crate::canbus::TrafficRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub test_fraction: f64,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { test_fraction: 0.2, val_fraction: 0.2, seed: 0 }
    }
}

/// Row indices of the three partitions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub seed: u64,
}

/// Train/validation/test feature partitions sharing one normalization, fitted
/// on `train` only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedDataset {
    pub train: Vec<FeatureVector>,
    pub validation: Vec<FeatureVector>,
    pub test: Vec<FeatureVector>,
    pub norm: NormalizationParams,
    pub provenance: Provenance,
}

impl PreparedDataset {
    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn floor_fraction(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64) + 1e-9).floor() as usize
}

/// Seeded two-stage split. The first `floor(test_fraction * n)` rows of a shuffled
/// permutation form the test set; the remainder is shuffled again from the same
/// stream and its first `floor(val_fraction * remainder)` rows become validation.
pub fn split_indices(n: usize, cfg: &SplitConfig) -> Result<SplitIndices, IngestError> {
    if n == 0 {
        return Err(IngestError::EmptyInput);
    }
    for f in [cfg.test_fraction, cfg.val_fraction] {
        if !(0.0..1.0).contains(&f) {
            return Err(IngestError::InvalidArgument(format!("split fraction {f} outside [0, 1)")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_test = floor_fraction(cfg.test_fraction, n);
    let mut rest = order.split_off(n_test);
    let test = order;
    rest.shuffle(&mut rng);
    let n_val = floor_fraction(cfg.val_fraction, rest.len());
    let train = rest.split_off(n_val);
    Ok(SplitIndices { train, validation: rest, test })
}

pub fn split_dataset(records: &[TrafficRecord], cfg: &SplitConfig, source: &str) -> Result<PreparedDataset, IngestError> {
    let idx = split_indices(records.len(), cfg)?;
    let train_records: Vec<TrafficRecord> = idx.train.iter().map(|&i| records[i].clone()).collect();
    let norm = NormalizationParams::fit_records(&train_records)?;
    let encode = |ids: &[usize]| ids.iter().map(|&i| encode_record(&records[i], &norm)).collect::<Result<Vec<_>, _>>();
    Ok(PreparedDataset {
        train: encode(&idx.train)?,
        validation: encode(&idx.validation)?,
        test: encode(&idx.test)?,
        norm: norm.clone(),
        provenance: Provenance { source: source.to_string(), seed: cfg.seed },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ten_rows() {
        let idx = split_indices(10, &SplitConfig { seed: 3, ..Default::default() }).unwrap();
        assert_eq!((idx.test.len(), idx.validation.len(), idx.train.len()), (2, 1, 7));
    }

    #[test]
    fn determinism() {
        let cfg = SplitConfig { seed: 11, ..Default::default() };
        assert_eq!(split_indices(1000, &cfg).unwrap(), split_indices(1000, &cfg).unwrap());
        let other = split_indices(1000, &SplitConfig { seed: 12, ..cfg }).unwrap();
        let first = split_indices(1000, &cfg).unwrap();
        assert_ne!(first.test, other.test);
        assert_eq!(first.test.len(), other.test.len());
    }

    #[test]
    fn empty_input() {
        assert_eq!(split_indices(0, &SplitConfig::default()), Err(IngestError::EmptyInput));
    }

    #[test]
    fn normalization_uses_training_rows_only() {
        let records: Vec<TrafficRecord> = (0..50).map(|i| TrafficRecord::normal(i as f64, i as u16 * 10, vec![])).collect();
        let cfg = SplitConfig { seed: 1, ..Default::default() };
        let ds = split_dataset(&records, &cfg, "unit").unwrap();
        let idx = split_indices(50, &cfg).unwrap();
        let lo = idx.train.iter().map(|&i| records[i].can_id).min().unwrap() as f64;
        let hi = idx.train.iter().map(|&i| records[i].can_id).max().unwrap() as f64;
        assert_eq!(ds.norm.ranges[0], (lo, hi));
        assert_eq!(ds.len(), 50);
    }

    proptest! {
        #[test]
        fn partitions_disjoint_and_exhaustive(n in 1usize..400, seed in any::<u64>()) {
            let idx = split_indices(n, &SplitConfig { seed, ..Default::default() }).unwrap();
            let mut all: Vec<usize> = idx.train.iter().chain(&idx.validation).chain(&idx.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert_eq!(idx.test.len(), n / 5);
            prop_assert_eq!(idx.validation.len(), (n - n / 5) / 5);
        }
    }
}
