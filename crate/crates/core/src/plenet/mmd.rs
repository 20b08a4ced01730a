use serde::{Deserialize, Serialize};

use super::PlenetError;
use crate::ingest::{FeatureVector, PreparedDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum FeatureMap {
    #[default]
    Identity,
}

/// `‖mean φ(source) − mean φ(target)‖₂`.
pub fn mmd_distance<S: AsRef<[f64]>, T: AsRef<[f64]>>(source: &[S], target: &[T], map: FeatureMap) -> Result<f64, PlenetError> {
    let FeatureMap::Identity = map;
    if source.is_empty() || target.is_empty() {
        return Err(PlenetError::EmptyDomain);
    }
    let dim = source[0].as_ref().len();
    let mean = |rows: &[&[f64]]| -> Result<Vec<f64>, PlenetError> {
        let mut acc = vec![0.0; dim];
        for r in rows {
            if r.len() != dim {
                return Err(PlenetError::DimensionMismatch { expected: dim, got: r.len() });
            }
            for (a, v) in acc.iter_mut().zip(r.iter()) {
                *a += v;
            }
        }
        Ok(acc.into_iter().map(|a| a / rows.len() as f64).collect())
    };
    let s: Vec<&[f64]> = source.iter().map(AsRef::as_ref).collect();
    let t: Vec<&[f64]> = target.iter().map(AsRef::as_ref).collect();
    let ms = mean(&s)?;
    let mt = mean(&t)?;
    Ok(ms.iter().zip(&mt).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
}

/// Source and target domains over the same feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainPair {
    pub source: PreparedDataset,
    pub target: PreparedDataset,
}

impl DomainPair {
    pub fn new(source: PreparedDataset, target: PreparedDataset) -> Result<Self, PlenetError> {
        if source.norm.ranges.len() != target.norm.ranges.len() {
            return Err(PlenetError::DimensionMismatch { expected: source.norm.ranges.len(), got: target.norm.ranges.len() });
        }
        if source.is_empty() || target.is_empty() {
            return Err(PlenetError::EmptyDomain);
        }
        Ok(Self { source, target })
    }

    /// Identity-map MMD between all rows of the two domains.
    pub fn distance(&self) -> Result<f64, PlenetError> {
        let rows = |d: &PreparedDataset| -> Vec<[f64; crate::ingest::FEATURE_LEN]> {
            d.train.iter().chain(&d.validation).chain(&d.test).map(|fv: &FeatureVector| fv.x).collect()
        };
        mmd_distance(&rows(&self.source), &rows(&self.target), FeatureMap::Identity)
    }
}
