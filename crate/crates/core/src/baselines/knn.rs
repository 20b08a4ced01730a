use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::BaselineError;
use crate::canbus::Label;
use crate::ingest::FeatureVector;

/// Brute-force k-nearest-neighbour classifier over stored training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    x: Vec<Vec<f64>>,
    y: Vec<Label>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnnVote {
    pub label: Label,
    /// Share of the k neighbours labelled Attack.
    pub attack_fraction: f64,
}

pub fn knn_fit(train: &[FeatureVector]) -> Result<KnnModel, BaselineError> {
    KnnModel::from_rows(train.iter().map(|fv| fv.x.to_vec()).collect(), train.iter().map(|fv| fv.y).collect())
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

impl KnnModel {
    pub fn from_rows(x: Vec<Vec<f64>>, y: Vec<Label>) -> Result<Self, BaselineError> {
        if x.is_empty() {
            return Err(BaselineError::EmptyTrainingSet);
        }
        if x.len() != y.len() {
            return Err(BaselineError::DimensionMismatch { expected: x.len(), got: y.len() });
        }
        let dim = x[0].len();
        if let Some(r) = x.iter().find(|r| r.len() != dim) {
            return Err(BaselineError::DimensionMismatch { expected: dim, got: r.len() });
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Training indices of the `k` nearest rows, nearest first. Equal
    /// distances are ordered by training index.
    pub fn neighbours(&self, query: &[f64], k: usize) -> Result<Vec<usize>, BaselineError> {
        if k == 0 {
            return Err(BaselineError::InvalidArgument("k must be at least 1".into()));
        }
        if k > self.x.len() {
            return Err(BaselineError::KTooLarge { k, n: self.x.len() });
        }
        if query.len() != self.x[0].len() {
            return Err(BaselineError::DimensionMismatch { expected: self.x[0].len(), got: query.len() });
        }
        let mut d: Vec<(f64, usize)> = self.x.iter().enumerate().map(|(i, r)| (sq_dist(r, query), i)).collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1));
        if k < d.len() {
            d.select_nth_unstable_by(k - 1, cmp);
            d.truncate(k);
        }
        d.sort_unstable_by(cmp);
        Ok(d.into_iter().map(|(_, i)| i).collect())
    }

    /// Majority vote over the `k` nearest rows; an even vote is called Attack.
    pub fn predict(&self, query: &[f64], k: usize) -> Result<KnnVote, BaselineError> {
        let nn = self.neighbours(query, k)?;
        let attacks = nn.iter().filter(|&&i| self.y[i] == Label::Attack).count();
        let label = if 2 * attacks >= k { Label::Attack } else { Label::Normal };
        Ok(KnnVote { label, attack_fraction: attacks as f64 / k as f64 })
    }
}

pub fn knn_predict(model: &KnnModel, query: &[f64], k: usize) -> Result<KnnVote, BaselineError> {
    model.predict(query, k)
}
