//! Confusion counts, threshold metrics and ROC analysis. Attack is the
//! positive class.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use canids_core::canbus::{AttackKind, Label};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("{0} labels but {1} predictions")]
    LengthMismatch(usize, usize),
    #[error("label value {0} is not 0 or 1")]
    InvalidLabel(u8),
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("ROC needs both classes among the labels")]
    SingleClassInput,
    #[error("score {0} is not finite")]
    NonFiniteScore(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn record(&mut self, actual: Label, predicted: Label) {
        match (actual, predicted) {
            (Label::Attack, Label::Attack) => self.tp += 1,
            (Label::Normal, Label::Normal) => self.tn += 1,
            (Label::Normal, Label::Attack) => self.fp += 1,
            (Label::Attack, Label::Normal) => self.fn_ += 1,
        }
    }
}

/// Counts over `{0, 1}` label and prediction vectors.
pub fn confusion(labels: &[u8], predictions: &[u8]) -> Result<ConfusionMatrix, MetricsError> {
    if labels.len() != predictions.len() {
        return Err(MetricsError::LengthMismatch(labels.len(), predictions.len()));
    }
    let mut cm = ConfusionMatrix::default();
    for (&y, &p) in labels.iter().zip(predictions) {
        let y = Label::from_bit(y).ok_or(MetricsError::InvalidLabel(y))?;
        let p = Label::from_bit(p).ok_or(MetricsError::InvalidLabel(p))?;
        cm.record(y, p);
    }
    Ok(cm)
}

pub fn confusion_labels(labels: &[Label], predictions: &[Label]) -> Result<ConfusionMatrix, MetricsError> {
    if labels.len() != predictions.len() {
        return Err(MetricsError::LengthMismatch(labels.len(), predictions.len()));
    }
    let mut cm = ConfusionMatrix::default();
    for (&y, &p) in labels.iter().zip(predictions) {
        cm.record(y, p);
    }
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindRecall {
    pub kind: AttackKind,
    pub total: u64,
    pub detected: u64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub roc_auc: Option<f64>,
    /// Sensitivity, equal to recall.
    pub tpr: f64,
    /// Specificity.
    pub tnr: f64,
    pub confusion: ConfusionMatrix,
    /// Names of metrics whose denominator was zero and were reported as 0.
    pub zero_denominator: Vec<String>,
    pub per_kind: Vec<KindRecall>,
}

fn ratio(num: f64, den: f64, name: &str, flags: &mut Vec<String>) -> f64 {
    if den == 0.0 {
        flags.push(name.to_string());
        0.0
    } else {
        num / den
    }
}

/// accuracy = (TP+TN)/N, precision = TP/(TP+FP), recall = TPR = TP/(TP+FN),
/// F1 = 2PR/(P+R), TNR = TN/(TN+FP).
pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricsReport, MetricsError> {
    if cm.total() == 0 {
        return Err(MetricsError::EmptyMatrix);
    }
    let (tp, tn, fp, fn_) = (cm.tp as f64, cm.tn as f64, cm.fp as f64, cm.fn_ as f64);
    let mut flags = Vec::new();
    let accuracy = (tp + tn) / (tp + tn + fp + fn_);
    let precision = ratio(tp, tp + fp, "precision", &mut flags);
    let recall = ratio(tp, tp + fn_, "recall", &mut flags);
    let f1 = ratio(2.0 * precision * recall, precision + recall, "f1", &mut flags);
    let tpr = recall;
    let tnr = ratio(tn, tn + fp, "tnr", &mut flags);
    Ok(MetricsReport {
        accuracy,
        precision,
        recall,
        f1,
        roc_auc: None,
        tpr,
        tnr,
        confusion: *cm,
        zero_denominator: flags,
        per_kind: Vec::new(),
    })
}

/// Recall restricted to rows of each attack kind present in `kinds`.
pub fn per_kind_recall(kinds: &[Option<AttackKind>], predictions: &[Label]) -> Vec<KindRecall> {
    [AttackKind::Flooding, AttackKind::Fuzzing, AttackKind::Spoofing]
        .into_iter()
        .filter_map(|kind| {
            let rows: Vec<Label> = kinds.iter().zip(predictions).filter(|(k, _)| **k == Some(kind)).map(|(_, p)| *p).collect();
            if rows.is_empty() {
                return None;
            }
            let detected = rows.iter().filter(|&&p| p == Label::Attack).count() as u64;
            Some(KindRecall { kind, total: rows.len() as u64, detected, recall: detected as f64 / rows.len() as f64 })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub auc: f64,
    /// `(fpr, tpr)` from `(0, 0)` to `(1, 1)`, one point per distinct score.
    pub points: Vec<(f64, f64)>,
}

/// Exact ROC over all thresholds. Scores are swept in descending order and
/// equal scores form a single step; the area is the trapezoid sum.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<RocCurve, MetricsError> {
    if scores.len() != labels.len() {
        return Err(MetricsError::LengthMismatch(labels.len(), scores.len()));
    }
    if let Some(&s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(MetricsError::NonFiniteScore(s));
    }
    if let Some(&b) = labels.iter().find(|&&b| b > 1) {
        return Err(MetricsError::InvalidLabel(b));
    }
    let pos = labels.iter().filter(|&&b| b == 1).count() as f64;
    let neg = labels.len() as f64 - pos;
    if pos == 0.0 || neg == 0.0 {
        return Err(MetricsError::SingleClassInput);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            i += 1;
        }
        let (x0, y0) = *points.last().unwrap();
        let (x1, y1) = (fp / neg, tp / pos);
        auc += (x1 - x0) * (y0 + y1) / 2.0;
        points.push((x1, y1));
    }
    Ok(RocCurve { auc, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_predictions() {
        let y: Vec<u8> = (0..20).map(|i| u8::from(i < 10)).collect();
        let cm = confusion(&y, &y).unwrap();
        assert_eq!(cm, ConfusionMatrix { tp: 10, tn: 10, fp: 0, fn_: 0 });
        assert_eq!(metrics(&cm).unwrap().accuracy, 1.0);
    }

    #[test]
    fn all_normal_predictions() {
        let cm = confusion(&[1, 1, 1, 1, 1, 0], &[0; 6]).unwrap();
        assert_eq!((cm.fn_, cm.tp), (5, 0));
    }

    #[test]
    fn confusion_errors() {
        assert_eq!(confusion(&[0, 1], &[0]), Err(MetricsError::LengthMismatch(2, 1)));
        assert_eq!(confusion(&[2], &[0]), Err(MetricsError::InvalidLabel(2)));
    }

    #[test]
    fn confusion_matches_elementwise_tally() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y: Vec<u8> = (0..10_000).map(|_| rng.gen_range(0..2)).collect();
        let p: Vec<u8> = (0..10_000).map(|_| rng.gen_range(0..2)).collect();
        let cm = confusion(&y, &p).unwrap();
        let count = |a, b| y.iter().zip(&p).filter(|(&u, &v)| u == a && v == b).count() as u64;
        assert_eq!(cm, ConfusionMatrix { tp: count(1, 1), tn: count(0, 0), fp: count(0, 1), fn_: count(1, 0) });
    }

    #[test]
    fn symmetric_counts() {
        let m = metrics(&ConfusionMatrix { tp: 9, tn: 9, fp: 1, fn_: 1 }).unwrap();
        for v in [m.accuracy, m.precision, m.recall, m.f1] {
            assert!((v - 0.9).abs() < 1e-15);
        }
        assert!(m.zero_denominator.is_empty());
    }

    #[test]
    fn zero_denominators_are_flagged() {
        let m = metrics(&ConfusionMatrix { tp: 0, tn: 5, fp: 0, fn_: 3 }).unwrap();
        assert_eq!(m.precision, 0.0);
        assert_eq!(m.f1, 0.0);
        assert_eq!(m.zero_denominator, vec!["precision".to_string(), "f1".to_string()]);
        assert_eq!(metrics(&ConfusionMatrix::default()), Err(MetricsError::EmptyMatrix));
    }

    #[test]
    fn f1_between_precision_and_recall() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            let cm =
                ConfusionMatrix { tp: rng.gen_range(1..50), tn: rng.gen_range(0..50), fp: rng.gen_range(0..50), fn_: rng.gen_range(0..50) };
            let m = metrics(&cm).unwrap();
            assert!(m.f1 >= m.precision.min(m.recall) - 1e-15 && m.f1 <= m.precision.max(m.recall) + 1e-15);
            assert!((m.f1 - 2.0 * m.precision * m.recall / (m.precision + m.recall)).abs() <= 1e-12);
        }
    }

    #[test]
    fn roc_simple_cases() {
        assert_eq!(roc_auc(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0]).unwrap().auc, 1.0);
        let flat = roc_auc(&[0.5; 6], &[1, 0, 1, 0, 0, 1]).unwrap();
        assert_eq!(flat.auc, 0.5);
        assert_eq!(flat.points, vec![(0.0, 0.0), (1.0, 1.0)]);
        assert_eq!(roc_auc(&[0.1, 0.2], &[1, 1]), Err(MetricsError::SingleClassInput));
    }

    fn mann_whitney(scores: &[f64], labels: &[u8]) -> f64 {
        let (mut wins, mut pairs) = (0.0, 0.0);
        for (i, &si) in scores.iter().enumerate() {
            for (j, &sj) in scores.iter().enumerate() {
                if labels[i] == 1 && labels[j] == 0 {
                    pairs += 1.0;
                    wins += if si > sj {
                        1.0
                    } else if si == sj {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn roc_matches_rank_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let scores: Vec<f64> = (0..200).map(|_| (rng.gen_range(0.0..1.0f64) * 20.0).round() / 20.0).collect();
        let labels: Vec<u8> = (0..200).map(|_| rng.gen_range(0..2)).collect();
        let roc = roc_auc(&scores, &labels).unwrap();
        assert!((roc.auc - mann_whitney(&scores, &labels)).abs() < 1e-12);
        let cubed: Vec<f64> = scores.iter().map(|s| s * s * s + 4.0).collect();
        assert!((roc_auc(&cubed, &labels).unwrap().auc - roc.auc).abs() < 1e-12);
        let flipped: Vec<f64> = scores.iter().map(|s| 1.0 - s).collect();
        let inv: Vec<u8> = labels.iter().map(|b| 1 - b).collect();
        assert!((roc_auc(&flipped, &inv).unwrap().auc - roc.auc).abs() < 1e-12);
    }

    #[test]
    fn per_kind_breakdown() {
        let kinds = [None, Some(AttackKind::Flooding), Some(AttackKind::Flooding), Some(AttackKind::Spoofing)];
        let preds = [Label::Normal, Label::Attack, Label::Normal, Label::Attack];
        let r = per_kind_recall(&kinds, &preds);
        assert_eq!(r.len(), 2);
        assert_eq!((r[0].kind, r[0].detected, r[0].total, r[0].recall), (AttackKind::Flooding, 1, 2, 0.5));
        assert_eq!((r[1].kind, r[1].recall), (AttackKind::Spoofing, 1.0));
    }
}
