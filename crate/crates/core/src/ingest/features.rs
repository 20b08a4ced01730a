//! Min-max scaling and the fixed 16-wide feature layout fed to the models.
//!
//! Layout of a feature vector:
//!
//! | index  | content                                           |
//! |--------|---------------------------------------------------|
//! | 0      | CAN identifier, min-max scaled on training data   |
//! | 1      | DLC, min-max scaled on training data              |
//! | 2..=9  | payload bytes 0..8 divided by 255, zero-filled    |
//! | 10..16 | zero padding                                      |
//!
//! Timestamps are never part of the vector.

use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::canbus::{AttackKind, Label, TrafficRecord};

pub const FEATURE_LEN: usize = 16;
pub const PAYLOAD_SLOTS: usize = 8;
const PAYLOAD_OFFSET: usize = 2;

/// A normalized model input with its label. `kind` carries simulator
/// attack metadata when available.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub x: [f64; FEATURE_LEN],
    pub y: Label,
    pub kind: Option<AttackKind>,
}

/// Per-feature `(min, max)` ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub ranges: Vec<(f64, f64)>,
}

/// Fits one `(min, max)` pair per column.
pub fn fit_minmax(columns: &[&[f64]]) -> Result<NormalizationParams, IngestError> {
    let ranges = columns
        .iter()
        .enumerate()
        .map(|(i, col)| {
            if col.is_empty() {
                return Err(IngestError::EmptyColumn(i));
            }
            Ok(col.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v))))
        })
        .collect::<Result<_, _>>()?;
    Ok(NormalizationParams { ranges })
}

/// `(x - min) / (max - min)` clamped to `[0, 1]`; a degenerate range maps to 0.
pub fn apply_minmax(x: f64, (min, max): (f64, f64)) -> f64 {
    if max <= min {
        return 0.0;
    }
    ((x - min) / (max - min)).clamp(0.0, 1.0)
}

impl NormalizationParams {
    /// Fits identifier and DLC ranges on training records; payload slots use the
    /// fixed byte range and padding slots a degenerate range.
    pub fn fit_records(train: &[TrafficRecord]) -> Result<Self, IngestError> {
        let ids: Vec<f64> = train.iter().map(|r| r.can_id as f64).collect();
        let dlcs: Vec<f64> = train.iter().map(|r| r.dlc as f64).collect();
        let mut params = fit_minmax(&[&ids, &dlcs])?;
        params.ranges.extend(std::iter::repeat_n((0.0, 255.0), PAYLOAD_SLOTS));
        params.ranges.extend(std::iter::repeat_n((0.0, 0.0), FEATURE_LEN - PAYLOAD_OFFSET - PAYLOAD_SLOTS));
        Ok(params)
    }
}

fn raw_features(record: &TrafficRecord) -> [f64; FEATURE_LEN] {
    let mut raw = [0.0; FEATURE_LEN];
    raw[0] = record.can_id as f64;
    raw[1] = record.dlc as f64;
    for (slot, &b) in raw[PAYLOAD_OFFSET..PAYLOAD_OFFSET + PAYLOAD_SLOTS].iter_mut().zip(&record.payload) {
        *slot = b as f64;
    }
    raw
}

pub fn encode_record(record: &TrafficRecord, params: &NormalizationParams) -> Result<FeatureVector, IngestError> {
    if params.ranges.len() != FEATURE_LEN {
        return Err(IngestError::UnnormalizedInput { expected: FEATURE_LEN, got: params.ranges.len() });
    }
    let raw = raw_features(record);
    let mut x = [0.0; FEATURE_LEN];
    for ((out, v), &range) in x.iter_mut().zip(raw).zip(&params.ranges) {
        *out = apply_minmax(v, range);
    }
    Ok(FeatureVector { x, y: record.label, kind: record.attack })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params_for(ids: &[u16], dlcs: &[u8]) -> NormalizationParams {
        let recs: Vec<TrafficRecord> =
            ids.iter().zip(dlcs).map(|(&id, &d)| TrafficRecord { dlc: d, ..TrafficRecord::normal(0.0, id, vec![]) }).collect();
        NormalizationParams::fit_records(&recs).unwrap()
    }

    #[test]
    fn minmax_endpoints_and_midpoint() {
        assert_eq!(apply_minmax(0.0, (0.0, 10.0)), 0.0);
        assert_eq!(apply_minmax(10.0, (0.0, 10.0)), 1.0);
        assert_eq!(apply_minmax(5.0, (0.0, 10.0)), 0.5);
        assert_eq!(apply_minmax(5.0, (5.0, 5.0)), 0.0);
        assert_eq!(apply_minmax(-3.0, (0.0, 10.0)), 0.0);
        assert_eq!(apply_minmax(30.0, (0.0, 10.0)), 1.0);
    }

    #[test]
    fn fit_rejects_empty_column() {
        assert_eq!(fit_minmax(&[&[1.0], &[]]), Err(IngestError::EmptyColumn(1)));
    }

    #[test]
    fn minimum_id_empty_payload() {
        let params = params_for(&[0x100, 0x200, 0x300], &[0, 4, 8]);
        let rec = TrafficRecord::normal(1.0, 0x100, vec![]);
        let fv = encode_record(&rec, &params).unwrap();
        assert_eq!(fv.x[0], 0.0);
        assert_eq!(fv.x[1], 0.0);
        assert!(fv.x[2..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn full_byte_scales_to_one() {
        let params = params_for(&[1, 2], &[1, 8]);
        let fv = encode_record(&TrafficRecord::normal(0.0, 1, vec![0xFF, 0x80]), &params).unwrap();
        assert_eq!(fv.x[2], 1.0);
        assert_eq!(fv.x[3], 128.0 / 255.0);
    }

    #[test]
    fn long_payload_truncated() {
        let params = params_for(&[1, 2], &[0, 8]);
        let mut rec = TrafficRecord::normal(0.0, 1, vec![0xFF; 19]);
        rec.dlc = 8;
        let fv = encode_record(&rec, &params).unwrap();
        assert!(fv.x[2..10].iter().all(|&v| v == 1.0));
        assert!(fv.x[10..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn missing_params_rejected() {
        let params = NormalizationParams { ranges: vec![(0.0, 1.0); 2] };
        assert_eq!(
            encode_record(&TrafficRecord::normal(0.0, 1, vec![]), &params),
            Err(IngestError::UnnormalizedInput { expected: 16, got: 2 })
        );
    }

    proptest! {
        #[test]
        fn encoded_vectors_are_unit_bounded(
            id in 0u16..0x800, dlc in 0u8..=8, payload in proptest::collection::vec(any::<u8>(), 0..12),
            lo in 0u16..0x400, span in 0u16..0x400,
        ) {
            let params = params_for(&[lo, lo + span], &[2, 6]);
            let rec = TrafficRecord { dlc, ..TrafficRecord::normal(0.0, id, payload) };
            let fv = encode_record(&rec, &params).unwrap();
            prop_assert_eq!(fv.x.len(), FEATURE_LEN);
            prop_assert!(fv.x.iter().all(|v| (0.0..=1.0).contains(v)));
        }

        #[test]
        fn fit_then_apply_hits_endpoints(values in proptest::collection::vec(-1e6f64..1e6, 2..50)) {
            let params = fit_minmax(&[&values]).unwrap();
            let (lo, hi) = params.ranges[0];
            for &v in &values {
                let n = apply_minmax(v, params.ranges[0]);
                prop_assert!((0.0..=1.0).contains(&n));
            }
            if hi > lo {
                prop_assert_eq!(apply_minmax(lo, params.ranges[0]), 0.0);
                prop_assert_eq!(apply_minmax(hi, params.ranges[0]), 1.0);
            }
        }
    }
}
