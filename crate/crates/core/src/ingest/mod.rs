//! Log parsing and data preparation.
//!
//! Preparation runs in a fixed order: cleaning (missing values, outlier
//! screening, hex conversion), integration (feature correlation) and
//! transformation (split, then min-max scaling fitted on the training rows).

mod container;
mod features;
mod hex;
mod parse;
mod split;
mod stats;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use container::{manifest_text, parse_manifest, read_dataset, write_dataset, ContainerError, DATASET_MAGIC};
pub use features::{apply_minmax, encode_record, fit_minmax, FeatureVector, NormalizationParams, FEATURE_LEN, PAYLOAD_SLOTS};
pub use hex::{dec_to_hex, hex_to_dec, hex_to_f64};
pub use parse::{impute_missing, parse_data_bytes, parse_label, parse_log, to_traffic_records, ImputePolicy, RawRecord};
pub use split::{split_dataset, split_indices, PreparedDataset, Provenance, SplitConfig, SplitIndices};
pub use stats::{
    correlation_matrix, correlation_p_value, esd_critical_value, pearson, rosner_outliers, CorrelationMatrix, ROSNER_MIN_VALUES,
};

use crate::canbus::{AttackKind, TrafficRecord};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IngestError {
    #[error("unreadable input: {0}")]
    UnreadableStream(String),
    #[error("input contains no records")]
    EmptyInput,
    #[error("invalid hex digit `{0}`")]
    InvalidHexDigit(char),
    #[error("need at least {needed} values, got {got}")]
    TooFewValues { needed: usize, got: usize },
    #[error("every value of column {0} is missing")]
    AllRowsMissing(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("zero variance")]
    ZeroVariance,
    #[error("column {0} is empty")]
    EmptyColumn(usize),
    #[error("normalization covers {got} features, expected {expected}")]
    UnnormalizedInput { expected: usize, got: usize },
    #[error("row {0} still has missing fields")]
    IncompleteRow(usize),
    #[error("{0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepareConfig {
    pub impute: ImputePolicy,
    pub split: SplitConfig,
    /// Drop rows that Rosner's test flags on the data-field value.
    pub drop_outliers: bool,
    pub max_outliers: usize,
    pub outlier_alpha: f64,
}

impl Default for PrepareConfig {
    fn default() -> Self {
        Self { impute: ImputePolicy::DropRow, split: SplitConfig::default(), drop_outliers: false, max_outliers: 10, outlier_alpha: 0.05 }
    }
}

/// What the cleaning and integration steps observed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepareReport {
    pub raw_rows: usize,
    pub clean_rows: usize,
    pub outlier_rows: Vec<usize>,
    pub outliers_dropped: bool,
    pub correlation: Option<CorrelationMatrix>,
    pub correlation_note: Option<String>,
}

/// Numeric columns used for correlation: timestamp, identifier, DLC and the
/// whole data field read as one big hex number.
pub fn numeric_columns(records: &[TrafficRecord]) -> [Vec<f64>; 4] {
    let ts = records.iter().map(|r| r.timestamp).collect();
    let ids = records.iter().map(|r| r.can_id as f64).collect();
    let dlcs = records.iter().map(|r| r.dlc as f64).collect();
    let data =
        records.iter().map(|r| hex_to_f64(&r.payload.iter().map(|b| format!("{b:02X}")).collect::<String>()).unwrap_or(0.0)).collect();
    [ts, ids, dlcs, data]
}

/// Parsed rows through to a prepared dataset. `kinds`, when given, attaches
/// simulator attack metadata to the parsed rows by position.
pub fn prepare(
    raw: &[RawRecord],
    kinds: Option<&[Option<AttackKind>]>,
    cfg: &PrepareConfig,
    source: &str,
) -> Result<(PreparedDataset, PrepareReport), IngestError> {
    if let Some(k) = kinds {
        if k.len() != raw.len() {
            return Err(IngestError::LengthMismatch(raw.len(), k.len()));
        }
    }
    // Cleaning. Kinds follow their rows through imputation.
    let tagged: Vec<(RawRecord, Option<AttackKind>)> =
        raw.iter().cloned().enumerate().map(|(i, r)| (r, kinds.and_then(|k| k[i]))).collect();
    let kept: Vec<(RawRecord, Option<AttackKind>)> = match cfg.impute {
        ImputePolicy::DropRow => tagged.into_iter().filter(|(r, _)| !r.has_missing()).collect(),
        ImputePolicy::FieldMean => {
            let with_label: Vec<_> = tagged.into_iter().filter(|(r, _)| r.label_text.is_some()).collect();
            let rows: Vec<RawRecord> = with_label.iter().map(|(r, _)| r.clone()).collect();
            let filled = impute_missing(&rows, ImputePolicy::FieldMean)?;
            filled.into_iter().zip(with_label).map(|(r, (_, k))| (r, k)).collect()
        }
    };
    let rows: Vec<RawRecord> = kept.iter().map(|(r, _)| r.clone()).collect();
    let mut records = to_traffic_records(&rows)?;
    for (rec, (_, kind)) in records.iter_mut().zip(&kept) {
        rec.attack = *kind;
    }
    if records.is_empty() {
        return Err(IngestError::EmptyInput);
    }

    let [ts, ids, dlcs, data] = numeric_columns(&records);
    let outlier_rows =
        if records.len() >= ROSNER_MIN_VALUES { rosner_outliers(&data, cfg.max_outliers, cfg.outlier_alpha)? } else { Vec::new() };
    if cfg.drop_outliers && !outlier_rows.is_empty() {
        let mut drop = vec![false; records.len()];
        for &i in &outlier_rows {
            drop[i] = true;
        }
        let mut i = 0;
        records.retain(|_| {
            i += 1;
            !drop[i - 1]
        });
    }

    // Integration.
    let (correlation, correlation_note) =
        match correlation_matrix(&[("Timestamp", &ts), ("CAN_ID", &ids), ("DLC", &dlcs), ("Data_Field", &data)]) {
            Ok(m) => (Some(m), None),
            Err(e) => (None, Some(format!("correlation skipped: {e}"))),
        };

    // Transformation.
    let dataset = split_dataset(&records, &cfg.split, source)?;
    let report = PrepareReport {
        raw_rows: raw.len(),
        clean_rows: records.len(),
        outlier_rows,
        outliers_dropped: cfg.drop_outliers,
        correlation,
        correlation_note,
    };
    Ok((dataset, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prepare_keeps_kinds_aligned() {
        let text = "0.1,0130,1,01,0\n0.2,0000,8,00 00 00 00 00 00 00 00,1\n0.3,02B0,,01,0\n0.4,0130,1,02,1\n\
                    0.5,0130,1,03,0\n0.6,0130,1,04,0\n0.7,02B0,2,05 06,0\n0.8,0316,1,07,0\n0.9,0316,1,08,0\n1.0,0316,1,09,0\n";
        let raw = parse_log(text.as_bytes()).unwrap();
        let kinds = vec![None, Some(AttackKind::Flooding), None, Some(AttackKind::Spoofing), None, None, None, None, None, None];
        let cfg = PrepareConfig { split: SplitConfig { test_fraction: 0.0, val_fraction: 0.0, seed: 0 }, ..Default::default() };
        let (ds, report) = prepare(&raw, Some(&kinds), &cfg, "unit").unwrap();
        assert_eq!(report.raw_rows, 10);
        assert_eq!(report.clean_rows, 9);
        assert_eq!(ds.train.len(), 9);
        for fv in &ds.train {
            let expect = match (fv.x[0] == 0.0, fv.y) {
                (true, _) => Some(AttackKind::Flooding),
                (false, crate::canbus::Label::Attack) => Some(AttackKind::Spoofing),
                _ => None,
            };
            assert_eq!(fv.kind, expect);
        }
    }

    #[test]
    fn prepare_rejects_misaligned_kinds() {
        let raw = parse_log("0.1,0130,1,01,0\n".as_bytes()).unwrap();
        assert!(matches!(prepare(&raw, Some(&[]), &PrepareConfig::default(), "x"), Err(IngestError::LengthMismatch(1, 0))));
    }
}
