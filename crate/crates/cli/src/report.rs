//! Metrics reports as a fixed-width table and as JSON. Both forms carry the
//! same numbers, rounded to four decimal places.

use serde::{Deserialize, Serialize};

use canids_core::canbus::AttackKind;

use crate::metrics::MetricsReport;

pub const DECIMALS: usize = 4;

const REFERENCE_PRECISION: f64 = 0.9814;
const REFERENCE_RECALL: f64 = 0.9804;
const REFERENCE_F1: f64 = 0.9783;

pub fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResult {
    pub model: String,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub dataset: String,
    pub split: String,
    pub rows: usize,
    pub models: Vec<ModelResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_note: Option<String>,
}

impl MetricsReport {
    pub fn rounded(&self) -> Self {
        let mut m = self.clone();
        for v in [&mut m.accuracy, &mut m.precision, &mut m.recall, &mut m.f1, &mut m.tpr, &mut m.tnr] {
            *v = round4(*v);
        }
        m.roc_auc = m.roc_auc.map(round4);
        for k in &mut m.per_kind {
            k.recall = round4(k.recall);
        }
        m
    }
}

/// Note on the published reference figures, whose F1 is not the harmonic
/// mean of their precision and recall.
pub fn reference_footer() -> String {
    let hm = 2.0 * REFERENCE_PRECISION * REFERENCE_RECALL / (REFERENCE_PRECISION + REFERENCE_RECALL);
    format!(
        "note: the reference results list precision {REFERENCE_PRECISION:.4}, recall {REFERENCE_RECALL:.4} and F1 {REFERENCE_F1:.4}; \
         the harmonic mean of that precision and recall is {hm:.4}. F1 here is always 2PR/(P+R)."
    )
}

const KINDS: [AttackKind; 3] = [AttackKind::Flooding, AttackKind::Fuzzing, AttackKind::Spoofing];

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.DECIMALS$}"))
}

impl Report {
    pub fn new(dataset: &str, split: &str, rows: usize, models: Vec<ModelResult>, reference: bool) -> Self {
        let models = models.into_iter().map(|r| ModelResult { model: r.model, metrics: r.metrics.rounded() }).collect();
        Self { dataset: dataset.into(), split: split.into(), rows, models, reference_note: reference.then(reference_footer) }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_table(&self) -> String {
        let kinds: Vec<AttackKind> =
            KINDS.into_iter().filter(|k| self.models.iter().any(|m| m.metrics.per_kind.iter().any(|r| r.kind == *k))).collect();
        let mut header = vec!["model".to_string()];
        header.extend(["accuracy", "precision", "recall", "f1", "roc_auc", "tpr", "tnr"].map(String::from));
        header.extend(kinds.iter().map(|k| format!("recall_{}", k.name())));
        let mut rows = vec![header];
        for m in &self.models {
            let r = &m.metrics;
            let mut row = vec![m.model.clone()];
            for v in [Some(r.accuracy), Some(r.precision), Some(r.recall), Some(r.f1), r.roc_auc, Some(r.tpr), Some(r.tnr)] {
                row.push(cell(v));
            }
            for k in &kinds {
                row.push(cell(r.per_kind.iter().find(|x| x.kind == *k).map(|x| x.recall)));
            }
            rows.push(row);
        }
        let widths: Vec<usize> = (0..rows[0].len()).map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
        let mut out = format!("dataset {} / {} split / {} rows\n", self.dataset, self.split, self.rows);
        for (i, row) in rows.iter().enumerate() {
            let line: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (v, w))| if c == 0 { format!("{v:<w$}") } else { format!("{v:>w$}") })
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
            if i == 0 {
                out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
                out.push('\n');
            }
        }
        for m in &self.models {
            if !m.metrics.zero_denominator.is_empty() {
                out.push_str(&format!("warning: {} has zero denominators for {}\n", m.model, m.metrics.zero_denominator.join(", ")));
            }
        }
        if let Some(note) = &self.reference_note {
            out.push_str(note);
            out.push('\n');
        }
        out
    }
}
