//! Outlier screening and feature correlation.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::IngestError;

/// Smallest sample for which the generalized ESD approximation is trusted.
pub const ROSNER_MIN_VALUES: usize = 25;

fn t_quantile(p: f64, dof: f64) -> f64 {
    StudentsT::new(0.0, 1.0, dof).expect("positive degrees of freedom").inverse_cdf(p)
}

/// Critical value of the i-th (1-based) generalized ESD step on `n` values.
pub fn esd_critical_value(n: usize, i: usize, alpha: f64) -> f64 {
    let remaining = (n - i + 1) as f64;
    let dof = (n - i - 1) as f64;
    let p = 1.0 - alpha / (2.0 * remaining);
    let t = t_quantile(p, dof);
    (n - i) as f64 * t / ((dof + t * t) * remaining).sqrt()
}

/// Rosner's generalized extreme Studentized deviate test.
///
/// Removes up to `max_outliers` points one at a time, each time the point with the
/// largest `|x - mean| / sd` over what remains, and reports the indices removed in the
/// first `k` steps where `k` is the last step whose statistic exceeds its critical
/// value. Returned indices are in removal order. A sample whose remaining spread
/// collapses to zero stops the recursion; an all-equal sample has no outliers.
pub fn rosner_outliers(values: &[f64], max_outliers: usize, alpha: f64) -> Result<Vec<usize>, IngestError> {
    if values.len() < ROSNER_MIN_VALUES {
        return Err(IngestError::TooFewValues { needed: ROSNER_MIN_VALUES, got: values.len() });
    }
    if !(alpha > 0.0 && alpha < 1.0) || max_outliers == 0 {
        return Err(IngestError::InvalidArgument(format!(
            "need 0 < alpha < 1 and max_outliers >= 1, got alpha={alpha}, max_outliers={max_outliers}"
        )));
    }
    let n = values.len();
    let steps = max_outliers.min(n - 2);
    let mut active: Vec<usize> = (0..n).collect();
    let mut removed = Vec::with_capacity(steps);
    let mut flagged = 0;
    for i in 1..=steps {
        let m = active.len() as f64;
        let mean = active.iter().map(|&j| values[j]).sum::<f64>() / m;
        let var = active.iter().map(|&j| (values[j] - mean).powi(2)).sum::<f64>() / (m - 1.0);
        let sd = var.sqrt();
        if sd == 0.0 || !sd.is_finite() {
            break;
        }
        let (pos, dev) = active
            .iter()
            .enumerate()
            .map(|(pos, &j)| (pos, (values[j] - mean).abs()))
            .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
        let statistic = dev / sd;
        removed.push(active.remove(pos));
        if statistic > esd_critical_value(n, i, alpha) {
            flagged = i;
        }
    }
    removed.truncate(flagged);
    Ok(removed)
}

/// Pearson product-moment correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, IngestError> {
    if x.len() != y.len() {
        return Err(IngestError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(IngestError::TooFewValues { needed: 2, got: x.len() });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(IngestError::ZeroVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Two-sided p-value of `H0: rho = 0` for a sample correlation over `n` pairs.
pub fn correlation_p_value(r: f64, n: usize) -> f64 {
    if n <= 2 {
        return 1.0;
    }
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let dof = (n - 2) as f64;
    let t = r * (dof / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, dof).expect("positive degrees of freedom");
    (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub r: Vec<Vec<f64>>,
    pub p_values: Vec<Vec<f64>>,
    /// `p < significance` per pair.
    pub significant: Vec<Vec<bool>>,
    pub significance: f64,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.names.iter().position(|n| n == a)?;
        let j = self.names.iter().position(|n| n == b)?;
        Some(self.r[i][j])
    }
}

/// Pairwise Pearson correlation with two-sided t-test significance at `p < 0.05`.
pub fn correlation_matrix(columns: &[(&str, &[f64])]) -> Result<CorrelationMatrix, IngestError> {
    const SIGNIFICANCE: f64 = 0.05;
    let k = columns.len();
    let mut r = vec![vec![1.0; k]; k];
    let mut p_values = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let rij = pearson(columns[i].1, columns[j].1)?;
            let pij = correlation_p_value(rij, columns[i].1.len());
            r[i][j] = rij;
            r[j][i] = rij;
            p_values[i][j] = pij;
            p_values[j][i] = pij;
        }
    }
    let significant = p_values.iter().map(|row| row.iter().map(|&p| p < SIGNIFICANCE).collect()).collect();
    Ok(CorrelationMatrix {
        names: columns.iter().map(|(n, _)| n.to_string()).collect(),
        r,
        p_values,
        significant,
        significance: SIGNIFICANCE,
    })
}
