//! Evaluation metrics, ordinal threshold search and Pratt variable importance.

mod importance;
mod thresholds;

pub use importance::{pratt_importance, FeatureImportance, GroupShare, ImportanceReport};
pub use thresholds::{
    apply_thresholds, equal_frequency_cuts, grid_search_thresholds, CalibrationThresholds, GridSearch, TIE_TOLERANCE,
};

use crate::error::{Error, Result};

/// Pearson correlation. Errors when either input is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!("pearson: lengths {} and {} differ", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::invalid("pearson needs at least two values"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Numerical("undefined correlation: constant input".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Mean row-wise Jaccard index of binary label matrices. A row where both
/// sets are empty scores 1.
pub fn jaccard(gold: &[Vec<u8>], pred: &[Vec<u8>]) -> Result<f64> {
    if gold.len() != pred.len() || gold.is_empty() {
        return Err(Error::invalid(format!("jaccard: {} gold rows, {} predicted rows", gold.len(), pred.len())));
    }
    let mut total = 0.0;
    for (i, (g, p)) in gold.iter().zip(pred).enumerate() {
        if g.len() != p.len() {
            return Err(Error::invalid(format!("jaccard: row {i} widths {} and {} differ", g.len(), p.len())));
        }
        if g.iter().chain(p).any(|&v| v > 1) {
            return Err(Error::invalid(format!("jaccard: row {i} is not binary")));
        }
        let inter = g.iter().zip(p).filter(|(a, b)| **a == 1 && **b == 1).count();
        let union = g.iter().zip(p).filter(|(a, b)| **a == 1 || **b == 1).count();
        total += if union == 0 { 1.0 } else { inter as f64 / union as f64 };
    }
    Ok(total / gold.len() as f64)
}

/// Unweighted mean.
pub fn macro_average(scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::invalid("macro average of nothing"));
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Reported metric values are truncated, not rounded, to three decimals.
/// The `1e-9` guard keeps values such as `0.813` from printing as `0.812`.
pub fn truncate3(x: f64) -> f64 {
    (x * 1000.0 + 1e-9).floor() / 1000.0
}

pub fn format_metric(x: f64) -> String {
    format!("{:.3}", truncate3(x))
}
