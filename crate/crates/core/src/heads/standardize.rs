use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column means and standard deviations estimated on training rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardizer {
    /// Population statistics per column. A constant column is an error; prune
    /// sparse features first.
    pub fn fit(rows: &[Vec<f64>], names: &[String]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::invalid("cannot standardize zero rows"));
        };
        let d = first.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::invalid("ragged feature rows"));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut sd = vec![0.0; d];
        for r in rows {
            for j in 0..d {
                let z = r[j] - mean[j];
                sd[j] += z * z;
            }
        }
        for (j, s) in sd.iter_mut().enumerate() {
            *s = (*s / n).sqrt();
            let scale = mean[j].abs().max(1.0);
            if !(*s > 1e-12 * scale) {
                let name = names.get(j).map_or_else(|| format!("column {j}"), |n| format!("feature {n:?}"));
                return Err(Error::invalid(format!(
                    "{name} is constant on the training rows; remove it (see prune_sparse) before standardizing"
                )));
            }
        }
        Ok(Self { mean, sd })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.dim() {
            return Err(Error::invalid(format!("row has {} features, expected {}", row.len(), self.dim())));
        }
        Ok(row.iter().zip(&self.mean).zip(&self.sd).map(|((x, m), s)| (x - m) / s).collect())
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.transform_row(r)).collect()
    }
}
