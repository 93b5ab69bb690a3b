use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::pearson;
use crate::error::{Error, Result};
use crate::lexfeat::group_of;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub name: String,
    pub group: String,
    pub beta: f64,
    pub rho: f64,
    pub d: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupShare {
    pub name: String,
    pub dim: usize,
    /// Sum of member `d` values, in percent.
    pub percent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub features: Vec<FeatureImportance>,
    /// Groups in order of first appearance.
    pub groups: Vec<GroupShare>,
    pub r_squared: f64,
}

fn zscore(v: &[f64]) -> Option<Vec<f64>> {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt();
    (sd > 0.0).then(|| v.iter().map(|x| (x - m) / sd).collect())
}

/// `d_i = beta_i * rho_i / R^2` from an OLS fit of standardized `y` on
/// standardized columns of `x`. Negative shares are kept.
pub fn pratt_importance(x: &[Vec<f64>], y: &[f64], names: &[String]) -> Result<ImportanceReport> {
    let n = x.len();
    let p = names.len();
    if n != y.len() {
        return Err(Error::invalid(format!("{n} feature rows for {} targets", y.len())));
    }
    if p == 0 || x.iter().any(|r| r.len() != p) {
        return Err(Error::invalid(format!("feature rows must all have {p} columns")));
    }
    if n <= p {
        return Err(Error::invalid(format!("OLS needs more rows ({n}) than features ({p})")));
    }
    let y = zscore(y).ok_or_else(|| Error::Numerical("target is constant".into()))?;
    let mut cols = Vec::with_capacity(p);
    for (j, name) in names.iter().enumerate() {
        let c: Vec<f64> = x.iter().map(|r| r[j]).collect();
        cols.push(zscore(&c).ok_or_else(|| Error::Numerical(format!("feature {name:?} is constant")))?);
    }
    let xm = DMatrix::from_fn(n, p, |i, j| cols[j][i]);
    let qr = xm.clone().qr();
    let r = qr.r();
    // standardized columns have norm sqrt(n); a tiny diagonal entry means the
    // column lies in the span of the earlier ones
    let tol = 1e-9 * (n as f64).sqrt();
    let dependent: Vec<&str> = (0..p).filter(|&j| r[(j, j)].abs() < tol).map(|j| names[j].as_str()).collect();
    if !dependent.is_empty() {
        return Err(Error::Numerical(format!(
            "feature matrix is rank deficient; linearly dependent columns: {}",
            dependent.join(", ")
        )));
    }
    let yv = DVector::from_vec(y.clone());
    let qty = qr.q().transpose() * &yv;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let fitted = &xm * &beta;
    let ss_res: f64 = fitted.iter().zip(&y).map(|(f, t)| (t - f) * (t - f)).sum();
    let r2 = 1.0 - ss_res / n as f64;
    if !(r2 > 1e-12) {
        return Err(Error::Numerical(format!("R^2 = {r2}; importance shares are undefined")));
    }
    let mut features = Vec::with_capacity(p);
    let mut groups: Vec<GroupShare> = Vec::new();
    let mut slot: BTreeMap<String, usize> = BTreeMap::new();
    for j in 0..p {
        let rho = pearson(&cols[j], &y)?;
        let d = beta[j] * rho / r2;
        let group = group_of(&names[j]).to_string();
        let gi = *slot.entry(group.clone()).or_insert_with(|| {
            groups.push(GroupShare {
                name: group.clone(),
                dim: 0,
                percent: 0.0,
            });
            groups.len() - 1
        });
        groups[gi].dim += 1;
        groups[gi].percent += 100.0 * d;
        features.push(FeatureImportance {
            name: names[j].clone(),
            group,
            beta: beta[j],
            rho,
            d,
        });
    }
    Ok(ImportanceReport {
        features,
        groups,
        r_squared: r2,
    })
}

impl ImportanceReport {
    pub fn total(&self) -> f64 {
        self.features.iter().map(|f| f.d).sum()
    }

    /// `feature, group, d, group %` per feature.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<importance>", e);
        writeln!(w, "feature\tgroup\td\tgroup_percent").map_err(io)?;
        for f in &self.features {
            let g = self.groups.iter().find(|g| g.name == f.group).map_or(0.0, |g| g.percent);
            writeln!(w, "{}\t{}\t{:.6}\t{:.2}", f.name, f.group, f.d, g).map_err(io)?;
        }
        Ok(())
    }

    /// Group table: `name, dim, %`, largest share first.
    pub fn write_group_table<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<importance>", e);
        writeln!(w, "name\tdim\tpercent").map_err(io)?;
        for g in self.sorted_groups() {
            writeln!(w, "{}\t{}\t{:.2}", g.name, g.dim, g.percent).map_err(io)?;
        }
        Ok(())
    }

    /// Bar-chart data: `name, share` with shares in [0, 1] scale.
    pub fn write_bar_chart<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<importance>", e);
        writeln!(w, "name\tshare").map_err(io)?;
        for g in self.sorted_groups() {
            writeln!(w, "{}\t{:.6}", g.name, g.percent / 100.0).map_err(io)?;
        }
        Ok(())
    }

    fn sorted_groups(&self) -> Vec<&GroupShare> {
        let mut g: Vec<&GroupShare> = self.groups.iter().collect();
        g.sort_by(|a, b| b.percent.total_cmp(&a.percent).then_with(|| a.name.cmp(&b.name)));
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_feature_is_one() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| (i * i) as f64 % 7.0).collect();
        let r = pratt_importance(&x, &y, &["a".into()]).unwrap();
        assert!((r.features[0].d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_pair_matches_closed_form() {
        // centered, orthogonal, equal-norm columns
        let a = [1.0, -1.0, 1.0, -1.0];
        let b = [1.0, 1.0, -1.0, -1.0];
        let y = [3.0, 0.5, 1.0, -2.0];
        let x: Vec<Vec<f64>> = (0..4).map(|i| vec![a[i], b[i]]).collect();
        let r = pratt_importance(&x, &y, &["g/a".into(), "h".into()]).unwrap();
        let ra = pearson(&a, &y).unwrap();
        let rb = pearson(&b, &y).unwrap();
        let r2 = ra * ra + rb * rb;
        assert!((r.r_squared - r2).abs() < 1e-12);
        assert!((r.features[0].d - ra * ra / r2).abs() < 1e-12);
        assert!((r.total() - 1.0).abs() < 1e-12);
        assert_eq!(r.groups[0].name, "g");
    }

    #[test]
    fn dependent_columns_are_named() {
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, (i % 3) as f64, 2.0 * i as f64 + 1.0]).collect();
        let y: Vec<f64> = (0..8).map(|i| (i % 2) as f64).collect();
        let err = pratt_importance(&x, &y, &["a".into(), "b".into(), "c".into()]).unwrap_err().to_string();
        assert!(err.ends_with("dependent columns: c"), "{err}");
    }

    #[test]
    fn report_layout() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, ((i * 5) % 6) as f64]).collect();
        let y = [0.0, 1.0, 1.5, 3.0, 3.5, 6.0];
        let r = pratt_importance(&x, &y, &["ASC/00".into(), "caps".into()]).unwrap();
        let mut buf = Vec::new();
        r.write_group_table(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("name\tdim\tpercent\n"));
        assert!(s.contains("ASC\t1\t"));
    }
}
