//! Named scalar features computed from cleaned tweets.
//!
//! A feature's group is the part of its name before the first `/`, or the
//! whole name when there is none (`vader/pos` is in group `vader`, `caps` is
//! its own group).

mod extract;
pub mod lexicon;

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub use extract::{
    category_features, elongated, nrc_hashtag_features, polarity_scorer, syntactic_features, FeatureGroups,
    Featurizer, CATEGORY_CAP,
};
pub use lexicon::{AffectLexicon, CategoryLexicon, PolarityLexicon, AFFECT_EMOTIONS};

/// Default minimum number of rows in which a feature must be nonzero.
pub const MIN_SUPPORT: usize = 8;

pub fn group_of(name: &str) -> &str {
    name.split_once('/').map_or(name, |(g, _)| g)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeatureVector {
    names: Vec<String>,
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_parts(names: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let mut v = Self::new();
        if names.len() != values.len() {
            return Err(Error::invalid(format!("{} names for {} values", names.len(), values.len())));
        }
        for (n, x) in names.into_iter().zip(values) {
            v.push(n, x)?;
        }
        Ok(v)
    }

    pub fn push(&mut self, name: impl Into<String>, value: f64) -> Result<()> {
        let name = name.into();
        if !value.is_finite() {
            return Err(Error::Numerical(format!("feature {name} is {value}")));
        }
        if self.names.contains(&name) {
            return Err(Error::invalid(format!("duplicate feature name {name:?}")));
        }
        self.names.push(name);
        self.values.push(value);
        Ok(())
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }

    pub fn groups(&self) -> Vec<&str> {
        self.names.iter().map(|n| group_of(n)).collect()
    }
}

/// Concatenates parts in order. Names must be unique across parts.
pub fn assemble(parts: &[FeatureVector]) -> Result<FeatureVector> {
    let mut seen = HashSet::new();
    let mut out = FeatureVector::new();
    for p in parts {
        for (n, &v) in p.names.iter().zip(&p.values) {
            if !seen.insert(n.as_str()) {
                return Err(Error::invalid(format!("duplicate feature name {n:?}")));
            }
            out.names.push(n.clone());
            out.values.push(v);
        }
    }
    Ok(out)
}

/// Rows of features sharing one name order, keyed by tweet id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    pub ids: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn from_vectors(ids: Vec<String>, vectors: &[FeatureVector]) -> Result<Self> {
        if ids.len() != vectors.len() {
            return Err(Error::invalid(format!("{} ids for {} feature rows", ids.len(), vectors.len())));
        }
        let names = vectors.first().map(|v| v.names.clone()).unwrap_or_default();
        let mut rows = Vec::with_capacity(vectors.len());
        for (id, v) in ids.iter().zip(vectors) {
            if v.names != names {
                return Err(Error::invalid(format!("feature names of row {id:?} differ from the first row")));
            }
            rows.push(v.values.clone());
        }
        Ok(Self { names, ids, rows })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    /// Keeps the named columns, in the given order.
    pub fn select(&self, names: &[String]) -> Result<Self> {
        let idx = names
            .iter()
            .map(|n| {
                self.names
                    .iter()
                    .position(|m| m == n)
                    .ok_or_else(|| Error::invalid(format!("feature {n:?} not in matrix")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            names: names.to_vec(),
            ids: self.ids.clone(),
            rows: self.rows.iter().map(|r| idx.iter().map(|&j| r[j]).collect()).collect(),
        })
    }

    /// Appends the columns of `other`; both matrices must list the same ids.
    pub fn hstack(&self, other: &FeatureMatrix) -> Result<Self> {
        if self.ids != other.ids {
            return Err(Error::invalid("cannot join feature matrices with different ids"));
        }
        let mut names = self.names.clone();
        for n in &other.names {
            if names.contains(n) {
                return Err(Error::invalid(format!("duplicate feature name {n:?}")));
            }
            names.push(n.clone());
        }
        let rows = self.rows.iter().zip(&other.rows).map(|(a, b)| [a.as_slice(), b].concat()).collect();
        Ok(Self {
            names,
            ids: self.ids.clone(),
            rows,
        })
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["id".to_string()];
        header.extend(self.names.iter().cloned());
        wr.write_record(&header)?;
        for (id, row) in self.ids.iter().zip(&self.rows) {
            let mut rec = vec![id.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            wr.write_record(&rec)?;
        }
        wr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, origin: &str) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header = rd.headers()?.clone();
        if header.get(0) != Some("id") {
            return Err(Error::Parse {
                path: origin.into(),
                line: 1,
                msg: "first column must be `id`".into(),
            });
        }
        let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut m = Self {
            names,
            ..Self::default()
        };
        for (i, rec) in rd.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            if rec.len() != m.names.len() + 1 {
                return Err(Error::Parse {
                    path: origin.into(),
                    line,
                    msg: format!("expected {} fields, found {}", m.names.len() + 1, rec.len()),
                });
            }
            let row = rec
                .iter()
                .skip(1)
                .map(|s| {
                    s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                        path: origin.into(),
                        line,
                        msg: format!("bad value {s:?}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            m.ids.push(rec[0].to_string());
            m.rows.push(row);
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(f), &path.display().to_string())
    }
}

/// Names of the features nonzero in at least `min_support` rows, in column order.
pub fn prune_sparse(m: &FeatureMatrix, min_support: usize) -> Vec<String> {
    m.names
        .iter()
        .enumerate()
        .filter(|&(j, _)| m.rows.iter().filter(|r| r[j] != 0.0).count() >= min_support)
        .map(|(_, n)| n.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(pairs: &[(&str, f64)]) -> FeatureVector {
        FeatureVector::from_parts(pairs.iter().map(|p| p.0.to_string()).collect(), pairs.iter().map(|p| p.1).collect())
            .unwrap()
    }

    #[test]
    fn assemble_rules() {
        assert!(assemble(&[]).unwrap().is_empty());
        let a = fv(&[("hash_affect/anger", 0.1), ("hash_affect/fear", 0.0), ("hash_affect/joy", 0.0), ("hash_affect/sadness", 0.2)]);
        let names: Vec<String> = (0..16).map(|i| format!("c{i}")).collect();
        let b = FeatureVector::from_parts(names, vec![1.0; 16]).unwrap();
        let ab = assemble(&[a.clone(), b]).unwrap();
        assert_eq!(ab.len(), 20);
        assert_eq!(ab.groups()[0], "hash_affect");
        let err = assemble(&[fv(&[("joy", 1.0)]), fv(&[("joy", 2.0)])]).unwrap_err();
        assert!(err.to_string().contains("joy"));
    }

    #[test]
    fn vector_rejects_non_finite_and_duplicates() {
        let mut v = FeatureVector::new();
        v.push("a", 1.0).unwrap();
        assert!(v.push("a", 2.0).is_err());
        assert!(v.push("b", f64::NAN).is_err());
    }

    fn matrix_with_support(support: usize) -> FeatureMatrix {
        let rows = (0..20).map(|i| vec![if i < support { 1.0 } else { 0.0 }, 3.0]).collect();
        FeatureMatrix {
            names: vec!["sparse".into(), "dense".into()],
            ids: (0..20).map(|i| i.to_string()).collect(),
            rows,
        }
    }

    #[test]
    fn prune_threshold() {
        assert_eq!(prune_sparse(&matrix_with_support(7), MIN_SUPPORT), ["dense"]);
        assert_eq!(prune_sparse(&matrix_with_support(8), MIN_SUPPORT), ["sparse", "dense"]);
        assert_eq!(prune_sparse(&matrix_with_support(0), 0), ["sparse", "dense"]);
    }

    #[test]
    fn csv_round_trip() {
        let m = FeatureMatrix {
            names: vec!["mag".into(), "vader/pos".into()],
            ids: vec!["a,1".into(), "b".into()],
            rows: vec![vec![0.1, 1.0 / 3.0], vec![-2.5e-10, 0.0]],
        };
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let back = FeatureMatrix::read_csv(buf.as_slice(), "mem").unwrap();
        assert_eq!(back, m);
        assert!(FeatureMatrix::read_csv("x,y\n1,2\n".as_bytes(), "mem").is_err());
        let err = FeatureMatrix::read_csv("id,y\na,zz\n".as_bytes(), "f.csv").unwrap_err().to_string();
        assert!(err.contains("f.csv:2"), "{err}");
    }

    #[test]
    fn select_and_hstack() {
        let m = matrix_with_support(3);
        let s = m.select(&["dense".to_string()]).unwrap();
        assert_eq!(s.rows[0], [3.0]);
        let h = s.hstack(&m.select(&["sparse".to_string()]).unwrap()).unwrap();
        assert_eq!(h.names, ["dense", "sparse"]);
        assert!(h.hstack(&m).is_err());
    }
}
