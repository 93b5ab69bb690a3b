use std::cmp::Ordering;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pearson values closer than this count as equal during the search.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Monotone partition of scores into `k` ordinal classes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationThresholds {
    pub k: usize,
    pub cuts: Vec<f64>,
    pub class_values: Vec<i64>,
}

impl CalibrationThresholds {
    pub fn new(cuts: Vec<f64>, class_values: Vec<i64>) -> Result<Self> {
        let t = Self {
            k: class_values.len(),
            cuts,
            class_values,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 || self.class_values.len() != self.k || self.cuts.len() + 1 != self.k {
            return Err(Error::invalid(format!(
                "{} cuts and {} class values for k = {}",
                self.cuts.len(),
                self.class_values.len(),
                self.k
            )));
        }
        if self.cuts.windows(2).any(|w| !(w[0] < w[1])) || self.class_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("cuts and class values must be strictly increasing"));
        }
        if self.cuts.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("cuts must be finite"));
        }
        Ok(())
    }

    /// Scores equal to a cut go to the upper class.
    pub fn class_of(&self, s: f64) -> i64 {
        let above = self.cuts.partition_point(|&c| c <= s);
        self.class_values[above]
    }
}

pub fn apply_thresholds(scores: &[f64], t: &CalibrationThresholds) -> Vec<i64> {
    scores.iter().map(|&s| t.class_of(s)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSearch {
    /// Above this many midpoint candidates, a uniform grid of this size is used.
    pub max_candidates: usize,
    /// Subset counts up to this bound are enumerated exhaustively.
    pub exhaustive_limit: u64,
    pub beam_width: usize,
}

impl Default for GridSearch {
    fn default() -> Self {
        Self {
            max_candidates: 200,
            exhaustive_limit: 2_000_000,
            beam_width: 1000,
        }
    }
}

/// Cuts between equal-count bins of the sorted scores. A boundary falling
/// inside a run of equal scores moves up to the end of the run.
pub fn equal_frequency_cuts(scores: &[f64], k: usize) -> Vec<f64> {
    let mut s = scores.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    let mut cuts: Vec<f64> = Vec::new();
    for i in 1..k {
        let mut b = (i * n + k / 2) / k;
        while b > 0 && b < n && s[b - 1] == s[b] {
            b += 1;
        }
        if b == 0 || b >= n {
            continue;
        }
        let c = (s[b - 1] + s[b]) / 2.0;
        if cuts.last().is_none_or(|&l| l < c) {
            cuts.push(c);
        }
    }
    cuts
}

/// Sorted scores with prefix sums of gold values, so that the Pearson
/// correlation of any cut assignment costs O(k).
struct Prefix {
    sorted: Vec<f64>,
    gold: Vec<f64>,
    sum_g: f64,
    sum_gg: f64,
}

impl Prefix {
    fn new(scores: &[f64], gold: &[f64]) -> Self {
        let mut idx: Vec<usize> = (0..scores.len()).collect();
        idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
        let mut acc = vec![0.0];
        for &i in &idx {
            acc.push(acc.last().unwrap() + gold[i]);
        }
        Self {
            sorted: idx.iter().map(|&i| scores[i]).collect(),
            sum_g: gold.iter().sum(),
            sum_gg: gold.iter().map(|g| g * g).sum(),
            gold: acc,
        }
    }

    /// Pearson of the class assignment induced by `cuts` against gold, or
    /// `None` when the assignment is constant.
    fn pearson(&self, cuts: &[f64], values: &[f64]) -> Option<f64> {
        let n = self.sorted.len() as f64;
        let (mut sa, mut saa, mut sag) = (0.0, 0.0, 0.0);
        let mut lo = 0;
        for (c, &v) in values.iter().enumerate() {
            let hi = match cuts.get(c) {
                Some(&cut) => self.sorted.partition_point(|&s| s < cut),
                None => self.sorted.len(),
            };
            let m = (hi - lo) as f64;
            sa += m * v;
            saa += m * v * v;
            sag += v * (self.gold[hi] - self.gold[lo]);
            lo = hi;
        }
        let cov = sag - sa * self.sum_g / n;
        let va = saa - sa * sa / n;
        let vg = self.sum_gg - self.sum_g * self.sum_g / n;
        if va <= 1e-12 * saa.max(1.0) {
            return None;
        }
        Some((cov / (va.sqrt() * vg.sqrt())).clamp(-1.0, 1.0))
    }
}

fn binomial(n: usize, r: usize) -> u64 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

fn candidates(scores: &[f64], k: usize, opts: &GridSearch) -> Vec<f64> {
    let mut s = scores.to_vec();
    s.sort_by(f64::total_cmp);
    s.dedup();
    let mids: Vec<f64> = s.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect();
    if mids.len() <= opts.max_candidates {
        return mids;
    }
    let m = opts.max_candidates;
    let mut grid: Vec<f64> = (1..=m).map(|j| j as f64 / (m + 1) as f64).collect();
    // keep the equal-frequency cuts reachable
    grid.extend(equal_frequency_cuts(scores, k));
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Best state so far: maximal Pearson, ties (within [`TIE_TOLERANCE`]) to
/// the lexicographically smallest index vector.
fn better(a: (f64, &[usize]), b: (f64, &[usize])) -> bool {
    if a.0 > b.0 + TIE_TOLERANCE {
        return true;
    }
    if a.0 < b.0 - TIE_TOLERANCE {
        return false;
    }
    a.1 < b.1
}

/// Chooses `k - 1` cuts among candidate points maximizing the Pearson
/// correlation between assigned class values and gold labels.
pub fn grid_search_thresholds(
    scores: &[f64],
    gold: &[i64],
    class_values: &[i64],
    opts: &GridSearch,
) -> Result<CalibrationThresholds> {
    let k = class_values.len();
    if k < 2 || class_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("class values must be at least two, strictly increasing"));
    }
    if scores.len() != gold.len() {
        return Err(Error::invalid(format!("{} scores for {} gold labels", scores.len(), gold.len())));
    }
    if scores.len() < k {
        return Err(Error::invalid(format!("{} scores cannot fill {k} classes", scores.len())));
    }
    if let Some(g) = gold.iter().find(|g| !class_values.contains(g)) {
        return Err(Error::invalid(format!("gold label {g} is not one of {class_values:?}")));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("scores must be finite"));
    }
    if gold.iter().all(|&g| g == gold[0]) {
        return Err(Error::Numerical("undefined correlation: gold labels are constant".into()));
    }
    let gf: Vec<f64> = gold.iter().map(|&g| g as f64).collect();
    let values: Vec<f64> = class_values.iter().map(|&v| v as f64).collect();
    let prefix = Prefix::new(scores, &gf);
    let cand = candidates(scores, k, opts);
    let r = k - 1;
    if cand.len() < r {
        return Err(Error::invalid(format!("only {} distinct cut points for {k} classes", cand.len())));
    }
    let eval = |idx: &[usize]| {
        let cuts: Vec<f64> = idx.iter().map(|&i| cand[i]).collect();
        prefix.pearson(&cuts, &values)
    };

    let best = if binomial(cand.len(), r) <= opts.exhaustive_limit {
        exhaustive(cand.len(), r, &eval)
    } else {
        let seed: Vec<usize> = equal_frequency_cuts(scores, k)
            .iter()
            .filter_map(|c| cand.iter().position(|x| x == c))
            .collect();
        beam(cand.len(), r, seed, opts.beam_width, &eval)
    };
    let Some(idx) = best else {
        return Err(Error::Numerical("undefined correlation: no cut set separates the scores".into()));
    };
    CalibrationThresholds::new(idx.iter().map(|&i| cand[i]).collect(), class_values.to_vec())
}

/// Visits every `r`-subset of `0..m` in lexicographic order.
fn for_each_combination(m: usize, r: usize, mut f: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..r).collect();
    loop {
        f(&idx);
        let Some(pos) = (0..r).rev().find(|&i| idx[i] < m - r + i) else {
            break;
        };
        idx[pos] += 1;
        for j in pos + 1..r {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Two passes: the maximal Pearson, then the first subset within
/// [`TIE_TOLERANCE`] of it.
fn exhaustive(m: usize, r: usize, eval: &dyn Fn(&[usize]) -> Option<f64>) -> Option<Vec<usize>> {
    let mut max = f64::NEG_INFINITY;
    for_each_combination(m, r, |idx| {
        if let Some(p) = eval(idx) {
            max = max.max(p);
        }
    });
    if !max.is_finite() {
        return None;
    }
    let mut best = None;
    for_each_combination(m, r, |idx| {
        if best.is_none() && eval(idx).is_some_and(|p| p >= max - TIE_TOLERANCE) {
            best = Some(idx.to_vec());
        }
    });
    best
}

/// Local search over cut subsets: each round moves one cut to any position
/// between its neighbours and keeps the best `width` distinct states.
fn beam(
    m: usize,
    r: usize,
    seed: Vec<usize>,
    width: usize,
    eval: &dyn Fn(&[usize]) -> Option<f64>,
) -> Option<Vec<usize>> {
    let mut start = seed;
    start.sort_unstable();
    start.dedup();
    if start.len() != r {
        // pad or replace with evenly spread indices
        start = (0..r).map(|i| (i + 1) * m / (r + 1)).collect();
        start.dedup();
        if start.len() != r {
            start = (0..r).collect();
        }
    }
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    seen.insert(start.clone());
    let score = |v: &[usize]| eval(v).unwrap_or(f64::NEG_INFINITY);
    let mut best = (score(&start), start.clone());
    let mut frontier = vec![best.clone()];
    while !frontier.is_empty() {
        let mut next: Vec<(f64, Vec<usize>)> = Vec::new();
        for (_, state) in &frontier {
            for c in 0..r {
                let lo = if c == 0 { 0 } else { state[c - 1] + 1 };
                let hi = if c + 1 == r { m } else { state[c + 1] };
                for pos in lo..hi {
                    if pos == state[c] {
                        continue;
                    }
                    let mut s = state.clone();
                    s[c] = pos;
                    if seen.insert(s.clone()) {
                        next.push((score(&s), s));
                    }
                }
            }
        }
        next.sort_by(|a, b| match b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal) {
            Ordering::Equal => a.1.cmp(&b.1),
            o => o,
        });
        next.truncate(width);
        let improved = next.first().is_some_and(|(p, s)| better((*p, s), (best.0, &best.1)));
        for (p, s) in &next {
            if better((*p, s), (best.0, &best.1)) {
                best = (*p, s.clone());
            }
        }
        if !improved {
            break;
        }
        frontier = next;
    }
    best.0.is_finite().then_some(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apply_conventions() {
        let t = CalibrationThresholds::new(vec![0.2, 0.4, 0.5, 0.6, 0.7, 0.8], (-3..=3).collect()).unwrap();
        assert_eq!(t.class_of(0.0), -3);
        assert_eq!(t.class_of(1.0), 3);
        assert_eq!(t.class_of(0.4), -1);
        assert_eq!(apply_thresholds(&[0.1, 0.55, 0.2], &t), [-3, 0, -2]);
        assert!(CalibrationThresholds::new(vec![0.5, 0.5], vec![0, 1, 2]).is_err());
        assert!(CalibrationThresholds::new(vec![0.5], vec![0, 1, 2]).is_err());
    }

    #[test]
    fn perfect_separation_takes_smallest_cut() {
        let t = grid_search_thresholds(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1], &[0, 1], &GridSearch::default()).unwrap();
        assert_eq!(t.cuts, [0.5]);
        // with several equally good cuts the first wins
        let t = grid_search_thresholds(&[0.1, 0.2, 0.5, 0.8, 0.9], &[0, 0, 0, 1, 1], &[0, 1], &GridSearch::default())
            .unwrap();
        assert!((t.cuts[0] - 0.65).abs() < 1e-12);
    }

    #[test]
    fn sorted_scores_reach_one() {
        let scores: Vec<f64> = (0..14).map(|i| i as f64 / 14.0).collect();
        let gold: Vec<i64> = (0..14).map(|i| i / 2 - 3).collect();
        let t = grid_search_thresholds(&scores, &gold, &(-3..=3).collect::<Vec<_>>(), &GridSearch::default()).unwrap();
        let pred: Vec<f64> = apply_thresholds(&scores, &t).iter().map(|&v| v as f64).collect();
        let g: Vec<f64> = gold.iter().map(|&v| v as f64).collect();
        assert!((crate::calib::pearson(&pred, &g).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let o = GridSearch::default();
        assert!(grid_search_thresholds(&[0.1, 0.2], &[1, 1], &[0, 1], &o).is_err());
        assert!(grid_search_thresholds(&[0.1], &[1], &[0, 1], &o).is_err());
        assert!(grid_search_thresholds(&[0.1, 0.2], &[0, 5], &[0, 1], &o).is_err());
    }

    #[test]
    fn beam_on_large_grid_beats_equal_frequency() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = 400;
        let gold: Vec<i64> = (0..n).map(|_| rng.gen_range(-3..=3)).collect();
        let scores: Vec<f64> = gold
            .iter()
            .map(|&g| ((g as f64 + 3.0) / 6.0 * 0.6 + rng.gen::<f64>() * 0.4).clamp(0.0, 1.0))
            .collect();
        let classes: Vec<i64> = (-3..=3).collect();
        let t = grid_search_thresholds(&scores, &gold, &classes, &GridSearch::default()).unwrap();
        let g: Vec<f64> = gold.iter().map(|&v| v as f64).collect();
        let r = |t: &CalibrationThresholds| {
            let p: Vec<f64> = apply_thresholds(&scores, t).iter().map(|&v| v as f64).collect();
            crate::calib::pearson(&p, &g).unwrap()
        };
        let base = CalibrationThresholds::new(equal_frequency_cuts(&scores, 7), classes).unwrap();
        assert!(r(&t) >= r(&base) - 1e-12, "{} < {}", r(&t), r(&base));
    }
}
