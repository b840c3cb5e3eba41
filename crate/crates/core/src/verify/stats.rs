use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Minimum expected count per cell after pooling.
pub const MIN_EXPECTED: f64 = 5.0;

/// Finite pmf over an ordered outcome type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pmf<K: Ord> {
    probs: BTreeMap<K, f64>,
}

impl<K: Ord + Clone> Pmf<K> {
    pub fn new(probs: BTreeMap<K, f64>) -> Self {
        Pmf { probs }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (K, f64)>) -> Self {
        let mut probs = BTreeMap::new();
        for (k, p) in pairs {
            *probs.entry(k).or_insert(0.0) += p;
        }
        Pmf { probs }
    }

    pub fn point_mass(k: K) -> Self {
        Pmf::from_pairs([(k, 1.0)])
    }

    pub fn get(&self, k: &K) -> f64 {
        self.probs.get(k).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, &f64)> {
        self.probs.iter()
    }

    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.total() - 1.0).abs() <= tol && self.probs.values().all(|&p| p >= 0.0)
    }

    pub fn map_keys<J: Ord + Clone>(&self, f: impl Fn(&K) -> J) -> Pmf<J> {
        Pmf::from_pairs(self.probs.iter().map(|(k, &p)| (f(k), p)))
    }
}

impl Pmf<usize> {
    pub fn from_slice(probs: &[f64]) -> Self {
        Pmf::from_pairs(probs.iter().copied().enumerate())
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().map(|(&k, &p)| k as f64 * p).sum()
    }
}

/// Outcome counts with Wilson confidence radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalPmf<K: Ord> {
    counts: BTreeMap<K, u64>,
    total: u64,
}

impl<K: Ord> Default for EmpiricalPmf<K> {
    fn default() -> Self {
        EmpiricalPmf { counts: BTreeMap::new(), total: 0 }
    }
}

impl<K: Ord + Clone> EmpiricalPmf<K> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_samples(samples: impl IntoIterator<Item = K>) -> Self {
        let mut emp = Self::new();
        for s in samples {
            emp.add(s);
        }
        emp
    }

    pub fn add(&mut self, k: K) {
        *self.counts.entry(k).or_insert(0) += 1;
        self.total += 1;
    }

    /// Associative, order-free merge.
    pub fn merge(&mut self, other: &EmpiricalPmf<K>) {
        for (k, &c) in &other.counts {
            *self.counts.entry(k.clone()).or_insert(0) += c;
        }
        self.total += other.total;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn count(&self, k: &K) -> u64 {
        self.counts.get(k).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &BTreeMap<K, u64> {
        &self.counts
    }

    pub fn prob(&self, k: &K) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.count(k) as f64 / self.total as f64
        }
    }

    pub fn to_pmf(&self) -> Pmf<K> {
        let n = self.total as f64;
        Pmf::from_pairs(self.counts.iter().map(|(k, &c)| (k.clone(), c as f64 / n)))
    }

    /// 95% Wilson score interval half-width for outcome `k`.
    pub fn wilson_radius(&self, k: &K) -> f64 {
        wilson_interval(self.count(k), self.total, 1.959_963_984_540_054).1
    }
}

impl EmpiricalPmf<usize> {
    pub fn mean(&self) -> f64 {
        self.counts.iter().map(|(&k, &c)| (k * c as usize) as f64).sum::<f64>() / self.total as f64
    }
}

/// Wilson score interval `(center, half_width)`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.5, 0.5);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    (center, half)
}

/// `(1/2) sum |p - r|` over the union of supports.
pub fn tv_distance<K: Ord + Clone>(p: &Pmf<K>, r: &Pmf<K>) -> f64 {
    let mut sum = 0.0;
    for (k, &a) in p.iter() {
        sum += (a - r.get(k)).abs();
    }
    for (k, &b) in r.iter() {
        if p.get(k) == 0.0 && !p.probs.contains_key(k) {
            sum += b.abs();
        }
    }
    0.5 * sum
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    /// Number of cells after pooling.
    pub cells: usize,
}

fn chi_square_tail(statistic: f64, df: usize) -> f64 {
    if df == 0 {
        return 1.0;
    }
    if !statistic.is_finite() {
        return 0.0;
    }
    ChiSquared::new(df as f64).expect("df > 0").sf(statistic)
}

/// Groups indices (sorted by ascending weight) so every group's weight is
/// at least `min`; a short final group joins the previous one.
fn pool_by_weight(weights: &[f64], min: f64) -> Option<Vec<Vec<usize>>> {
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[a].total_cmp(&weights[b]));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut current = Vec::new();
    let mut acc = 0.0;
    for i in order {
        current.push(i);
        acc += weights[i];
        if acc >= min {
            groups.push(std::mem::take(&mut current));
            acc = 0.0;
        }
    }
    if !current.is_empty() {
        groups.last_mut()?.extend(current);
    }
    Some(groups)
}

/// Pearson goodness of fit of observed counts against an exact pmf, pooling
/// cells until each expected count is at least [`MIN_EXPECTED`].
pub fn chi_square_gof<K: Ord + Clone>(emp: &EmpiricalPmf<K>, exact: &Pmf<K>) -> Result<TestResult> {
    let n = emp.total() as f64;
    if emp.total() == 0 {
        return Err(Error::InsufficientSamples("no observations".into()));
    }
    // an observation outside the support rejects outright
    if emp.counts().keys().any(|k| exact.get(k) <= 0.0) {
        return Ok(TestResult { statistic: f64::INFINITY, df: 0, p_value: 0.0, cells: 0 });
    }
    let keys: Vec<&K> = exact.iter().filter(|(_, &p)| p > 0.0).map(|(k, _)| k).collect();
    let expected: Vec<f64> = keys.iter().map(|k| n * exact.get(k)).collect();
    let observed: Vec<f64> = keys.iter().map(|k| emp.count(k) as f64).collect();
    let groups = pool_by_weight(&expected, MIN_EXPECTED)
        .ok_or_else(|| Error::InsufficientSamples(format!("total expected count {n} below {MIN_EXPECTED}")))?;
    let mut statistic = 0.0;
    for g in &groups {
        let e: f64 = g.iter().map(|&i| expected[i]).sum();
        let o: f64 = g.iter().map(|&i| observed[i]).sum();
        statistic += (o - e) * (o - e) / e;
    }
    let df = groups.len() - 1;
    Ok(TestResult { statistic, df, p_value: chi_square_tail(statistic, df), cells: groups.len() })
}

/// Pearson test of independence on a contingency table, pooling sparse rows
/// and columns (smallest marginals first).
pub fn contingency_test(table: &[Vec<u64>]) -> Result<TestResult> {
    let rows = table.len();
    let cols = table.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 || table.iter().any(|r| r.len() != cols) {
        return Err(Error::domain("contingency table must be a nonempty rectangle"));
    }
    let total: u64 = table.iter().flatten().sum();
    if total == 0 {
        return Err(Error::InsufficientSamples("empty contingency table".into()));
    }
    let n = total as f64;
    let row_tot: Vec<f64> = table.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
    let col_tot: Vec<f64> = (0..cols).map(|j| table.iter().map(|r| r[j]).sum::<u64>() as f64).collect();
    // keep only nonempty margins
    let live_rows: Vec<usize> = (0..rows).filter(|&i| row_tot[i] > 0.0).collect();
    let live_cols: Vec<usize> = (0..cols).filter(|&j| col_tot[j] > 0.0).collect();
    // a cell's expected count is row * col / n; pool rows until each row
    // group's smallest expected count can meet the threshold, then columns
    let min_col = live_cols.iter().map(|&j| col_tot[j]).fold(f64::INFINITY, f64::min);
    let row_w: Vec<f64> = live_rows.iter().map(|&i| row_tot[i] * min_col / n).collect();
    let row_groups = pool_by_weight(&row_w, MIN_EXPECTED).unwrap_or_else(|| vec![(0..live_rows.len()).collect()]);
    let pooled_rows: Vec<Vec<f64>> = row_groups
        .iter()
        .map(|g| live_cols.iter().map(|&j| g.iter().map(|&k| table[live_rows[k]][j] as f64).sum()).collect())
        .collect();
    let prow: Vec<f64> = pooled_rows.iter().map(|r| r.iter().sum()).collect();
    let min_row = prow.iter().copied().fold(f64::INFINITY, f64::min);
    let col_w: Vec<f64> = live_cols.iter().map(|&j| col_tot[j] * min_row / n).collect();
    let col_groups = pool_by_weight(&col_w, MIN_EXPECTED).unwrap_or_else(|| vec![(0..live_cols.len()).collect()]);
    let cells: Vec<Vec<f64>> =
        pooled_rows.iter().map(|r| col_groups.iter().map(|g| g.iter().map(|&k| r[k]).sum()).collect()).collect();
    let pcol: Vec<f64> = (0..col_groups.len()).map(|j| cells.iter().map(|r| r[j]).sum()).collect();
    let mut statistic = 0.0;
    for (i, r) in cells.iter().enumerate() {
        for (j, &o) in r.iter().enumerate() {
            let e = prow[i] * pcol[j] / n;
            statistic += (o - e) * (o - e) / e;
        }
    }
    let df = (cells.len() - 1) * (col_groups.len() - 1);
    Ok(TestResult { statistic, df, p_value: chi_square_tail(statistic, df), cells: cells.len() * col_groups.len() })
}

/// Two-sample chi-square homogeneity test.
pub fn two_sample_test<K: Ord + Clone>(a: &EmpiricalPmf<K>, b: &EmpiricalPmf<K>) -> Result<TestResult> {
    let mut keys: Vec<&K> = a.counts().keys().collect();
    keys.extend(b.counts().keys());
    keys.sort();
    keys.dedup();
    let table = vec![keys.iter().map(|k| a.count(k)).collect(), keys.iter().map(|k| b.count(k)).collect()];
    contingency_test(&table)
}

/// Welch z statistic for the difference of two sample means.
pub fn welch_z(a: &[f64], b: &[f64]) -> f64 {
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let se = (va / a.len() as f64 + vb / b.len() as f64).sqrt();
    if se == 0.0 {
        if ma == mb {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (ma - mb) / se
    }
}

/// Sample mean and unbiased variance.
pub fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = if x.len() > 1 { x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var)
}

pub fn median(x: &[f64]) -> f64 {
    quantile(x, 0.5)
}

/// Linear-interpolated empirical quantile.
pub fn quantile(x: &[f64], p: f64) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = p * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tv_examples() {
        let p = Pmf::from_slice(&[0.5, 0.5]);
        assert_eq!(tv_distance(&p, &p), 0.0);
        assert_eq!(tv_distance(&Pmf::point_mass(0usize), &Pmf::point_mass(1usize)), 1.0);
        assert!((tv_distance(&p, &Pmf::from_slice(&[0.75, 0.25])) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn single_outcome_gof() {
        let emp = EmpiricalPmf::from_samples(std::iter::repeat_n(3usize, 100));
        let r = chi_square_gof(&emp, &Pmf::point_mass(3usize)).unwrap();
        assert_eq!(r.p_value, 1.0);
        let emp = EmpiricalPmf::from_samples([3usize, 4]);
        assert_eq!(chi_square_gof(&emp, &Pmf::point_mass(3usize)).unwrap().p_value, 0.0);
    }

    #[test]
    fn gof_known_value() {
        // 28, 31, 40, 35 against uniform: statistic 2.4179..., p = 0.4903...
        let mut emp = EmpiricalPmf::new();
        for (k, c) in [(0usize, 28), (1, 31), (2, 40), (3, 35)] {
            for _ in 0..c {
                emp.add(k);
            }
        }
        let r = chi_square_gof(&emp, &Pmf::from_slice(&[0.25; 4])).unwrap();
        assert!((r.statistic - 2.417_910_447_761_194).abs() < 1e-12);
        assert!((r.p_value - 0.490_309_306_965_388_3).abs() < 1e-9);
    }

    #[test]
    fn insufficient_samples() {
        let emp = EmpiricalPmf::from_samples([0usize]);
        assert!(matches!(chi_square_gof(&emp, &Pmf::from_slice(&[0.5, 0.5])), Err(Error::InsufficientSamples(_))));
    }

    #[test]
    fn pooling_merges_small_cells() {
        let groups = pool_by_weight(&[100.0, 1.0, 2.0, 3.0, 50.0], 5.0).unwrap();
        assert_eq!(groups.len(), 3);
        assert!(groups.iter().any(|g| g.len() == 3));
    }

    #[test]
    fn contingency_detects_dependence() {
        let indep = vec![vec![100, 200, 300], vec![200, 400, 600]];
        assert!(contingency_test(&indep).unwrap().p_value > 0.99);
        let dep = vec![vec![300, 200, 100], vec![100, 200, 300]];
        assert!(contingency_test(&dep).unwrap().p_value < 1e-10);
    }

    #[test]
    fn wilson_contains_estimate() {
        let (c, h) = wilson_interval(30, 100, 1.96);
        assert!(c - h < 0.3 && 0.3 < c + h);
        assert!(h > 0.08 && h < 0.1);
    }

    #[test]
    fn merge_is_order_free() {
        let a = EmpiricalPmf::from_samples([1usize, 2, 2]);
        let b = EmpiricalPmf::from_samples([2usize, 5]);
        let mut ab = a.clone();
        ab.merge(&b);
        let mut ba = b.clone();
        ba.merge(&a);
        assert_eq!(ab, ba);
        assert_eq!(ab.total(), 5);
    }
}
