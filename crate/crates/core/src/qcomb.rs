//! q-combinatorial primitives.
//!
//! Every formula has a floating-point entry point and a generic `*_in`
//! variant that works over any field implementing [`QScalar`]; the generic
//! path is what the exact-rational oracle tests instantiate.

use std::ops::{Div, Mul, Sub};

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Field operations needed by the q-series formulas.
pub trait QScalar: Clone + Zero + One + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> {}

impl<T> QScalar for T where T: Clone + Zero + One + Sub<Output = T> + Mul<Output = T> + Div<Output = T> {}

/// Asymmetry / Mallows parameter, `0 <= q < 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct QParam(f64);

impl QParam {
    pub fn new(q: f64) -> Result<Self> {
        if (0.0..1.0).contains(&q) {
            Ok(QParam(q))
        } else {
            Err(Error::InvalidQ(q))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0.0
    }

    /// `q^m` by repeated squaring, valid for exponents beyond `i32`.
    #[inline]
    pub fn pow(self, m: u64) -> f64 {
        pow_in(&self.0, m)
    }
}

impl TryFrom<f64> for QParam {
    type Error = Error;
    fn try_from(q: f64) -> Result<Self> {
        QParam::new(q)
    }
}

impl From<QParam> for f64 {
    fn from(q: QParam) -> f64 {
        q.0
    }
}

/// `x^m` by repeated squaring.
pub fn pow_in<T: QScalar>(x: &T, mut m: u64) -> T {
    let mut base = x.clone();
    let mut acc = T::one();
    while m > 0 {
        if m & 1 == 1 {
            acc = acc * base.clone();
        }
        m >>= 1;
        if m > 0 {
            base = base.clone() * base;
        }
    }
    acc
}

/// Table of `q^0..q^bound` with a repeated-squaring fallback past the bound.
#[derive(Debug, Clone)]
pub struct PowerCache {
    q: QParam,
    powers: Vec<f64>,
}

impl PowerCache {
    pub fn new(q: QParam, bound: usize) -> Self {
        let mut powers = Vec::with_capacity(bound + 1);
        let mut p = 1.0;
        for _ in 0..=bound {
            powers.push(p);
            p *= q.value();
        }
        PowerCache { q, powers }
    }

    #[inline]
    pub fn get(&self, m: u64) -> f64 {
        match self.powers.get(m as usize) {
            Some(&p) => p,
            None => self.q.pow(m),
        }
    }
}

/// `(q;q)_n = prod_{j=1}^n (1 - q^j)`.
pub fn q_pochhammer(q: QParam, n: usize) -> f64 {
    let mut acc = 1.0;
    let mut qj = 1.0;
    for _ in 0..n {
        qj *= q.value();
        acc *= 1.0 - qj;
    }
    acc
}

pub fn q_pochhammer_in<T: QScalar>(q: &T, n: usize) -> T {
    let mut acc = T::one();
    let mut qj = T::one();
    for _ in 0..n {
        qj = qj * q.clone();
        acc = acc * (T::one() - qj.clone());
    }
    acc
}

/// Gaussian binomial `(q;q)_n / ((q;q)_k (q;q)_{n-k})`.
pub fn q_binomial(n: usize, k: usize, q: QParam) -> Result<f64> {
    if k > n {
        return Err(Error::domain(format!("q_binomial: k = {k} exceeds n = {n}")));
    }
    // Product form prod_{i=1}^k (1 - q^{n-k+i}) / (1 - q^i) avoids the
    // large intermediate Pochhammer ratio.
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 1..=k {
        acc *= (1.0 - q.pow((n - k + i) as u64)) / (1.0 - q.pow(i as u64));
    }
    Ok(acc)
}

pub fn q_binomial_in<T: QScalar>(n: usize, k: usize, q: &T) -> Result<T> {
    if k > n {
        return Err(Error::domain(format!("q_binomial: k = {k} exceeds n = {n}")));
    }
    Ok(q_pochhammer_in(q, n) / (q_pochhammer_in(q, k) * q_pochhammer_in(q, n - k)))
}

/// Coefficients of the inversion generating polynomial of `k`-subsets of
/// `{1..n}`: entry `m` counts the 0/1 words with `k` ones and `m` inversions.
pub fn q_binomial_coefficients(n: usize, k: usize) -> Result<Vec<u64>> {
    if k > n {
        return Err(Error::domain(format!("q_binomial: k = {k} exceeds n = {n}")));
    }
    // rows[j] holds the polynomial for (n', j); built with
    // [n, j] = [n-1, j-1] + q^j [n-1, j].
    let mut rows: Vec<Vec<u64>> = vec![vec![1]];
    for m in 1..=n {
        let mut next: Vec<Vec<u64>> = Vec::with_capacity(m + 1);
        for j in 0..=m.min(k) {
            let deg = j * (m - j);
            let mut poly = vec![0u64; deg + 1];
            if j > 0 {
                for (e, c) in rows[j - 1].iter().enumerate() {
                    poly[e] += c;
                }
            }
            if j < m && j < rows.len() {
                for (e, c) in rows[j].iter().enumerate() {
                    poly[e + j] += c;
                }
            }
            next.push(poly);
        }
        rows = next;
    }
    Ok(rows.swap_remove(k))
}

/// Evaluates the inversion generating polynomial of `[n choose k]` at `q`.
pub fn q_binomial_by_inversions(n: usize, k: usize, q: QParam) -> Result<f64> {
    let coeffs = q_binomial_coefficients(n, k)?;
    Ok(coeffs.iter().rev().fold(0.0, |acc, &c| acc * q.value() + c as f64))
}

/// A permutation of `{1..n}` in one-line notation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FinitePermutation {
    values: Vec<usize>,
}

impl FinitePermutation {
    pub fn new(values: Vec<usize>) -> Result<Self> {
        let n = values.len();
        let mut seen = vec![false; n + 1];
        for &v in &values {
            if v == 0 || v > n {
                return Err(Error::InvalidPermutation(format!("value {v} outside 1..={n}")));
            }
            if std::mem::replace(&mut seen[v], true) {
                return Err(Error::InvalidPermutation(format!("value {v} repeated")));
            }
        }
        Ok(FinitePermutation { values })
    }

    pub(crate) fn from_values_unchecked(values: Vec<usize>) -> Self {
        debug_assert!(FinitePermutation::new(values.clone()).is_ok());
        FinitePermutation { values }
    }

    pub fn identity(n: usize) -> Self {
        FinitePermutation { values: (1..=n).collect() }
    }

    pub fn reversal(n: usize) -> Self {
        FinitePermutation { values: (1..=n).rev().collect() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[usize] {
        &self.values
    }

    pub fn is_identity(&self) -> bool {
        self.values.iter().enumerate().all(|(i, &v)| v == i + 1)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.len()];
        for (i, &v) in self.values.iter().enumerate() {
            inv[v - 1] = i + 1;
        }
        FinitePermutation { values: inv }
    }

    /// Swaps the values at 0-based positions `i` and `i + 1`.
    pub fn swap_adjacent(&self, i: usize) -> Self {
        let mut values = self.values.clone();
        values.swap(i, i + 1);
        FinitePermutation { values }
    }
}

/// Number of pairs `i < j` with `w(i) > w(j)`, by merge-sort counting.
pub fn inversions(w: &FinitePermutation) -> u64 {
    fn sort_count(v: &mut [usize], buf: &mut Vec<usize>) -> u64 {
        let n = v.len();
        if n < 2 {
            return 0;
        }
        let mid = n / 2;
        let mut count = sort_count(&mut v[..mid], buf) + sort_count(&mut v[mid..], buf);
        buf.clear();
        let (mut i, mut j) = (0, mid);
        while i < mid && j < n {
            if v[i] <= v[j] {
                buf.push(v[i]);
                i += 1;
            } else {
                count += (mid - i) as u64;
                buf.push(v[j]);
                j += 1;
            }
        }
        buf.extend_from_slice(&v[i..mid]);
        buf.extend_from_slice(&v[j..n]);
        v.copy_from_slice(buf);
        count
    }
    let mut v = w.values.clone();
    sort_count(&mut v, &mut Vec::with_capacity(w.len()))
}

/// `q^{inv(w)} * prod_{j=1}^n (1-q)/(1-q^j)`.
pub fn mallows_pmf_finite(w: &FinitePermutation, q: QParam) -> f64 {
    let inv = inversions(w);
    if q.is_zero() {
        return if inv == 0 { 1.0 } else { 0.0 };
    }
    let norm: f64 = (1..=w.len()).map(|j| (1.0 - q.value()) / (1.0 - q.pow(j as u64))).product();
    q.pow(inv) * norm
}

pub fn mallows_pmf_finite_in<T: QScalar>(w: &FinitePermutation, q: &T) -> T {
    let one = T::one();
    let mut norm = T::one();
    for j in 1..=w.len() {
        norm = norm * ((one.clone() - q.clone()) / (one.clone() - pow_in(q, j as u64)));
    }
    pow_in(q, inversions(w)) * norm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(v: f64) -> QParam {
        QParam::new(v).unwrap()
    }

    #[test]
    fn qparam_rejects_out_of_range() {
        assert!(QParam::new(1.0).is_err());
        assert!(QParam::new(-0.1).is_err());
        assert!(QParam::new(f64::NAN).is_err());
        assert!(QParam::new(0.0).is_ok());
    }

    #[test]
    fn pochhammer_values() {
        assert_eq!(q_pochhammer(q(0.7), 0), 1.0);
        assert!((q_pochhammer(q(0.5), 2) - 0.375).abs() < 1e-15);
        assert_eq!(q_pochhammer(q(0.0), 5), 1.0);
    }

    #[test]
    fn q_binomial_values() {
        assert_eq!(q_binomial(4, 0, q(0.3)).unwrap(), 1.0);
        assert!((q_binomial(4, 2, q(0.5)).unwrap() - 2.1875).abs() < 1e-14);
        assert_eq!(q_binomial(4, 2, q(0.0)).unwrap(), 1.0);
        assert!(q_binomial(2, 3, q(0.5)).is_err());
        assert_eq!(q_binomial_coefficients(4, 2).unwrap(), vec![1, 1, 2, 1, 1]);
        assert!((q_binomial_by_inversions(4, 2, q(0.5)).unwrap() - 2.1875).abs() < 1e-15);
    }

    #[test]
    fn inversion_counts() {
        assert_eq!(inversions(&FinitePermutation::identity(7)), 0);
        assert_eq!(inversions(&FinitePermutation::reversal(4)), 6);
        let w = FinitePermutation::new(vec![2, 4, 1, 3]).unwrap();
        assert_eq!(inversions(&w), 3);
    }

    #[test]
    fn permutation_validation() {
        assert!(FinitePermutation::new(vec![1, 1]).is_err());
        assert!(FinitePermutation::new(vec![0, 1]).is_err());
        assert!(FinitePermutation::new(vec![3, 1]).is_err());
    }

    #[test]
    fn finite_pmf_small_cases() {
        let id = FinitePermutation::identity(2);
        let sw = FinitePermutation::new(vec![2, 1]).unwrap();
        assert!((mallows_pmf_finite(&id, q(0.5)) - 2.0 / 3.0).abs() < 1e-15);
        assert!((mallows_pmf_finite(&sw, q(0.5)) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(mallows_pmf_finite(&id, q(0.0)), 1.0);
        assert_eq!(mallows_pmf_finite(&sw, q(0.0)), 0.0);
    }

    #[test]
    fn power_cache_matches_powi() {
        let cache = PowerCache::new(q(0.9), 16);
        for m in [0u64, 1, 5, 16, 17, 100] {
            assert!((cache.get(m) - 0.9f64.powi(m as i32)).abs() < 1e-14);
        }
    }
}
