//! Mallows permutations: samplers, color words and exact height pmfs.
//!
//! For a Mallows permutation `w` of the positive integers, the prefix height
//! `f(K, L) = |{i <= L : w(i) <= K}|` has an explicit law ([`height_pmf`]).
//! Its sampling path only needs to know, at each step, how many values
//! `<= K` are still unused, which gives the alpha/beta word procedure of
//! [`sample_color_word`] and the run-length sampler [`sample_alpha_count`].

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcomb::{pow_in, FinitePermutation, QParam, QScalar};

/// Draw from `G(i) = q^{i-1}(1-q)` on `{1, 2, ...}`.
pub fn sample_geometric<R: Rng + ?Sized>(q: QParam, rng: &mut R) -> usize {
    if q.is_zero() {
        return 1;
    }
    let u: f64 = 1.0 - rng.random::<f64>();
    let j = (u.ln() / q.value().ln()).floor();
    1 + if j >= usize::MAX as f64 { usize::MAX - 1 } else { j as usize }
}

/// Draw from `P(i) ∝ q^{i-1}` on `{1..n}`.
pub fn sample_truncated_geometric<R: Rng + ?Sized>(q: QParam, n: usize, rng: &mut R) -> usize {
    debug_assert!(n >= 1);
    if q.is_zero() || n == 1 {
        return 1;
    }
    let u: f64 = rng.random();
    let tail = q.pow(n as u64);
    let x = (1.0 - u * (1.0 - tail)).ln() / q.value().ln();
    (x.ceil() as usize).clamp(1, n)
}

/// Number of failures before the first success when each trial fails with
/// probability `exp(log_fail)`; `log_fail = -inf` means certain success.
fn sample_failures<R: Rng + ?Sized>(log_fail: f64, rng: &mut R) -> u64 {
    if log_fail == f64::NEG_INFINITY {
        return 0;
    }
    let u: f64 = 1.0 - rng.random::<f64>();
    let j = (u.ln() / log_fail).floor();
    if j >= u64::MAX as f64 {
        u64::MAX
    } else {
        j as u64
    }
}

/// Rank-indexable presence set over `{1..capacity}` (Fenwick tree).
#[derive(Debug, Clone)]
pub struct PresenceSet {
    present: Vec<bool>,
    tree: Vec<u32>,
}

impl PresenceSet {
    pub fn full(capacity: usize) -> Self {
        let mut set = PresenceSet { present: Vec::new(), tree: Vec::new() };
        set.rebuild(vec![true; capacity]);
        set
    }

    fn rebuild(&mut self, present: Vec<bool>) {
        let n = present.len();
        let mut tree = vec![0u32; n + 1];
        for i in 1..=n {
            tree[i] += present[i - 1] as u32;
            let parent = i + (i & i.wrapping_neg());
            if parent <= n {
                tree[parent] += tree[i];
            }
        }
        self.present = present;
        self.tree = tree;
    }

    pub fn capacity(&self) -> usize {
        self.present.len()
    }

    pub fn contains(&self, v: usize) -> bool {
        v >= 1 && v <= self.capacity() && self.present[v - 1]
    }

    /// Number of present values.
    pub fn count(&self) -> usize {
        let mut i = self.capacity();
        let mut s = 0usize;
        while i > 0 {
            s += self.tree[i] as usize;
            i &= i - 1;
        }
        s
    }

    /// Extends the universe to `{1..new_capacity}`; new values are present.
    pub fn grow(&mut self, new_capacity: usize) {
        if new_capacity <= self.capacity() {
            return;
        }
        let mut present = std::mem::take(&mut self.present);
        present.resize(new_capacity, true);
        self.rebuild(present);
    }

    /// The `k`-th smallest present value (1-based rank).
    pub fn select(&self, k: usize) -> Option<usize> {
        let n = self.capacity();
        if k == 0 {
            return None;
        }
        let mut pos = 0usize;
        let mut rem = k;
        let mut step = n.checked_next_power_of_two().unwrap_or(0);
        if step > n {
            step >>= 1;
        }
        while step > 0 {
            let next = pos + step;
            if next <= n && (self.tree[next] as usize) < rem {
                pos = next;
                rem -= self.tree[next] as usize;
            }
            step >>= 1;
        }
        (pos < n).then_some(pos + 1)
    }

    pub fn remove(&mut self, v: usize) {
        assert!(self.contains(v), "value {v} not present");
        self.present[v - 1] = false;
        let mut i = v;
        while i <= self.capacity() {
            self.tree[i] -= 1;
            i += i & i.wrapping_neg();
        }
    }
}

/// Samples `w ~ M_n` by drawing positions from the truncated geometric law
/// on the current word and removing the chosen letter.
pub fn sample_finite<R: Rng + ?Sized>(n: usize, q: QParam, rng: &mut R) -> Result<FinitePermutation> {
    if n == 0 {
        return Err(Error::domain("sample_finite requires n >= 1"));
    }
    let mut word = PresenceSet::full(n);
    let mut values = Vec::with_capacity(n);
    for remaining in (1..=n).rev() {
        let pos = sample_truncated_geometric(q, remaining, rng);
        let v = word.select(pos).expect("position within word");
        word.remove(v);
        values.push(v);
    }
    Ok(FinitePermutation::from_values_unchecked(values))
}

/// First `m` values of an infinite Mallows permutation, with the lazily
/// grown word of unused values.
#[derive(Debug, Clone)]
pub struct MallowsPrefix {
    q: QParam,
    values: Vec<usize>,
    word: PresenceSet,
}

impl MallowsPrefix {
    pub fn new(q: QParam) -> Self {
        MallowsPrefix { q, values: Vec::new(), word: PresenceSet::full(64) }
    }

    pub fn q(&self) -> QParam {
        self.q
    }

    pub fn values(&self) -> &[usize] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn word(&self) -> &PresenceSet {
        &self.word
    }

    /// Draws one more value of the permutation.
    pub fn push_next<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        let pos = sample_geometric(self.q, rng);
        let available = self.word.count();
        if pos > available {
            let needed = self.word.capacity() + (pos - available);
            self.word.grow(needed.max(2 * self.word.capacity()));
        }
        let v = self.word.select(pos).expect("word grown to cover position");
        self.word.remove(v);
        self.values.push(v);
        v
    }

    pub fn extend_to<R: Rng + ?Sized>(&mut self, m: usize, rng: &mut R) {
        while self.values.len() < m {
            self.push_next(rng);
        }
    }
}

pub fn sample_infinite_prefix<R: Rng + ?Sized>(m: usize, q: QParam, rng: &mut R) -> MallowsPrefix {
    let mut prefix = MallowsPrefix::new(q);
    prefix.extend_to(m, rng);
    prefix
}

/// Exact law of `f(K, L)`, indexed by `s` in `0..=min(K, L)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightPmf {
    pub k: usize,
    pub l: usize,
    probs: Vec<f64>,
}

impl HeightPmf {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, s: usize) -> f64 {
        self.probs.get(s).copied().unwrap_or(0.0)
    }

    pub fn max_support(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(s, p)| s as f64 * p).sum()
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }
}

/// `ln(1 - q^m)` accurate for `q` close to 1.
#[inline]
fn ln_one_minus_pow(ln_q: f64, m: usize) -> f64 {
    (-(m as f64 * ln_q).exp_m1()).ln()
}

/// Same formula in linear space, which is exact to a few ulps; `None` when
/// an intermediate would leave the normal range.
fn height_pmf_linear(k: usize, l: usize, ln_q: f64) -> Option<Vec<f64>> {
    let one_minus = |m: usize| -(m as f64 * ln_q).exp_m1();
    let top = k.min(l);
    let mut probs = Vec::with_capacity(top + 1);
    let mut factors = 1.0f64;
    for s in 0..=top {
        if s > 0 {
            factors *= one_minus(k - s + 1) * one_minus(l - s + 1) / one_minus(s);
        }
        let exponent = ((k - s) as f64) * ((l - s) as f64) * ln_q;
        if !(factors < 1e300) || exponent < -700.0 {
            return None;
        }
        probs.push(exponent.exp() * factors);
    }
    Some(probs)
}

/// `P(f(K, L) = s) = q^{(K-s)(L-s)} prod_{i<s}(1-q^{K-i})(1-q^{L-i}) / prod_{i<=s}(1-q^i)`,
/// evaluated in log space.
pub fn height_pmf(k: usize, l: usize, q: QParam) -> HeightPmf {
    let top = k.min(l);
    if q.is_zero() {
        let mut probs = vec![0.0; top + 1];
        probs[top] = 1.0;
        return HeightPmf { k, l, probs };
    }
    let ln_q = q.value().ln();
    if let Some(probs) = height_pmf_linear(k, l, ln_q) {
        return HeightPmf { k, l, probs };
    }
    let mut probs = Vec::with_capacity(top + 1);
    let mut log_factors = 0.0;
    for s in 0..=top {
        if s > 0 {
            log_factors +=
                ln_one_minus_pow(ln_q, k - s + 1) + ln_one_minus_pow(ln_q, l - s + 1) - ln_one_minus_pow(ln_q, s);
        }
        let exponent = ((k - s) as f64) * ((l - s) as f64);
        probs.push((exponent * ln_q + log_factors).exp());
    }
    HeightPmf { k, l, probs }
}

/// [`height_pmf`] over an arbitrary field; exact for rational `q`.
pub fn height_pmf_in<T: QScalar>(k: usize, l: usize, q: &T) -> Vec<T> {
    let one = T::one();
    (0..=k.min(l))
        .map(|s| {
            let mut num = pow_in(q, ((k - s) * (l - s)) as u64);
            let mut den = T::one();
            for i in 0..s {
                num = num * (one.clone() - pow_in(q, (k - i) as u64)) * (one.clone() - pow_in(q, (l - i) as u64));
                den = den * (one.clone() - pow_in(q, (i + 1) as u64));
            }
            num / den
        })
        .collect()
}

/// Joint law of the increments `(f(K, L_1), f(K, L_2) - f(K, L_1), ...)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiHeightPmf {
    pub k: usize,
    pub ls: Vec<usize>,
    pub probs: BTreeMap<Vec<usize>, f64>,
}

impl MultiHeightPmf {
    pub fn get(&self, increments: &[usize]) -> f64 {
        self.probs.get(increments).copied().unwrap_or(0.0)
    }
}

fn check_monotone(ls: &[usize]) -> Result<()> {
    if ls.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::domain(format!("prefix lengths must be nondecreasing, got {ls:?}")));
    }
    Ok(())
}

/// Product of one-point factors with decremented `K` and incremental `L`.
pub fn height_pmf_multi(k: usize, ls: &[usize], q: QParam) -> Result<MultiHeightPmf> {
    check_monotone(ls)?;
    let mut probs = BTreeMap::new();
    multi_recurse(k, ls, 0, &mut Vec::with_capacity(ls.len()), 1.0, &mut probs, &|k, l| height_pmf(k, l, q).probs);
    Ok(MultiHeightPmf { k, ls: ls.to_vec(), probs })
}

pub fn height_pmf_multi_in<T: QScalar>(k: usize, ls: &[usize], q: &T) -> Result<BTreeMap<Vec<usize>, T>> {
    check_monotone(ls)?;
    let mut probs = BTreeMap::new();
    multi_recurse(k, ls, 0, &mut Vec::with_capacity(ls.len()), T::one(), &mut probs, &|k, l| height_pmf_in(k, l, q));
    Ok(probs)
}

fn multi_recurse<T: QScalar, F: Fn(usize, usize) -> Vec<T>>(
    k: usize,
    ls: &[usize],
    prev_l: usize,
    prefix: &mut Vec<usize>,
    weight: T,
    out: &mut BTreeMap<Vec<usize>, T>,
    one_point: &F,
) {
    let Some((&l, rest)) = ls.split_first() else {
        out.insert(prefix.clone(), weight);
        return;
    };
    for (s, p) in one_point(k, l - prev_l).into_iter().enumerate() {
        prefix.push(s);
        multi_recurse(k - s, rest, l, prefix, weight.clone() * p, out, one_point);
        prefix.pop();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Letter {
    /// A value `<= K`.
    Alpha,
    /// A value `> K`.
    Beta,
}

/// Word in `{alpha, beta}^L` with the trace of unused low values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColorWord {
    pub k: usize,
    pub letters: Vec<Letter>,
    /// `remaining[i]` is the number of unused values `<= K` after letter `i`.
    pub remaining: Vec<usize>,
}

impl ColorWord {
    pub fn alpha_count(&self) -> usize {
        self.letters.iter().filter(|&&l| l == Letter::Alpha).count()
    }

    /// Alpha counts over the prefixes `letters[..n]` for each `n` in `cuts`.
    pub fn prefix_alpha_counts(&self, cuts: &[usize]) -> Vec<usize> {
        cuts.iter().map(|&n| self.letters[..n].iter().filter(|&&l| l == Letter::Alpha).count()).collect()
    }
}

/// Letter `i` is alpha with probability `1 - q^{K~}`, where `K~` counts the
/// alphas not yet placed.
pub fn sample_color_word<R: Rng + ?Sized>(k: usize, l: usize, q: QParam, rng: &mut R) -> ColorWord {
    let mut remaining_k = k;
    let mut letters = Vec::with_capacity(l);
    let mut remaining = Vec::with_capacity(l);
    for _ in 0..l {
        let p_alpha = 1.0 - q.pow(remaining_k as u64);
        if remaining_k > 0 && rng.random::<f64>() < p_alpha {
            letters.push(Letter::Alpha);
            remaining_k -= 1;
        } else {
            letters.push(Letter::Beta);
        }
        remaining.push(remaining_k);
    }
    ColorWord { k, letters, remaining }
}

/// Alpha count of a color word of length `L`, drawn by skipping the runs of
/// betas (geometric run lengths); costs `O(min(K, L))`.
pub fn sample_alpha_count<R: Rng + ?Sized>(k: usize, l: usize, q: QParam, rng: &mut R) -> usize {
    let ln_q = q.value().ln();
    let mut pos: u64 = 0;
    let mut count = 0;
    for remaining_k in (1..=k).rev() {
        let skip = sample_failures(remaining_k as f64 * ln_q, rng);
        pos = pos.saturating_add(skip).saturating_add(1);
        if pos > l as u64 {
            break;
        }
        count += 1;
        debug_assert!(count <= k);
    }
    count
}

/// The sites of `S` that receive colors `1..=K` under a Mallows coloring.
///
/// `sites` must list a prefix of `S` in strictly decreasing order. The
/// result is returned in increasing order.
pub fn mallows_subset<R: Rng + ?Sized>(sites: &[i64], k: usize, q: QParam, rng: &mut R) -> Result<Vec<i64>> {
    if sites.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::domain("mallows_subset requires strictly decreasing sites"));
    }
    let ln_q = q.value().ln();
    let mut chosen = Vec::with_capacity(k);
    let mut pos: u64 = 0;
    for remaining_k in (1..=k).rev() {
        let skip = sample_failures(remaining_k as f64 * ln_q, rng);
        pos = pos.saturating_add(skip).saturating_add(1);
        if pos > sites.len() as u64 {
            return Err(Error::InsufficientPrefix { needed: remaining_k });
        }
        chosen.push(sites[(pos - 1) as usize]);
    }
    chosen.reverse();
    Ok(chosen)
}

/// [`mallows_subset`] for the step set `{0, -1, -2, ...}`, which never runs
/// out of sites.
pub fn mallows_subset_step<R: Rng + ?Sized>(k: usize, q: QParam, rng: &mut R) -> Vec<i64> {
    let ln_q = q.value().ln();
    let mut chosen = Vec::with_capacity(k);
    let mut pos: i64 = 0;
    for remaining_k in (1..=k).rev() {
        let skip = sample_failures(remaining_k as f64 * ln_q, rng);
        pos = pos.saturating_add(skip.min(i64::MAX as u64 / 2) as i64).saturating_add(1);
        chosen.push(1 - pos);
    }
    chosen.reverse();
    chosen
}
