//! Independent oracles shared by the integration tests. Nothing here calls
//! into the formulas under test.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, VecDeque};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn rpow(q: &BigRational, m: usize) -> BigRational {
    let mut acc = BigRational::one();
    for _ in 0..m {
        acc *= q;
    }
    acc
}

/// Probability of every word in `{alpha, beta}^L` (`true` = alpha) under the
/// sequential rule: alpha with probability `1 - q^{unplaced}`.
pub fn word_law(k: usize, l: usize, q: &BigRational) -> Vec<(Vec<bool>, BigRational)> {
    let mut out = Vec::with_capacity(1 << l);
    for mask in 0u32..(1 << l) {
        let word: Vec<bool> = (0..l).map(|i| mask >> i & 1 == 1).collect();
        let mut left = k;
        let mut p = BigRational::one();
        for &a in &word {
            let qk = rpow(q, left);
            if a {
                if left == 0 {
                    p = BigRational::zero();
                    break;
                }
                p *= BigRational::one() - qk;
                left -= 1;
            } else {
                p *= qk;
            }
        }
        out.push((word, p));
    }
    out
}

/// Law of the alpha count, by brute force over words.
pub fn height_by_words(k: usize, l: usize, q: &BigRational) -> Vec<BigRational> {
    let mut pmf = vec![BigRational::zero(); k.min(l) + 1];
    for (w, p) in word_law(k, l, q) {
        let s = w.iter().filter(|&&a| a).count();
        if s < pmf.len() {
            pmf[s] += p;
        } else {
            assert!(p.is_zero());
        }
    }
    pmf
}

/// Joint law of the cumulative alpha counts at the given prefix lengths.
pub fn joint_by_words(k: usize, ls: &[usize], q: &BigRational) -> BTreeMap<Vec<usize>, BigRational> {
    let l = *ls.last().unwrap();
    let mut out = BTreeMap::new();
    for (w, p) in word_law(k, l, q) {
        if p.is_zero() {
            continue;
        }
        let key: Vec<usize> = ls.iter().map(|&n| w[..n].iter().filter(|&&a| a).count()).collect();
        *out.entry(key).or_insert_with(BigRational::zero) += p;
    }
    out
}

/// Law at time `t` of the multi-species chain on a finite segment: at each
/// bond, a lower color on the left swaps at rate 1 and a higher color on the
/// left swaps at rate `q`. Computed by uniformization over the states
/// reachable from `init`.
pub fn ctmc_law(init: &[u64], q: f64, t: f64) -> BTreeMap<Vec<u64>, f64> {
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut states: Vec<Vec<u64>> = Vec::new();
    let mut queue = VecDeque::new();
    index.insert(init.to_vec(), 0);
    states.push(init.to_vec());
    queue.push_back(0);
    let mut moves: Vec<Vec<(usize, f64)>> = Vec::new();
    while let Some(s) = queue.pop_front() {
        let state = states[s].clone();
        let mut out = Vec::new();
        for i in 0..state.len() - 1 {
            let rate = match state[i].cmp(&state[i + 1]) {
                std::cmp::Ordering::Less => 1.0,
                std::cmp::Ordering::Greater => q,
                std::cmp::Ordering::Equal => 0.0,
            };
            if rate == 0.0 {
                continue;
            }
            let mut next = state.clone();
            next.swap(i, i + 1);
            let j = *index.entry(next.clone()).or_insert_with(|| {
                states.push(next);
                queue.push_back(states.len() - 1);
                states.len() - 1
            });
            out.push((j, rate));
        }
        if moves.len() <= s {
            moves.resize(s + 1, Vec::new());
        }
        moves[s] = out;
    }
    moves.resize(states.len(), Vec::new());
    let exit: Vec<f64> = moves.iter().map(|m| m.iter().map(|x| x.1).sum()).collect();
    let lambda = exit.iter().copied().fold(0.0, f64::max).max(1e-300);
    // v P with P = I + Q / lambda
    let mut v = vec![0.0; states.len()];
    v[0] = 1.0;
    let mut acc = vec![0.0; states.len()];
    let mut weight = (-lambda * t).exp();
    let mut total = 0.0;
    for k in 0..10_000 {
        for (a, x) in acc.iter_mut().zip(&v) {
            *a += weight * x;
        }
        total += weight;
        if 1.0 - total < 1e-15 && k as f64 > lambda * t {
            break;
        }
        let mut next = vec![0.0; states.len()];
        for s in 0..states.len() {
            next[s] += v[s] * (1.0 - exit[s] / lambda);
            for &(j, r) in &moves[s] {
                next[j] += v[s] * r / lambda;
            }
        }
        v = next;
        weight *= lambda * t / (k + 1) as f64;
    }
    states.into_iter().zip(acc).filter(|(_, p)| *p > 0.0).collect()
}

/// Expected TV distance between a law and its empirical version from `n`
/// draws, to leading order.
pub fn expected_tv_noise(law: &BTreeMap<Vec<u64>, f64>, n: f64) -> f64 {
    // E|p_hat - p| ~ sqrt(2 p (1-p) / (pi n)) per cell
    0.5 * law.values().map(|&p| (2.0 * p * (1.0 - p) / (std::f64::consts::PI * n)).sqrt()).sum::<f64>()
}
