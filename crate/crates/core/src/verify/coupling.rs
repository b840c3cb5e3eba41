//! Exact finite-time identities: the one- and multi-point coupling between
//! Mallows-subset initial data and step initial data, and invariance of the
//! Mallows coloring under the multi-species dynamics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::report::{join_key, ExperimentReport};
use super::stats::{chi_square_gof, contingency_test, tv_distance, two_sample_test, EmpiricalPmf, Pmf};
use super::{doubling_test, mallows_heights, mixture, replicas, step_heights, step_window, DEFAULT_ALPHA, DEFAULT_TOL};
use crate::asep::{mallows_colored_step_init, simulate_multi, TruncationBound, Window};
use crate::error::{Error, Result};
use crate::mallows::{height_pmf, height_pmf_multi, sample_alpha_count, sample_color_word};
use crate::qcomb::QParam;
use crate::rng::{sub_seed, EngineId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OnePointParams {
    pub k: usize,
    pub q: f64,
    pub t: f64,
    pub x: f64,
    pub n_reps: usize,
    pub tol: f64,
    pub tv_threshold: f64,
    pub alpha: f64,
    pub doubling_reps: usize,
}

impl Default for OnePointParams {
    fn default() -> Self {
        OnePointParams {
            k: 2,
            q: 0.5,
            t: 20.0,
            x: 10.0,
            n_reps: 100_000,
            tol: DEFAULT_TOL,
            tv_threshold: 0.01,
            alpha: DEFAULT_ALPHA,
            doubling_reps: 5_000,
        }
    }
}

/// `P(h_{t,Ŝ_K}(x) = s) = sum_L P(h_{t,S}(x) = L) f(K, L)(s)` checked by
/// simulating both sides independently.
pub fn verify_one_point(p: &OnePointParams, seed: u64) -> Result<ExperimentReport> {
    let q = QParam::new(p.q)?;
    if p.n_reps == 0 {
        return Err(Error::domain("n_reps must be positive"));
    }
    let mut report = ExperimentReport::new("one-point", seed, p);
    let doubling = doubling_test(q, p.t, p.x, p.tol, p.doubling_reps, sub_seed(seed, 0))?;
    report.check_at_least("doubling_p_value", doubling.p_value, p.alpha);

    let lhs = replicas(p.n_reps, sub_seed(seed, 1), EngineId::ParticleClock, |_, rng| {
        Ok(mallows_heights(p.k, q, p.t, &[p.x], p.tol, rng)?[0])
    })?;
    let window = step_window(p.t, p.x, q, p.tol)?;
    let ls = replicas(p.n_reps, sub_seed(seed, 2), EngineId::ParticleClock, |_, rng| {
        Ok(step_heights(q, p.t, &[p.x], window, rng)?[0])
    })?;
    let rhs = replicas(p.n_reps, sub_seed(seed, 3), EngineId::ColorWord, |i, rng| {
        Ok(sample_alpha_count(p.k, ls[i], q, rng))
    })?;
    let lhs = EmpiricalPmf::from_samples(lhs);
    let ls = EmpiricalPmf::from_samples(ls);
    let rhs = EmpiricalPmf::from_samples(rhs);
    let mix: Pmf<usize> = mixture(&ls, |l| height_pmf(p.k, l, q).probs().iter().copied().enumerate().collect());

    let tv = tv_distance(&lhs.to_pmf(), &mix);
    let homogeneity = two_sample_test(&lhs, &rhs)?;
    report
        .stat("tv_lhs_rhs", tv)
        .stat("tv_lhs_rhs_sampled", tv_distance(&lhs.to_pmf(), &rhs.to_pmf()))
        .stat("two_sample_statistic", homogeneity.statistic)
        .stat("two_sample_df", homogeneity.df as f64)
        .stat("lhs_mean", lhs.mean())
        .stat("rhs_mean", mix.mean())
        .stat("step_height_mean", ls.mean())
        .stat("window_lo", window.lo as f64);
    report.check_at_most("tv_lhs_rhs", tv, p.tv_threshold);
    report.check_at_least("two_sample_p_value", homogeneity.p_value, p.alpha);
    report.distribution("lhs", &lhs.to_pmf()).distribution("rhs", &mix).distribution("step_height", &ls.to_pmf());
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ManyPointParams {
    pub k: usize,
    pub q: f64,
    pub t: f64,
    /// Nonincreasing observation points.
    pub xs: Vec<f64>,
    pub n_reps: usize,
    pub tol: f64,
    pub tv_threshold: f64,
    pub alpha: f64,
    pub doubling_reps: usize,
}

impl Default for ManyPointParams {
    fn default() -> Self {
        ManyPointParams {
            k: 2,
            q: 0.5,
            t: 10.0,
            xs: vec![6.0, 4.0],
            n_reps: 100_000,
            tol: DEFAULT_TOL,
            tv_threshold: 0.02,
            alpha: DEFAULT_ALPHA,
            doubling_reps: 5_000,
        }
    }
}

/// Joint version of [`verify_one_point`] at `x_1 >= ... >= x_r`.
pub fn verify_many_point(p: &ManyPointParams, seed: u64) -> Result<ExperimentReport> {
    let q = QParam::new(p.q)?;
    if p.xs.is_empty() || p.xs.len() > 3 {
        return Err(Error::domain(format!("need 1 to 3 observation points, got {}", p.xs.len())));
    }
    if p.xs.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::domain(format!("observation points must be nonincreasing, got {:?}", p.xs)));
    }
    if p.n_reps == 0 {
        return Err(Error::domain("n_reps must be positive"));
    }
    let mut report = ExperimentReport::new("many-point", seed, p);
    let x_min = *p.xs.last().expect("nonempty");
    let doubling = doubling_test(q, p.t, x_min, p.tol, p.doubling_reps, sub_seed(seed, 0))?;
    report.check_at_least("doubling_p_value", doubling.p_value, p.alpha);

    let lhs = replicas(p.n_reps, sub_seed(seed, 1), EngineId::ParticleClock, |_, rng| {
        mallows_heights(p.k, q, p.t, &p.xs, p.tol, rng)
    })?;
    let window = step_window(p.t, x_min, q, p.tol)?;
    let ls = replicas(p.n_reps, sub_seed(seed, 2), EngineId::ParticleClock, |_, rng| {
        step_heights(q, p.t, &p.xs, window, rng)
    })?;
    let rhs = replicas(p.n_reps, sub_seed(seed, 3), EngineId::ColorWord, |i, rng| {
        let l_last = *ls[i].last().expect("nonempty");
        Ok(sample_color_word(p.k, l_last, q, rng).prefix_alpha_counts(&ls[i]))
    })?;
    let lhs = EmpiricalPmf::from_samples(lhs);
    let rhs = EmpiricalPmf::from_samples(rhs);
    let mut ls_emp = EmpiricalPmf::new();
    for l in &ls {
        ls_emp.add(l.clone());
    }

    // sum over observed L-vectors of frequency times the product law
    let n = ls_emp.total() as f64;
    let mut pairs = Vec::new();
    for (lv, &c) in ls_emp.counts() {
        let multi = height_pmf_multi(p.k, lv, q)?;
        for (incr, &pr) in &multi.probs {
            let cum: Vec<usize> = incr
                .iter()
                .scan(0, |acc, &d| {
                    *acc += d;
                    Some(*acc)
                })
                .collect();
            pairs.push((cum, pr * c as f64 / n));
        }
    }
    let mix = Pmf::from_pairs(pairs);
    let tv = tv_distance(&lhs.to_pmf(), &mix);
    let homogeneity = two_sample_test(&lhs, &rhs)?;
    report
        .stat("tv_joint", tv)
        .stat("tv_joint_sampled", tv_distance(&lhs.to_pmf(), &rhs.to_pmf()))
        .stat("two_sample_statistic", homogeneity.statistic)
        .stat("two_sample_df", homogeneity.df as f64);
    report.check_at_most("tv_joint", tv, p.tv_threshold);
    report.check_at_least("two_sample_p_value", homogeneity.p_value, p.alpha);
    let key = |v: &Vec<usize>| join_key(v);
    report.distribution("lhs", &lhs.to_pmf().map_keys(key)).distribution("rhs", &mix.map_keys(key));
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ColorParams {
    pub k: usize,
    pub l: usize,
    pub q: f64,
    pub t: f64,
    pub n_reps: usize,
    pub tol: f64,
    pub alpha: f64,
    pub doubling_reps: usize,
}

impl Default for ColorParams {
    fn default() -> Self {
        ColorParams {
            k: 3,
            l: 3,
            q: 0.5,
            t: 2.0,
            n_reps: 100_000,
            tol: DEFAULT_TOL,
            alpha: DEFAULT_ALPHA,
            doubling_reps: 5_000,
        }
    }
}

fn color_window(p: &ColorParams, q: QParam, scale: i64) -> Result<Window> {
    let reach = TruncationBound::new(p.t, q, p.tol)?.reach;
    Window::new(-(p.l as i64) - scale * reach, reach + 1)
}

/// `(count of colors <= K among the top L particles, rightmost site)`.
fn color_count_sample<R: rand::Rng + ?Sized>(
    p: &ColorParams,
    q: QParam,
    window: Window,
    rng: &mut R,
) -> Result<(usize, i64)> {
    let init = mallows_colored_step_init(window, q, rng)?;
    let (out, stats) = simulate_multi(&init, q, p.t, rng)?;
    if stats.boundary_touched {
        return Err(Error::WindowTooSmall { lo: window.lo, hi: window.hi });
    }
    let mut top = out.particles_right_to_left().take(p.l);
    let (rightmost, first) = top.next().ok_or_else(|| Error::WindowTooSmall { lo: window.lo, hi: window.hi })?;
    let mut count = usize::from(first.0 <= p.k as u64);
    let mut seen = 1;
    for (_, c) in top {
        count += usize::from(c.0 <= p.k as u64);
        seen += 1;
    }
    if seen < p.l {
        return Err(Error::WindowTooSmall { lo: window.lo, hi: window.hi });
    }
    Ok((count, rightmost))
}

/// Colors carried by the top `L` particles of the multi-species process are
/// again Mallows distributed, independently of the uncolored configuration.
pub fn verify_color_preservation(p: &ColorParams, seed: u64) -> Result<ExperimentReport> {
    let q = QParam::new(p.q)?;
    if p.n_reps == 0 || p.l == 0 {
        return Err(Error::domain("n_reps and L must be positive"));
    }
    let mut report = ExperimentReport::new("coloring", seed, p);
    let window = color_window(p, q, 2)?;
    let wide = color_window(p, q, 4)?;
    let pilot = |w: Window, arm: u64| -> Result<EmpiricalPmf<usize>> {
        let v = replicas(p.doubling_reps, sub_seed(seed, arm), EngineId::Harris, |_, rng| {
            Ok(color_count_sample(p, q, w, rng)?.0)
        })?;
        Ok(EmpiricalPmf::from_samples(v))
    };
    if p.doubling_reps > 0 {
        let d = two_sample_test(&pilot(window, 0xD0)?, &pilot(wide, 0xD1)?)?;
        report.check_at_least("doubling_p_value", d.p_value, p.alpha);
    }

    let samples =
        replicas(p.n_reps, sub_seed(seed, 1), EngineId::Harris, |_, rng| color_count_sample(p, q, window, rng))?;
    let counts = EmpiricalPmf::from_samples(samples.iter().map(|s| s.0));
    let exact = Pmf::from_slice(&height_pmf(p.k, p.l, q).probs());
    let gof = chi_square_gof(&counts, &exact)?;

    // contingency table: count x rightmost site
    let mut cells: BTreeMap<(usize, i64), u64> = BTreeMap::new();
    for &s in &samples {
        *cells.entry(s).or_insert(0) += 1;
    }
    let rows: Vec<usize> = counts.counts().keys().copied().collect();
    let mut cols: Vec<i64> = samples.iter().map(|s| s.1).collect();
    cols.sort_unstable();
    cols.dedup();
    let table: Vec<Vec<u64>> =
        rows.iter().map(|&r| cols.iter().map(|&c| cells.get(&(r, c)).copied().unwrap_or(0)).collect()).collect();
    let indep = contingency_test(&table)?;

    report
        .stat("gof_statistic", gof.statistic)
        .stat("gof_df", gof.df as f64)
        .stat("tv_count_exact", tv_distance(&counts.to_pmf(), &exact))
        .stat("independence_statistic", indep.statistic)
        .stat("independence_df", indep.df as f64)
        .stat("window_lo", window.lo as f64);
    report.check_at_least("gof_p_value", gof.p_value, p.alpha);
    report.check_at_least("independence_p_value", indep.p_value, p.alpha);
    report.distribution("count", &counts.to_pmf()).distribution("exact", &exact);
    Ok(report)
}
