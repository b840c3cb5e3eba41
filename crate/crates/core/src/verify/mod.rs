//! Statistical harness: empirical laws, goodness-of-fit tests and one
//! experiment per identity or limit theorem of the model.
//!
//! Every experiment is a pure function of its parameters and a master seed.
//! Replica `i` of arm `a` draws from `replica_rng(sub_seed(seed, a), engine, i)`
//! and results are collected in replica order, so thread scheduling never
//! changes a report.

mod asymptotic;
mod calibration;
mod coupling;
mod report;
mod stats;

use rayon::prelude::*;

pub use asymptotic::{
    diffusive_experiment, kpz_coupling_experiment, kpz_lln_experiment, kpz_sizes, lln_ratio_limit,
    single_particle_experiment, DiffusiveParams, KpzCouplingParams, KpzLlnParams, SingleParticleParams, MAX_KPZ_SIZE,
};
pub use calibration::{null_calibration, CalibrationParams};
pub use coupling::{
    verify_color_preservation, verify_many_point, verify_one_point, ColorParams, ManyPointParams, OnePointParams,
};
pub use report::{join_key, Check, Comparison, ExperimentReport};
pub use stats::{
    chi_square_gof, contingency_test, mean_var, median, quantile, tv_distance, two_sample_test, welch_z,
    wilson_interval, EmpiricalPmf, Pmf, TestResult, MIN_EXPECTED,
};

use crate::asep::{simulate_single, step_init, ParticleConfig, TruncationBound, Window};
use crate::error::{Error, Result};
use crate::mallows::mallows_subset_step;
use crate::qcomb::QParam;
use crate::rng::{replica_rng, EngineId, ReplicaRng};

/// Light-cone tolerance used when no other is given.
pub const DEFAULT_TOL: f64 = 1e-9;
/// Significance level of all hypothesis tests unless overridden.
pub const DEFAULT_ALPHA: f64 = 1e-3;

/// Runs `n` replicas in parallel and returns their results in replica order.
pub fn replicas<T, F>(n: usize, seed: u64, engine: EngineId, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &mut ReplicaRng) -> Result<T> + Sync,
{
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = replica_rng(seed, engine, i as u64);
            f(i, &mut rng)
        })
        .collect()
}

/// Window for step initial data watched on `[x_min, inf)` up to time `t`.
pub fn step_window(t: f64, x_min: f64, q: QParam, tol: f64) -> Result<Window> {
    step_window_scaled(t, x_min, q, tol, 1)
}

fn step_window_scaled(t: f64, x_min: f64, q: QParam, tol: f64, scale: i64) -> Result<Window> {
    let reach = TruncationBound::new(t, q, tol)?.reach;
    let lo = (x_min.floor() as i64 - scale * reach).min(-1);
    Window::new(lo, reach + 1)
}

fn run_checked<R: rand::Rng + ?Sized>(cfg: &ParticleConfig, q: QParam, t: f64, rng: &mut R) -> Result<ParticleConfig> {
    let (out, stats) = simulate_single(cfg, q, t, rng)?;
    if stats.boundary_touched {
        let w = cfg.window();
        return Err(Error::WindowTooSmall { lo: w.lo, hi: w.hi });
    }
    Ok(out)
}

/// Heights `h_{t,S}(x)` of step ASEP at each `x`, on the given window.
pub fn step_heights<R: rand::Rng + ?Sized>(
    q: QParam,
    t: f64,
    xs: &[f64],
    window: Window,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let out = run_checked(&step_init(window)?, q, t, rng)?;
    Ok(xs.iter().map(|&x| out.height(x)).collect())
}

/// Heights of ASEP started from a fresh Mallows subset of `K` step sites.
pub fn mallows_heights<R: rand::Rng + ?Sized>(
    k: usize,
    q: QParam,
    t: f64,
    xs: &[f64],
    tol: f64,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let sites = mallows_subset_step(k, q, rng);
    let reach = TruncationBound::new(t, q, tol)?.reach;
    let x_max = xs.iter().copied().fold(0.0, f64::max);
    let lo = sites.first().copied().unwrap_or(0) - reach - 1;
    let hi = (x_max.ceil() as i64).max(0) + reach + 1;
    let cfg = ParticleConfig::new(Window::new(lo, hi)?, sites)?;
    let out = run_checked(&cfg, q, t, rng)?;
    Ok(xs.iter().map(|&x| out.height(x)).collect())
}

/// Compares `h_{t,S}(x)` on the truncation window against a window whose
/// left reach is doubled.
pub fn doubling_test(q: QParam, t: f64, x: f64, tol: f64, n: usize, seed: u64) -> Result<TestResult> {
    let base = step_window(t, x, q, tol)?;
    let wide = step_window_scaled(t, x, q, tol, 2)?;
    let sample = |w: Window, arm: u64| -> Result<EmpiricalPmf<usize>> {
        let hs = replicas(n, crate::rng::sub_seed(seed, arm), EngineId::ParticleClock, |_, rng| {
            Ok(step_heights(q, t, &[x], w, rng)?[0])
        })?;
        Ok(EmpiricalPmf::from_samples(hs))
    };
    two_sample_test(&sample(base, 0xD0)?, &sample(wide, 0xD1)?)
}

/// Folds exact per-`L` laws against an empirical law of `L`.
pub(crate) fn mixture<K: Ord + Clone, F>(weights: &EmpiricalPmf<usize>, law: F) -> Pmf<K>
where
    F: Fn(usize) -> Vec<(K, f64)>,
{
    let n = weights.total() as f64;
    let mut pairs = Vec::new();
    for (&l, &c) in weights.counts() {
        let w = c as f64 / n;
        pairs.extend(law(l).into_iter().map(|(k, p)| (k, w * p)));
    }
    Pmf::from_pairs(pairs)
}
