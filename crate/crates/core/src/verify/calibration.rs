//! Null and power calibration of the goodness-of-fit machinery.

use rand::distr::{weighted::WeightedIndex, Distribution};
use serde::{Deserialize, Serialize};

use super::report::ExperimentReport;
use super::stats::{chi_square_gof, two_sample_test, EmpiricalPmf, Pmf};
use super::{replicas, DEFAULT_ALPHA};
use crate::error::{Error, Result};
use crate::mallows::height_pmf;
use crate::qcomb::QParam;
use crate::rng::{sub_seed, EngineId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationParams {
    /// Independent datasets per test.
    pub n_runs: usize,
    /// Draws per dataset.
    pub n_draws: usize,
    pub alpha: f64,
    /// Mass moved from the largest to the smallest outcome in the power arm.
    pub shift: f64,
}

impl Default for CalibrationParams {
    fn default() -> Self {
        CalibrationParams { n_runs: 2_000, n_draws: 10_000, alpha: DEFAULT_ALPHA, shift: 0.05 }
    }
}

fn draw_counts<R: rand::Rng + ?Sized>(probs: &[f64], n: usize, rng: &mut R) -> Result<EmpiricalPmf<usize>> {
    let dist = WeightedIndex::new(probs).map_err(|e| Error::domain(format!("bad weights: {e}")))?;
    Ok(EmpiricalPmf::from_samples((0..n).map(|_| dist.sample(rng))))
}

/// Rejection rates of [`chi_square_gof`] and [`two_sample_test`] on data from
/// their own null, and the power of the former against a shifted pmf.
///
/// The null pmf is `f(3, 3)` at `q = 1/2`. A rejection rate passes if it is
/// below `alpha + 3 sd + 1/n_runs` for a Binomial(`n_runs`, `alpha`) count.
pub fn null_calibration(p: &CalibrationParams, seed: u64) -> Result<ExperimentReport> {
    if p.n_runs == 0 || p.n_draws == 0 {
        return Err(Error::domain("n_runs and n_draws must be positive"));
    }
    let q = QParam::new(0.5)?;
    let null = height_pmf(3, 3, q).probs().to_vec();
    let exact = Pmf::from_slice(&null);
    let mut shifted = null.clone();
    let (hi, lo) = (argmax(&shifted), argmin(&shifted));
    let moved = p.shift.min(shifted[hi]);
    shifted[hi] -= moved;
    shifted[lo] += moved;

    let gof_p = replicas(p.n_runs, sub_seed(seed, 1), EngineId::Calibration, |_, rng| {
        Ok(chi_square_gof(&draw_counts(&null, p.n_draws, rng)?, &exact)?.p_value)
    })?;
    let two_p = replicas(p.n_runs, sub_seed(seed, 2), EngineId::Calibration, |_, rng| {
        let a = draw_counts(&null, p.n_draws, rng)?;
        let b = draw_counts(&null, p.n_draws, rng)?;
        Ok(two_sample_test(&a, &b)?.p_value)
    })?;
    let power_runs = (p.n_runs / 20).max(1);
    let power_p = replicas(power_runs, sub_seed(seed, 3), EngineId::Calibration, |_, rng| {
        Ok(chi_square_gof(&draw_counts(&shifted, p.n_draws, rng)?, &exact)?.p_value)
    })?;

    let rate = |ps: &[f64]| ps.iter().filter(|&&v| v < p.alpha).count() as f64 / ps.len() as f64;
    let n = p.n_runs as f64;
    let bound = p.alpha + 3.0 * (p.alpha * (1.0 - p.alpha) / n).sqrt() + 1.0 / n;
    let mut report = ExperimentReport::new("calibrate", seed, p);
    report
        .stat("gof_mean_p", gof_p.iter().sum::<f64>() / n)
        .stat("two_sample_mean_p", two_p.iter().sum::<f64>() / n)
        .stat("power_max_p", power_p.iter().copied().fold(0.0, f64::max));
    report.check_at_most("gof_null_rejection_rate", rate(&gof_p), bound);
    report.check_at_most("two_sample_null_rejection_rate", rate(&two_p), bound);
    report.check_at_least("power_rejection_rate", rate(&power_p), 0.99);
    Ok(report)
}

fn argmax(v: &[f64]) -> usize {
    (0..v.len()).max_by(|&a, &b| v[a].total_cmp(&v[b])).expect("nonempty")
}

fn argmin(v: &[f64]) -> usize {
    (0..v.len()).min_by(|&a, &b| v[a].total_cmp(&v[b])).expect("nonempty")
}
