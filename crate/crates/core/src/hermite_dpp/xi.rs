//! Recovery of the law of `xi_r` from its q-Laplace transform.
//!
//! The transform of a point mass at `L` is `g(z q^L)` with
//! `g(w) = prod_i 1/(1 + w q^i)`, a smoothed step in `ln z`. Matching the
//! Fredholm values at a grid of `z` is therefore a deconvolution problem; it
//! is solved by nonnegative least squares and its conditioning is reported
//! rather than hidden.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::fredholm::{fredholm_qlaplace_with, fredholm_size, point_mass_qlaplace};
use super::kernel::{KernelMatrix, ENTRY_TOL};
use crate::error::{Error, Result};
use crate::qcomb::QParam;

/// RMS misfit above which a recovered pmf is flagged unreliable.
pub const RESIDUAL_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XiDistribution {
    pub r: f64,
    pub q: f64,
    /// `probs[L] = P(xi_r = L)` for `L <= L_max`.
    pub probs: Vec<f64>,
    /// Mass the fit places beyond `L_max`.
    pub residual_mass: f64,
    /// RMS misfit of the transform at the nodes.
    pub rms_misfit: f64,
    /// Ratio of extreme singular values of the design matrix.
    pub condition: f64,
    pub reliable: bool,
    pub nodes: Vec<f64>,
}

impl XiDistribution {
    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn mean_q_power(&self, q: QParam, k: u64) -> f64 {
        self.probs.iter().enumerate().map(|(l, p)| p * q.pow(k * l as u64)).sum()
    }
}

/// Node set: log-spaced in `[1e-3, z_max]`, `4 * (L_max + 1)` points.
pub fn xi_nodes(l_max: usize, z_max: f64) -> Vec<f64> {
    let count = 4 * (l_max + 1);
    let (a, b) = (1e-3f64.ln(), z_max.ln());
    (0..count).map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp()).collect()
}

pub fn xi_pmf(r: f64, q: QParam, l_max: usize) -> Result<XiDistribution> {
    xi_pmf_with_nodes(r, q, l_max, &xi_nodes(l_max, 10.0))
}

pub fn xi_pmf_with_nodes(r: f64, q: QParam, l_max: usize, nodes: &[f64]) -> Result<XiDistribution> {
    if nodes.is_empty() {
        return Err(Error::domain("xi_pmf needs at least one node"));
    }
    if q.is_zero() {
        return Err(Error::domain("xi_pmf needs q > 0: at q = 0 the transform does not see L > 0"));
    }
    let z_max = nodes.iter().copied().fold(0.0, f64::max);
    let size = fredholm_size(r, q, z_max);
    let kernel = KernelMatrix::build(r, size, ENTRY_TOL)?;
    let target: Vec<f64> = nodes.iter().map(|&z| fredholm_qlaplace_with(&kernel, q, z)).collect::<Result<_>>()?;
    // columns 0..=l_max are point masses, the last column is mass at infinity
    let cols = l_max + 2;
    let design =
        DMatrix::from_fn(nodes.len(), cols, |k, l| if l <= l_max { point_mass_qlaplace(l, q, nodes[k]) } else { 1.0 });
    let b = DVector::from_vec(target);
    let x = nnls(&design, &b, 1e-15, 50 * cols)?;
    let misfit = (&design * &x - &b).norm() / (nodes.len() as f64).sqrt();
    let sv = design.clone().svd(false, false).singular_values;
    let (smax, smin) = sv.iter().fold((0.0f64, f64::INFINITY), |(a, b), &s| (a.max(s), b.min(s)));
    Ok(XiDistribution {
        r,
        q: q.value(),
        probs: x.iter().take(l_max + 1).copied().collect(),
        residual_mass: x[l_max + 1],
        rms_misfit: misfit,
        condition: smax / smin,
        reliable: misfit <= RESIDUAL_THRESHOLD,
        nodes: nodes.to_vec(),
    })
}

/// Lawson–Hanson nonnegative least squares: `min |A x - b|` with `x >= 0`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>, tol: f64, max_iter: usize) -> Result<DVector<f64>> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let at = a.transpose();
    let solve_passive = |passive: &[bool]| -> Result<DVector<f64>> {
        let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
        let sub = a.select_columns(idx.iter());
        let sol =
            sub.svd(true, true).solve(b, 1e-15).map_err(|e| Error::Numerical(format!("least squares failed: {e}")))?;
        let mut full = DVector::zeros(n);
        for (k, &j) in idx.iter().enumerate() {
            full[j] = sol[k];
        }
        Ok(full)
    };
    for _ in 0..max_iter {
        let w = &at * (b - a * &x);
        let candidate = (0..n).filter(|&j| !passive[j]).max_by(|&i, &j| w[i].total_cmp(&w[j])).filter(|&j| w[j] > tol);
        let Some(j) = candidate else {
            return Ok(x);
        };
        passive[j] = true;
        let mut first = true;
        loop {
            let s = solve_passive(&passive)?;
            if first && s[j] <= 0.0 {
                // the gradient says j should grow but the solve disagrees:
                // roundoff level reached
                passive[j] = false;
                return Ok(x);
            }
            first = false;
            if (0..n).filter(|&i| passive[i]).all(|i| s[i] > 0.0) {
                x = s;
                break;
            }
            let mut alpha = f64::INFINITY;
            for i in (0..n).filter(|&i| passive[i] && s[i] <= 0.0) {
                alpha = alpha.min(x[i] / (x[i] - s[i]));
            }
            x += (&s - &x) * alpha;
            for i in 0..n {
                if passive[i] && x[i] <= 1e-300 {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    Err(Error::Numerical("nnls did not converge".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nnls_recovers_nonnegative_solution() {
        let a = DMatrix::from_row_slice(4, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 0.0, 2.0, 0.0, 1.0]);
        let truth = DVector::from_vec(vec![0.5, 0.0, 2.0]);
        let b = &a * &truth;
        let x = nnls(&a, &b, 1e-14, 100).unwrap();
        assert!((x - truth).norm() < 1e-10);
    }

    #[test]
    fn nnls_clamps_negative_directions() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let b = DVector::from_vec(vec![-1.0, 3.0]);
        let x = nnls(&a, &b, 1e-14, 100).unwrap();
        assert_eq!(x[0], 0.0);
        assert!((x[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn extreme_r_limits() {
        // a full ensemble is the transform of a point mass at zero
        let xi = xi_pmf(-8.0, QParam::new(0.5).unwrap(), 6).unwrap();
        assert!(xi.probs[0] > 1.0 - 1e-6, "{:?}", xi.probs);
        assert!(xi.total() <= 1.0 + 1e-8);
        // an empty ensemble has transform 1: all mass escapes to infinity
        let xi = xi_pmf(8.0, QParam::new(0.5).unwrap(), 6).unwrap();
        assert!(xi.residual_mass > 1.0 - 1e-6, "{}", xi.residual_mass);
    }
}
