use nalgebra::DMatrix;

use super::kernel::{KernelMatrix, ENTRY_TOL};
use crate::error::{Error, Result};
use crate::qcomb::QParam;

/// Largest neglected weight `z q^N` accepted by [`fredholm_qlaplace`].
pub const FREDHOLM_TAIL: f64 = 1e-14;

/// Smallest `N >= KernelMatrix::default_size(r)` with `z q^N <= 1e-14`.
pub fn fredholm_size(r: f64, q: QParam, z: f64) -> usize {
    let base = KernelMatrix::default_size(r);
    let qv = q.value();
    if qv == 0.0 || z <= FREDHOLM_TAIL {
        return base;
    }
    let n = ((FREDHOLM_TAIL / z).ln() / qv.ln()).ceil() as usize;
    base.max(n)
}

fn weights(q: QParam, z: f64, size: usize) -> Vec<f64> {
    let mut g = Vec::with_capacity(size);
    let mut w = z;
    for _ in 0..size {
        g.push(w / (1.0 + w));
        w *= q.value();
    }
    g
}

fn check_args(q: QParam, z: f64, size: usize) -> Result<()> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::domain(format!("fredholm_qlaplace needs z > 0, got {z}")));
    }
    if z * q.pow(size as u64) > FREDHOLM_TAIL {
        return Err(Error::domain(format!(
            "kernel size {size} too small: z q^N = {:e} exceeds {FREDHOLM_TAIL:e}",
            z * q.pow(size as u64)
        )));
    }
    Ok(())
}

/// `E prod_p 1/(1 + z q^p) = det(I - G K)` with `G = diag(z q^x / (1 + z q^x))`.
pub fn fredholm_qlaplace_with(kernel: &KernelMatrix, q: QParam, z: f64) -> Result<f64> {
    let size = kernel.size();
    check_args(q, z, size)?;
    let g = weights(q, z, size);
    let k = kernel.matrix();
    let m = DMatrix::from_fn(size, size, |i, j| if i == j { 1.0 } else { 0.0 } - g[i] * k[(i, j)]);
    let det = m.lu().determinant();
    if !det.is_finite() {
        return Err(Error::Numerical(format!("non-finite Fredholm determinant {det}")));
    }
    Ok(det)
}

/// Builds the kernel on `{0..size-1}` and evaluates the Fredholm
/// determinant.
pub fn fredholm_qlaplace(r: f64, q: QParam, z: f64, size: usize) -> Result<f64> {
    check_args(q, z, size)?;
    let kernel = KernelMatrix::build(r, size, ENTRY_TOL)?;
    fredholm_qlaplace_with(&kernel, q, z)
}

/// Independent evaluation of the same determinant through the trace series
/// `ln det(I - A) = -sum_k tr(A^k) / k`, `A = G^{1/2} K G^{1/2}`.
///
/// Converges because the spectrum of `A` lies in `[0, z/(1+z))`.
pub fn fredholm_trace_series(kernel: &KernelMatrix, q: QParam, z: f64) -> Result<f64> {
    let size = kernel.size();
    check_args(q, z, size)?;
    let s: Vec<f64> = weights(q, z, size).into_iter().map(f64::sqrt).collect();
    let k = kernel.matrix();
    let a = DMatrix::from_fn(size, size, |i, j| s[i] * k[(i, j)] * s[j]);
    let mut power = a.clone();
    let mut log_det = 0.0;
    for order in 1..=20_000usize {
        let term = power.trace() / order as f64;
        log_det -= term;
        if term.abs() < 1e-17 {
            return Ok(log_det.exp());
        }
        power = &power * &a;
    }
    Err(Error::Numerical("trace series did not converge".into()))
}

/// `L_xi(z) = sum_L pmf[L] prod_{i>=0} 1/(1 + z q^{L+i})`.
pub fn q_laplace_of_pmf(pmf: &[f64], q: QParam, z: f64) -> f64 {
    pmf.iter().enumerate().map(|(l, &p)| p * point_mass_qlaplace(l, q, z)).sum()
}

/// `prod_{i>=0} 1/(1 + z q^{L+i})`, stopped once `|z| q^{L+i} < 1e-16`.
pub fn point_mass_qlaplace(l: usize, q: QParam, z: f64) -> f64 {
    let mut w = z * q.pow(l as u64);
    let mut acc = 1.0;
    while w.abs() >= 1e-16 {
        acc /= 1.0 + w;
        w *= q.value();
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(v: f64) -> QParam {
        QParam::new(v).unwrap()
    }

    #[test]
    fn full_configuration_product() {
        let qq = q(0.5);
        // deep in the bulk every site of a 200-site truncation is occupied
        let v = fredholm_qlaplace(-40.0, qq, 1.0, 200).unwrap();
        let expect: f64 = (0..200).map(|p| 1.0 / (1.0 + 0.5f64.powi(p))).product();
        assert!((v - expect).abs() < 1e-10, "{v} vs {expect}");
    }

    #[test]
    fn small_z_limit() {
        let v = fredholm_qlaplace(0.0, q(0.5), 1e-12, 40).unwrap();
        assert!((v - 1.0).abs() < 1e-11);
        assert!(fredholm_qlaplace(0.0, q(0.5), -1.0, 40).is_err());
        assert!(fredholm_qlaplace(0.0, q(0.5), 1.0, 10).is_err());
    }

    #[test]
    fn trace_series_agrees_with_lu() {
        let qq = q(0.5);
        let km = KernelMatrix::build(0.5, fredholm_size(0.5, qq, 3.0), ENTRY_TOL).unwrap();
        let a = fredholm_qlaplace_with(&km, qq, 3.0).unwrap();
        let b = fredholm_trace_series(&km, qq, 3.0).unwrap();
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn q_laplace_of_pmf_examples() {
        let qq = q(0.5);
        assert_eq!(q_laplace_of_pmf(&[0.2, 0.3, 0.5], qq, 0.0), 1.0);
        // point mass at 0: 1 - z/(1-q) + O(z^2)
        let z = 1e-4;
        let v = q_laplace_of_pmf(&[1.0], qq, z);
        assert!((v - (1.0 - z / 0.5)).abs() < 10.0 * z * z);
        // delta_L = (1 + z q^L) delta_{L+1} term by term
        for l in 0..6 {
            let a = point_mass_qlaplace(l, qq, 2.5);
            let b = point_mass_qlaplace(l + 1, qq, 2.5);
            assert!((a * (1.0 + 2.5 * 0.5f64.powi(l as i32)) - b).abs() < 1e-15);
        }
        let q0 = q(0.0);
        assert!((point_mass_qlaplace(0, q0, 1.0) - 0.5).abs() < 1e-16);
        assert_eq!(point_mass_qlaplace(3, q0, 1.0), 1.0);
    }
}
