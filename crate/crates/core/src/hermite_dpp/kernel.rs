use std::f64::consts::PI;

use libm::erfc;
use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use super::quadrature::{integrate, integrate_vec};
use crate::error::{Error, Result};
use crate::qcomb::QParam;

/// Default absolute accuracy of individual kernel entries.
pub const ENTRY_TOL: f64 = 1e-12;

/// Distance past the oscillatory region `|t| <= sqrt(2n+1)` beyond which the
/// Hermite functions are below `exp(-144/2)`.
const GAUSSIAN_MARGIN: f64 = 12.0;

/// Physicists' Hermite polynomial `H_n(t)` by the three-term recurrence.
pub fn hermite(n: usize, t: f64) -> f64 {
    let (mut prev, mut cur) = (0.0, 1.0);
    for k in 0..n {
        let next = 2.0 * t * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Fills `out[n] = H_n(t) exp(-t^2/2) / sqrt(2^n n! sqrt(pi))` for `n < out.len()`.
///
/// The normalized recurrence keeps every value `O(1)`; the plain `2^n n!`
/// normalization would overflow long before `n = 100`.
pub fn hermite_functions(t: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = PI.powf(-0.25) * (-0.5 * t * t).exp();
    if out.len() > 1 {
        out[1] = std::f64::consts::SQRT_2 * t * out[0];
    }
    for n in 1..out.len().saturating_sub(1) {
        let nf = n as f64;
        out[n + 1] = (2.0 / (nf + 1.0)).sqrt() * t * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
    }
}

fn integration_range(r: f64, max_index: usize) -> (f64, f64) {
    let reach = (2.0 * max_index as f64 + 1.0).sqrt() + GAUSSIAN_MARGIN;
    (r.max(-reach), r.max(reach))
}

/// `K_dH(r)(x, y) = (pi 2^{x+y} x! y!)^{-1/2} int_r^inf H_x H_y e^{-t^2} dt`.
pub fn kernel_dh(r: f64, x: usize, y: usize, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::domain("kernel tolerance must be positive"));
    }
    let (a, b) = if x <= y { (x, y) } else { (y, x) };
    let (lo, hi) = integration_range(r, b);
    let mut buf = vec![0.0; b + 1];
    let (v, _) = integrate(
        |t| {
            hermite_functions(t, &mut buf);
            buf[a] * buf[b]
        },
        lo,
        hi,
        tol,
    )?;
    Ok(v)
}

/// Diagonal `K_dH(r)(n, n)` for `n < size`, each to absolute accuracy `tol`.
pub fn kernel_diagonal(r: f64, size: usize, tol: f64) -> Result<Vec<f64>> {
    if size == 0 {
        return Ok(Vec::new());
    }
    let (lo, hi) = integration_range(r, size - 1);
    let mut buf = vec![0.0; size];
    let panels = ((hi - lo) * 2.0).ceil() as usize;
    let (diag, _) = integrate_vec(
        |t, out| {
            hermite_functions(t, &mut buf);
            for (o, v) in out.iter_mut().zip(&buf) {
                *o = v * v;
            }
        },
        lo,
        hi,
        size,
        tol,
        panels,
    )?;
    Ok(diag)
}

/// Dense discrete Hermite kernel on `{0..size-1}`.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    pub r: f64,
    matrix: DMatrix<f64>,
}

impl KernelMatrix {
    /// Default truncation `max(30, ceil(2 r^2) + 30)`.
    pub fn default_size(r: f64) -> usize {
        30usize.max((2.0 * r * r).ceil() as usize + 30)
    }

    pub fn build(r: f64, size: usize, tol: f64) -> Result<Self> {
        if size == 0 {
            return Err(Error::domain("kernel matrix needs size >= 1"));
        }
        let (lo, hi) = integration_range(r, size - 1);
        // Upper triangle packed row-major; split the range into independent
        // chunks integrated in parallel.
        let dim = size * (size + 1) / 2;
        let chunks = 8usize;
        let span = (hi - lo) / chunks as f64;
        let parts: Vec<Result<Vec<f64>>> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let a = lo + span * c as f64;
                let b = if c + 1 == chunks { hi } else { a + span };
                let mut buf = vec![0.0; size];
                let panels = ((b - a) * 2.0).ceil().max(1.0) as usize;
                integrate_vec(
                    |t, out| {
                        hermite_functions(t, &mut buf);
                        let mut k = 0;
                        for x in 0..size {
                            let bx = buf[x];
                            for &by in &buf[x..] {
                                out[k] = bx * by;
                                k += 1;
                            }
                        }
                    },
                    a,
                    b,
                    dim,
                    tol / chunks as f64,
                    panels,
                )
                .map(|(v, _)| v)
            })
            .collect();
        let mut packed = vec![0.0; dim];
        for part in parts {
            for (p, v) in packed.iter_mut().zip(part?) {
                *p += v;
            }
        }
        let mut matrix = DMatrix::zeros(size, size);
        let mut k = 0;
        for x in 0..size {
            for y in x..size {
                matrix[(x, y)] = packed[k];
                matrix[(y, x)] = packed[k];
                k += 1;
            }
        }
        Ok(KernelMatrix { r, matrix })
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.matrix[(x, y)]
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    pub fn eigen(&self) -> SymmetricEigen<f64, nalgebra::Dyn> {
        SymmetricEigen::new(self.matrix.clone())
    }
}

/// `sum_n q^n K(n, n)`, truncated where the geometric tail `q^N / (1-q)` is
/// below half the tolerance.
pub fn weighted_trace(r: f64, q: QParam, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::domain("tolerance must be positive"));
    }
    let qv = q.value();
    let size = if qv == 0.0 {
        1
    } else {
        let n = ((0.5 * tol * (1.0 - qv)).ln() / qv.ln()).ceil();
        (n.max(1.0)) as usize
    };
    let entry_tol = (0.5 * tol * (1.0 - qv)).min(ENTRY_TOL);
    let diag = kernel_diagonal(r, size, entry_tol)?;
    let mut qn = 1.0;
    let mut sum = 0.0;
    for d in diag {
        sum += qn * d;
        qn *= qv;
    }
    Ok(sum)
}

/// `erfc(r sqrt((1-q)/(1+q))) / (2(1-q))`: the closed form of the first
/// q-moment `E sum_p q^p` of the discrete Hermite ensemble.
pub fn closed_form_first_moment(r: f64, q: QParam) -> f64 {
    let qv = q.value();
    erfc(r * ((1.0 - qv) / (1.0 + qv)).sqrt()) / (2.0 * (1.0 - qv))
}

/// Partial sum `sum_{n < terms} z^n H_n(x)^2 / (2^n n!)`.
pub fn hermite_generating_partial(x: f64, z: f64, terms: usize) -> f64 {
    let mut buf = vec![0.0; terms];
    hermite_functions(x, &mut buf);
    // H_n(x)^2 / (2^n n!) = sqrt(pi) e^{x^2} phi_n(x)^2
    let scale = PI.sqrt() * (x * x).exp();
    let mut zn = 1.0;
    let mut sum = 0.0;
    for phi in buf {
        sum += zn * phi * phi;
        zn *= z;
    }
    scale * sum
}

/// `(1 - z^2)^{-1/2} exp((2x^2 z - 2x^2 z^2) / (1 - z^2))`.
pub fn hermite_generating_closed(x: f64, z: f64) -> f64 {
    (1.0 - z * z).powf(-0.5) * (2.0 * x * x * z / (1.0 + z)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(v: f64) -> QParam {
        QParam::new(v).unwrap()
    }

    #[test]
    fn hermite_values() {
        assert_eq!(hermite(0, 3.3), 1.0);
        assert_eq!(hermite(2, 1.0), 2.0);
        assert_eq!(hermite(3, 2.0), 40.0);
    }

    #[test]
    fn hermite_functions_match_polynomials() {
        let mut buf = vec![0.0; 12];
        let t = 0.7;
        hermite_functions(t, &mut buf);
        let mut fact = 1.0;
        for (n, &phi) in buf.iter().enumerate() {
            if n > 0 {
                fact *= n as f64;
            }
            let direct = hermite(n, t) * (-t * t / 2.0).exp() / (2f64.powi(n as i32) * fact * PI.sqrt()).sqrt();
            assert!((phi - direct).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn kernel_entry_examples() {
        assert!((kernel_dh(0.0, 0, 0, 1e-13).unwrap() - 0.5).abs() < 1e-12);
        for (x, y) in [(0, 0), (3, 3), (2, 5)] {
            let v = kernel_dh(-40.0, x, y, 1e-12).unwrap();
            let expect = if x == y { 1.0 } else { 0.0 };
            assert!((v - expect).abs() < 1e-10, "({x},{y}) -> {v}");
        }
        assert_eq!(kernel_dh(0.3, 2, 7, 1e-12).unwrap(), kernel_dh(0.3, 7, 2, 1e-12).unwrap());
        assert!(kernel_dh(0.0, 0, 0, 0.0).is_err());
    }

    #[test]
    fn matrix_agrees_with_entries() {
        let km = KernelMatrix::build(0.4, 12, ENTRY_TOL).unwrap();
        for (x, y) in [(0, 0), (1, 4), (11, 11), (5, 9)] {
            let e = kernel_dh(0.4, x, y, 1e-13).unwrap();
            assert!((km.get(x, y) - e).abs() < 1e-11);
        }
    }

    #[test]
    fn closed_form_values() {
        assert!((closed_form_first_moment(0.0, q(0.5)) - 1.0).abs() < 1e-15);
        let v = closed_form_first_moment(1.0, q(0.0));
        assert!((v - 0.078_649_603_525_142_57).abs() < 1e-12, "{v:e}");
        assert!((closed_form_first_moment(-40.0, q(0.3)) - 1.0 / 0.7).abs() < 1e-15);
    }

    #[test]
    fn weighted_trace_simple_values() {
        assert!((weighted_trace(-40.0, q(0.5), 1e-10).unwrap() - 2.0).abs() < 1e-8);
        assert!((weighted_trace(0.0, q(0.5), 1e-10).unwrap() - 1.0).abs() < 1e-8);
    }
}
