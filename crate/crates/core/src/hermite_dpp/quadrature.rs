//! Adaptive Gauss–Kronrod (7, 15) quadrature for scalar and vector-valued
//! integrands.

use crate::error::{Error, Result};

// Kronrod abscissae on [0, 1) in decreasing order; odd indices are also the
// 7-point Gauss abscissae.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

const MAX_DEPTH: u32 = 40;

/// One G7/K15 panel of a vector integrand. `f(t, out)` must overwrite `out`.
/// Returns the Kronrod estimate in `acc` (added) and the max-norm error.
fn panel<F: FnMut(f64, &mut [f64])>(
    f: &mut F,
    a: f64,
    b: f64,
    dim: usize,
    kron: &mut [f64],
    gauss: &mut [f64],
    buf: &mut [f64],
) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    kron.iter_mut().for_each(|v| *v = 0.0);
    gauss.iter_mut().for_each(|v| *v = 0.0);
    for (j, (&x, &wk)) in XGK.iter().zip(&WGK).enumerate() {
        let nodes: &[f64] = if x == 0.0 { &[0.0] } else { &[-1.0, 1.0] };
        for &sign in nodes {
            f(c + sign * h * x, buf);
            for d in 0..dim {
                kron[d] += wk * buf[d];
            }
            if j % 2 == 1 {
                let wg = WG[j / 2];
                for d in 0..dim {
                    gauss[d] += wg * buf[d];
                }
            }
        }
    }
    let mut err = 0.0f64;
    for d in 0..dim {
        kron[d] *= h;
        gauss[d] *= h;
        err = err.max((kron[d] - gauss[d]).abs());
    }
    err
}

/// Integrates a vector-valued function over `[a, b]` to absolute max-norm
/// tolerance `tol`, starting from `initial_panels` equal panels and bisecting
/// any panel whose error exceeds its share of the budget.
pub fn integrate_vec<F: FnMut(f64, &mut [f64])>(
    mut f: F,
    a: f64,
    b: f64,
    dim: usize,
    tol: f64,
    initial_panels: usize,
) -> Result<(Vec<f64>, f64)> {
    let mut total = vec![0.0; dim];
    if b <= a {
        return Ok((total, 0.0));
    }
    let mut kron = vec![0.0; dim];
    let mut gauss = vec![0.0; dim];
    let mut buf = vec![0.0; dim];
    let width = b - a;
    let n0 = initial_panels.max(1);
    let mut stack: Vec<(f64, f64, u32)> =
        (0..n0).rev().map(|i| (a + width * i as f64 / n0 as f64, a + width * (i + 1) as f64 / n0 as f64, 0)).collect();
    let mut achieved = 0.0;
    let mut failed = false;
    while let Some((lo, hi, depth)) = stack.pop() {
        let err = panel(&mut f, lo, hi, dim, &mut kron, &mut gauss, &mut buf);
        let budget = tol * (hi - lo) / width;
        if err <= budget || depth >= MAX_DEPTH {
            if err > budget {
                failed = true;
            }
            achieved += err;
            for d in 0..dim {
                total[d] += kron[d];
            }
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
    if failed {
        return Err(Error::Quadrature { achieved, requested: tol });
    }
    Ok((total, achieved))
}

/// Scalar adaptive Gauss–Kronrod integration; returns `(value, error bound)`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> Result<(f64, f64)> {
    let (v, err) = integrate_vec(|t, out| out[0] = f(t), a, b, 1, tol, 1)?;
    Ok((v[0], err))
}
