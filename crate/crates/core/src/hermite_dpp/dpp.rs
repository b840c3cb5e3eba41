//! Spectral sampler for a finite determinantal point process: keep each
//! eigenvector independently with probability equal to its eigenvalue, then
//! sample the projection DPP spanned by the kept vectors point by point.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::kernel::KernelMatrix;
use crate::error::{Error, Result};

/// Allowed eigenvalue excursion outside `[0, 1]` before clipping.
pub const EIGEN_SLACK: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct DppSampler {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

impl DppSampler {
    pub fn new(kernel: &KernelMatrix) -> Result<Self> {
        let eig = kernel.eigen();
        let mut eigenvalues = Vec::with_capacity(kernel.size());
        for &l in eig.eigenvalues.iter() {
            if !(-EIGEN_SLACK..=1.0 + EIGEN_SLACK).contains(&l) {
                return Err(Error::Numerical(format!("kernel eigenvalue {l} outside [0, 1]")));
            }
            eigenvalues.push(l.clamp(0.0, 1.0));
        }
        Ok(DppSampler { eigenvalues, eigenvectors: eig.eigenvectors })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn size(&self) -> usize {
        self.eigenvectors.nrows()
    }

    /// One configuration, as sorted points of `{0..size-1}`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let n = self.size();
        let mut basis: Vec<DVector<f64>> = self
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|(_, &l)| rng.random::<f64>() < l)
            .map(|(i, _)| self.eigenvectors.column(i).into_owned())
            .collect();
        let mut points = Vec::with_capacity(basis.len());
        while !basis.is_empty() {
            let k = basis.len() as f64;
            // P(i) = sum_j v_j(i)^2 / k
            let mut u = rng.random::<f64>() * k;
            let mut chosen = n - 1;
            for i in 0..n {
                let w: f64 = basis.iter().map(|v| v[i] * v[i]).sum();
                if u < w {
                    chosen = i;
                    break;
                }
                u -= w;
            }
            points.push(chosen);
            // restrict the span to vectors vanishing at `chosen`
            let pivot = (0..basis.len())
                .max_by(|&a, &b| basis[a][chosen].abs().total_cmp(&basis[b][chosen].abs()))
                .expect("nonempty basis");
            let pv = basis.swap_remove(pivot);
            for v in basis.iter_mut() {
                let c = v[chosen] / pv[chosen];
                v.axpy(-c, &pv, 1.0);
            }
            // re-orthonormalize (modified Gram-Schmidt)
            for j in 0..basis.len() {
                for i in 0..j {
                    let proj = basis[i].dot(&basis[j]);
                    let bi = basis[i].clone();
                    basis[j].axpy(-proj, &bi, 1.0);
                }
                let norm = basis[j].norm();
                basis[j] /= norm;
            }
        }
        points.sort_unstable();
        points
    }
}

/// Draws one configuration of the discrete Hermite ensemble truncated to
/// `{0..size-1}`.
pub fn dpp_sample<R: Rng + ?Sized>(r: f64, size: usize, rng: &mut R) -> Result<Vec<usize>> {
    let kernel = KernelMatrix::build(r, size, super::kernel::ENTRY_TOL)?;
    Ok(DppSampler::new(&kernel)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{replica_rng, EngineId};

    #[test]
    fn identity_kernel_gives_everything() {
        let mut rng = replica_rng(1, EngineId::Dpp, 0);
        let pts = dpp_sample(-40.0, 20, &mut rng).unwrap();
        assert_eq!(pts, (0..20).collect::<Vec<_>>());
    }

    #[test]
    fn points_are_distinct() {
        let km = KernelMatrix::build(0.0, 30, 1e-12).unwrap();
        let sampler = DppSampler::new(&km).unwrap();
        let mut rng = replica_rng(2, EngineId::Dpp, 0);
        for _ in 0..200 {
            let pts = sampler.sample(&mut rng);
            assert!(pts.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
