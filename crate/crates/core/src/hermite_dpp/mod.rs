//! The discrete Hermite ensemble: a determinantal point process on
//! `{0, 1, 2, ...}` whose kernel is a half-line integral of products of
//! Hermite functions.

mod dpp;
mod fredholm;
mod kernel;
pub mod quadrature;
mod xi;

pub use dpp::{dpp_sample, DppSampler, EIGEN_SLACK};
pub use fredholm::{
    fredholm_qlaplace, fredholm_qlaplace_with, fredholm_size, fredholm_trace_series, point_mass_qlaplace,
    q_laplace_of_pmf, FREDHOLM_TAIL,
};
pub use kernel::{
    closed_form_first_moment, hermite, hermite_functions, hermite_generating_closed, hermite_generating_partial,
    kernel_dh, kernel_diagonal, weighted_trace, KernelMatrix, ENTRY_TOL,
};
pub use xi::{nnls, xi_nodes, xi_pmf, xi_pmf_with_nodes, XiDistribution, RESIDUAL_THRESHOLD};
