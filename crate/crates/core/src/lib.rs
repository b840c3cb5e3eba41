//! Exact formulas, samplers and verification harness for the asymmetric
//! simple exclusion process (ASEP) started from Mallows-colored initial data.
//!
//! The crate is organized bottom-up:
//!
//! * [`qcomb`]: q-Pochhammer symbols, q-binomials, inversions and the finite
//!   Mallows pmf.
//! * [`mallows`]: Mallows samplers (finite and infinite), color words and the
//!   exact one- and multi-point height pmfs of a Mallows prefix.
//! * [`asep`]: single- and multi-species ASEP on a finite window, with a
//!   bond-clock (Harris) engine and a particle-clock engine.
//! * [`hermite_dpp`]: the discrete Hermite ensemble: kernel, first q-moment,
//!   Fredholm q-Laplace transforms, spectral sampling and pmf recovery.
//! * [`verify`]: goodness-of-fit machinery and the statistical experiments.
//! * [`rng`]: the per-replica seeding contract shared by every experiment.

pub mod asep;
pub mod error;
pub mod hermite_dpp;
pub mod mallows;
pub mod qcomb;
pub mod rng;
pub mod verify;

pub use asep::{Color, ColoredConfig, ParticleConfig, Window};
pub use error::{Error, Result};
pub use mallows::{ColorWord, HeightPmf, Letter, MallowsPrefix};
pub use qcomb::{FinitePermutation, QParam};
pub use verify::{EmpiricalPmf, ExperimentReport, Pmf};

/// Version string embedded in every experiment report.
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");
