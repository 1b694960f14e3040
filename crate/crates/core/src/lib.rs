//! Sturm-Liouville operators `-d²/dx² + V` on a finite interval with δ and δ′
//! point interactions.
//!
//! The crate is organised around the shooting engine in [`propagate`]:
//! [`green`] builds diagonal Green functions and the Krein coupling maps on
//! top of it, [`spectra`] locates eigenvalues and decides whether a fixed
//! energy survives every coupling, [`oscillation`] issues sufficient
//! conditions for the measure-zero alternative, and [`random`] samples
//! coupling ensembles for Monte-Carlo checks. [`cli`] drives everything from
//! config files.

// negated comparisons are deliberate: they reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod green;
pub mod model;
pub mod oscillation;
pub mod propagate;
pub mod random;
pub mod spectra;
pub mod tolerances;

pub use error::{Error, Result};
pub use model::{
    potential_bound, validate, BoundaryCondition, CouplingVector, Distribution, EnsembleSpec, InteractionKind,
    InteractionSet, Interval, PotentialSpec, Problem, Site, ValidationReport,
};
pub use propagate::{shoot, ShootDirection, SolutionTrace};
pub use tolerances::Tolerances;

pub use num_complex::Complex64;

/// Library version embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
