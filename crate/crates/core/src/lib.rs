//! Mild solutions of viscous Hamilton-Jacobi equations driven by Lévy
//! generators on periodic grids, with the smoothing and Grönwall bounds that
//! control them.

// `!(x > 0.0)` style checks reject NaN on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]
pub mod bounds;
pub mod error;
pub mod fit;
pub mod hamiltonian;
pub mod levy_ops;
pub mod profiles;
pub mod quadrature;
pub mod regularity;
pub mod snapshot;
pub mod solver;
pub mod spectral;

pub use bounds::{SchauderConstants, Scheme};
pub use error::{Error, Result};
pub use hamiltonian::{Hamiltonian, HamiltonianConstants, HamiltonianForm, HamiltonianSpec};
pub use levy_ops::{LevyOperatorSpec, Moment, OperatorKind};
pub use profiles::Profile;
pub use regularity::{Quantity, RateFit};
pub use solver::{Case, MildSolver, PicardReport, SolverConfig, Trajectory};
pub use spectral::{GridFunction, GridOperator, KernelDecayFit, SpectralGrid, Spectrum};
