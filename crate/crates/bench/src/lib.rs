//! Shared fixtures for the criterion benches.

use std::f64::consts::PI;

use levyhj_core::spectral::make_grid;
use levyhj_core::{
    GridFunction, GridOperator, Hamiltonian, HamiltonianSpec, LevyOperatorSpec, Profile,
};

/// Fractional Laplacian of order `alpha` on a `2 pi`-periodic grid.
pub fn fractional_operator(d: usize, n: usize, alpha: f64) -> GridOperator {
    let grid = make_grid(d, 2.0 * PI, n).expect("grid");
    let spec = LevyOperatorSpec::fractional_laplacian(d, alpha).expect("spec");
    GridOperator::new(&grid, &spec).expect("operator")
}

/// `|p|^2` on the operator's grid.
pub fn quadratic_hamiltonian(op: &GridOperator) -> Hamiltonian {
    Hamiltonian::new(&HamiltonianSpec::power_gradient(1.0, 2.0, 0.0), op.grid())
        .expect("hamiltonian")
}

pub fn random_field(op: &GridOperator, seed: u64) -> GridFunction {
    Profile::RandomBandlimited {
        seed: Some(seed),
        cutoff: 8,
    }
    .sample(op.grid(), 0.5)
    .expect("field")
}
