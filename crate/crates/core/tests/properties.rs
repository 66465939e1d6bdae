//! Cross-module properties exercised through the public API only.

use std::f64::consts::PI;

use levyhj_core::solver::{contraction_horizon, solve_mild};
use levyhj_core::spectral::{gradient, make_grid, pointwise_norm};
use levyhj_core::{
    GridOperator, Hamiltonian, HamiltonianSpec, LevyOperatorSpec, MildSolver, Profile, SolverConfig,
};
use proptest::prelude::*;

fn symmetric_spec() -> impl Strategy<Value = LevyOperatorSpec> {
    prop_oneof![
        (1.05f64..1.99).prop_map(|a| LevyOperatorSpec::fractional_laplacian(1, a).unwrap()),
        (0.1f64..3.0).prop_map(|a| LevyOperatorSpec::diffusion(vec![vec![a]]).unwrap()),
        (1.05f64..1.99, 1.05f64..1.99)
            .prop_map(|(a, b)| LevyOperatorSpec::anisotropic_sum(vec![a, b]).unwrap()),
    ]
}

fn grad_sup(u: &levyhj_core::GridFunction) -> f64 {
    pointwise_norm(&gradient(u).unwrap())
        .into_iter()
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn symmetric_semigroups_contract_in_sup_norm(
        spec in symmetric_spec(), seed in any::<u64>(), cutoff in 1usize..8, t in 1e-3f64..1.0,
    ) {
        let d = spec.dimension;
        let grid = make_grid(d, 2.0 * PI, if d == 1 { 128 } else { 32 }).unwrap();
        let op = GridOperator::new(&grid, &spec).unwrap();
        let phi = Profile::RandomBandlimited { seed: Some(seed), cutoff }.sample(&grid, 1.0).unwrap();
        let out = op.apply_semigroup(&phi, t).unwrap();
        prop_assert!(out.sup_norm() <= phi.sup_norm() + 1e-9);
    }

    #[test]
    fn picard_deltas_decrease_below_the_contraction_horizon(amp in 0.05f64..1.0, alpha in 1.3f64..1.9) {
        let grid = make_grid(1, 2.0 * PI, 64).unwrap();
        let op = GridOperator::new(&grid, &LevyOperatorSpec::fractional_laplacian(1, alpha).unwrap()).unwrap();
        let ham = Hamiltonian::new(&HamiltonianSpec::power_gradient(1.0, 2.0, 0.0), &grid).unwrap();
        let u0 = Profile::Sin.sample(&grid, amp).unwrap();
        // the 1-D fractional kernel has |D p_1|_1 < 1
        let horizon = contraction_horizon(&ham, &u0, 1.0, alpha).unwrap();
        let cfg = SolverConfig::case_one(horizon, 12);
        let (_, report) = solve_mild(&u0, &ham, &op, &cfg).unwrap();
        prop_assert!(report.converged);
        for w in report.deltas.windows(2).skip(1) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-9) || w[1] < 1e-13, "{:?}", report.deltas);
        }
    }
}

#[test]
fn case_two_weighted_gradient_is_stable_under_refinement() {
    let (alpha, delta) = (1.5, 0.6);
    let grid = make_grid(1, 2.0 * PI, 2048).unwrap();
    let op = GridOperator::new(
        &grid,
        &LevyOperatorSpec::fractional_laplacian(1, alpha).unwrap(),
    )
    .unwrap();
    let ham = Hamiltonian::new(&HamiltonianSpec::power_gradient(1.0, 1.3, 0.0), &grid).unwrap();
    let u0 = Profile::HolderCusp { delta }.sample(&grid, 1.0).unwrap();
    let weight = (1.0 - delta) / alpha;
    // below ~h^alpha the grid, not the datum, caps the gradient
    let t_min = 10.0 * grid.spacing().powf(alpha);
    let sup_weighted = |n: usize| {
        let solver = MildSolver::new(&op, &ham, &SolverConfig::case_two(0.05, n, delta)).unwrap();
        let (traj, report) = solver.solve(&u0).unwrap();
        report.check().unwrap();
        traj.times()
            .iter()
            .zip(traj.fields())
            .filter(|(t, _)| **t >= t_min)
            .map(|(t, u)| t.powf(weight) * grad_sup(u))
            .fold(0.0, f64::max)
    };
    let (coarse, fine) = (sup_weighted(24), sup_weighted(48));
    assert!(coarse.is_finite() && fine.is_finite());
    assert!((coarse - fine).abs() <= 0.05 * fine, "{coarse} vs {fine}");
}

#[test]
fn operator_specs_round_trip_through_toml() {
    let specs = [
        LevyOperatorSpec::fractional_laplacian(2, 1.4).unwrap(),
        LevyOperatorSpec::tempered_stable(1.0, 0.5, 1.0, 2.0, 1.3).unwrap(),
        LevyOperatorSpec::sum(vec![
            LevyOperatorSpec::riesz_feller_one_sided(1.2).unwrap(),
            LevyOperatorSpec::laplacian(1).unwrap(),
        ])
        .unwrap(),
    ];
    for spec in specs {
        let text = toml::to_string(&spec).unwrap();
        let back: LevyOperatorSpec = toml::from_str(&text).unwrap();
        assert_eq!(back, spec, "{text}");
    }
}
