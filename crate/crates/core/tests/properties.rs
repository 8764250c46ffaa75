//! Invariants checked on every built-in scenario.

mod common;

use common::*;
use pertorb::systems::SCENARIOS;
use proptest::prelude::*;

fn scenario_index() -> impl Strategy<Value = usize> {
    0..SCENARIOS.len()
}

fn check(r: Check) -> Result<(), TestCaseError> {
    r.map_err(TestCaseError::fail)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 40, ..ProptestConfig::default() })]

    #[test]
    fn flow_composes_and_inverts(
        k in scenario_index(), u in 0.0..1.0f64, dx in -0.05..0.05f64, dy in -0.05..0.05f64,
        t0 in -1.0..1.0f64, s1 in 0.1..2.0f64, s2 in 0.1..2.0f64, eps in 0.0..0.05f64,
    ) {
        let fx = &fixtures()[k];
        check(flow_group(fx, &near_cycle(fx, u, dx, dy), t0, s1, s2, eps))?;
    }

    #[test]
    fn variational_matches_finite_differences(
        k in scenario_index(), u in 0.0..1.0f64, dx in -0.05..0.05f64, dy in -0.05..0.05f64,
        t in 0.2..3.0f64, eps in 0.0..0.05f64,
    ) {
        let fx = &fixtures()[k];
        check(variational_vs_fd(fx, &near_cycle(fx, u, dx, dy), t, eps))?;
    }

    #[test]
    fn perron_pairing_is_constant(
        k in scenario_index(), t in -10.0..10.0f64,
        y0 in prop::array::uniform2(-1.0..1.0f64), z0 in prop::array::uniform2(-1.0..1.0f64),
    ) {
        check(perron_pairing(&fixtures()[k], t, y0, z0))?;
    }

    #[test]
    fn bifurcation_functions_are_periodic_in_theta(k in scenario_index(), theta in 0.0..7.0f64, s_frac in 0.1..1.0f64) {
        check(theta_periodicity(&fixtures()[k], theta, s_frac))?;
    }

    #[test]
    fn malkin_zeros_survive_adjoint_rescaling(k in scenario_index(), c in prop_oneof![-5.0..-0.2f64, 0.2..5.0f64]) {
        check(adjoint_rescaling(&fixtures()[k], c))?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn winding_number_invariances(
        c in prop::array::uniform6(-1.0..1.0f64),
        cx in -0.5..0.5f64, cy in -0.5..0.5f64, r in 0.3..2.0f64, lam in 0.01..100.0f64,
    ) {
        winding_invariances(c, [cx, cy], r, lam).map_err(TestCaseError::fail)?;
    }
}

#[test]
fn every_scenario_is_covered() {
    let f = fixtures();
    assert_eq!(f.len(), SCENARIOS.len());
    for fx in f {
        assert!(fx.frame.periodicity_residual < 1e-6, "{}: {}", fx.sc.name, fx.frame.periodicity_residual);
    }
}
