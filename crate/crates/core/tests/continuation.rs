use pertorb::biffun::{BifConfig, ThetaGrid};
use pertorb::continuation::*;
use pertorb::cycles::{periodic_adjoint, CycleConfig};
use pertorb::systems::{greenspan_holmes_margin, make_scenario, Scenario};
use pertorb::{IntegratorConfig, PerturbedSystem};
use serde_json::json;

fn setup(name: &str, params: serde_json::Value) -> (Scenario, pertorb::cycles::Cycle) {
    let sc = make_scenario(name, &params).unwrap();
    let c = sc.reference_cycle(&IntegratorConfig::default()).unwrap();
    (sc, c)
}

fn radii(sol: &PeriodicSolution) -> (f64, f64) {
    let r: Vec<f64> = sol.samples(512).iter().map(|x| x.norm()).collect();
    (r.iter().copied().fold(f64::INFINITY, f64::min), r.iter().copied().fold(0.0, f64::max))
}

#[test]
fn plain_shooting_on_the_ring_from_either_side() {
    let (sc, _) = setup("degenerate_ring", json!({"mu": 0.0, "nu": 0.0}));
    let cfg = IntegratorConfig::default();
    let s = ShootConfig::default();
    // the solutions sit near phase pi/2, i.e. on the positive x-axis
    let inner = shoot(&sc.psys, 1e-3, &[0.95, 0.0], &s, &cfg).unwrap();
    assert!(radii(&inner).1 < 1.0);
    let outer = shoot(&sc.psys, 1e-3, &[1.05, 0.0], &s, &cfg).unwrap();
    assert!(radii(&outer).0 > 1.0);
    for sol in [&inner, &outer] {
        assert!(sol.residual <= s.tol);
        assert!(recheck_residual(&sc.psys, sol, &cfg).unwrap() < 1e-7);
    }
}

#[test]
fn zero_forcing_keeps_solutions_on_the_cycle() {
    let (sc, c) = setup("greenspan_holmes", json!({"delta": 0.02}));
    let cfg = IntegratorConfig::default();
    let psys = PerturbedSystem::zero(sc.system().clone());
    let sw = epsilon_sweep(&psys, &c, 0.7, &[1e-2, 1e-3, 1e-4], &ShootConfig::default(), &cfg).unwrap();
    for e in &sw.entries {
        assert!(e.dist0 < 1e-9, "{}", e.dist0);
    }
}

#[test]
fn duffing_bordered_shot_lands_near_a_malkin_zero() {
    let (sc, c) = setup("duffing", json!({"delta": 0.05}));
    let cfg = IntegratorConfig::default();
    let b = BifConfig::default();
    let fr = periodic_adjoint(sc.system(), &c, &CycleConfig::default(), &cfg).unwrap();
    let zeros = multistart_phases(&sc.psys, &fr, &b).unwrap();
    assert!(!zeros.is_empty());
    for &z in &zeros {
        let sol = bordered_shoot(&sc.psys, 1e-4, &c, z, &ShootConfig::default(), &cfg).unwrap();
        let th = sol.phase.unwrap();
        let d = (th - z).abs().min(c.period - (th - z).abs());
        assert!(d <= 0.05, "phase {th} vs zero {z}");
    }
}

#[test]
fn greenspan_holmes_two_distinct_solutions_from_the_two_zeros() {
    let (sc, c) = setup("greenspan_holmes", json!({"delta": 0.02}));
    let cfg = IntegratorConfig::default();
    let fr = periodic_adjoint(sc.system(), &c, &CycleConfig::default(), &cfg).unwrap();
    let zeros = multistart_phases(&sc.psys, &fr, &BifConfig::default()).unwrap();
    assert_eq!(zeros.len(), 2);
    let search = two_sided_search(&sc.psys, 1e-4, &c, &zeros, &ShootConfig::default(), &cfg).unwrap();
    assert!(search.found_both());
    assert!(search.separation().unwrap() > 10.0 * ShootConfig::default().tol);
}

#[test]
fn ring_sides_are_stable_under_denser_sampling() {
    let (sc, c) = setup("degenerate_ring", json!({"mu": 0.0, "nu": 0.0}));
    let cfg = IntegratorConfig::default();
    let fr = periodic_adjoint(sc.system(), &c, &CycleConfig::default(), &cfg).unwrap();
    let phases = multistart_phases(&sc.psys, &fr, &BifConfig::default()).unwrap();
    let search = two_sided_search(&sc.psys, 1e-3, &c, &phases, &ShootConfig::default(), &cfg).unwrap();
    let curve = cycle_curve(&c, CURVE_SAMPLES).unwrap();
    for (sol, rep) in &search.solutions {
        let dense = classify_side_with(sol, &curve, 2 * SOLUTION_SAMPLES).unwrap();
        assert_eq!(dense.side, rep.side);
    }
    let (inside, outside) = (search.inside().unwrap(), search.outside().unwrap());
    // no crossing: both stay off the unit circle
    assert!(inside.1.margin > 0.0 && outside.1.margin > 0.0);
    let (_, rmax) = radii(&inside.0);
    let (rmin, _) = radii(&outside.0);
    assert!(rmax < 1.0 && rmin > 1.0);
}

#[test]
fn greenspan_holmes_sweep_decreases_and_phases_settle() {
    let (sc, c) = setup("greenspan_holmes", json!({"delta": 0.02}));
    let cfg = IntegratorConfig::default();
    let fr = periodic_adjoint(sc.system(), &c, &CycleConfig::default(), &cfg).unwrap();
    let zeros = multistart_phases(&sc.psys, &fr, &BifConfig::default()).unwrap();
    let eps = [1e-2, 3e-3, 1e-3, 3e-4, 1e-4];
    let sw = epsilon_sweep(&sc.psys, &c, zeros[0], &eps, &ShootConfig::default(), &cfg).unwrap();
    assert!(sw.truncated.is_none());
    assert!(sw.entries.windows(2).all(|w| w[1].dist < w[0].dist));
    let last = sw.entries.last().unwrap();
    let per = c.period;
    let near = zeros.iter().map(|z| {
        let d = (last.phase - z).abs();
        d.min(per - d)
    });
    assert!(near.fold(f64::INFINITY, f64::min) <= 0.05);
    assert!(sw.entries.iter().all(|e| e.phase >= 0.0 && e.phase < per));
    let csv = sw.to_csv();
    assert!(csv.starts_with("eps,dist,phase,side\n"));
    assert_eq!(csv.lines().count(), eps.len() + 1);
    let json = serde_json::to_string(&sw).unwrap();
    let back: SweepRecord = serde_json::from_str(&json).unwrap();
    assert_eq!(back, sw);
}

#[test]
fn sweep_rejects_unsorted_eps() {
    let (sc, c) = setup("greenspan_holmes", json!({"delta": 0.02}));
    let cfg = IntegratorConfig::default();
    assert!(epsilon_sweep(&sc.psys, &c, 0.0, &[1e-3, 1e-2], &ShootConfig::default(), &cfg).is_err());
    assert!(epsilon_sweep(&sc.psys, &c, 0.0, &[], &ShootConfig::default(), &cfg).is_err());
}

#[test]
fn transversal_data_on_the_predator_prey_cycle() {
    let (sc, c) = setup("predator_prey", json!({}));
    let cfg = IntegratorConfig::default();
    let cc = CycleConfig::default();
    let b = BifConfig::default();
    let fr = periodic_adjoint(sc.system(), &c, &cc, &cfg).unwrap();
    let zeros = multistart_phases(&sc.psys, &fr, &b).unwrap();
    let th0 = zeros[0];
    let ch = c.shifted(sc.system(), th0, &cfg).unwrap();
    let fh = periodic_adjoint(sc.system(), &ch, &cc, &cfg).unwrap();
    let basis = transversal_basis(sc.system(), &fh).unwrap();
    assert!(basis.d_tilde_residual <= 1e-6);
    // the scalar D~ is the nontrivial multiplier
    let md = pertorb::cycles::monodromy(sc.system(), &c, &cc, &cfg).unwrap();
    let other = md.multipliers.iter().map(|m| m.re).fold(f64::INFINITY, f64::min);
    assert!((basis.d_tilde[(0, 0)] - other).abs() < 1e-6);
    // zero forcing gives a zero transversal function
    let quiet = PerturbedSystem::zero(sc.system().clone());
    assert_eq!(transversal_melnikov(&quiet, &fh, &basis, 1.0, &b).norm(), 0.0);

    let eps = [1e-2, 1e-3, 1e-4];
    let sw = epsilon_sweep(&sc.psys, &c, th0, &eps, &ShootConfig::default(), &cfg).unwrap();
    let last = sw.entries.last().unwrap();
    let sol = shoot(&sc.psys, last.eps, &last.x0, &ShootConfig::default(), &cfg).unwrap();
    let thetas: Vec<f64> = ThetaGrid::uniform(ch.period, 8).values;
    let samples = direction_test(&sc.psys, &fh, &basis, &sol, &thetas, &b).unwrap();
    for s in &samples {
        assert!(s.rel_error < 0.05, "theta {} rel {}", s.theta, s.rel_error);
        assert!(s.cosines[0].abs() > 0.05);
        assert_eq!(s.observed[0].signum(), s.predicted[0].signum());
    }
}

#[test]
fn limit_identity_vanishes_without_forcing() {
    let (sc, c) = setup("greenspan_holmes", json!({"delta": 0.02}));
    let cfg = IntegratorConfig::default();
    let quiet = PerturbedSystem::zero(sc.system().clone());
    let sol = bordered_shoot(&quiet, 1e-3, &c, 0.0, &ShootConfig::default(), &cfg).unwrap();
    let grid: Vec<f64> = (0..8).map(|j| c.period * j as f64 / 8.0).collect();
    let li = limit_identity_at(&quiet, &c, 0.0, &sol, &grid, &BifConfig::default(), &cfg).unwrap();
    assert!(li.max_residual < 1e-6, "{}", li.max_residual);
}

#[test]
fn predictions_for_the_symmetric_system() {
    let cfg = IntegratorConfig::default();
    let cc = CycleConfig::default();
    let b = BifConfig::default();
    for (delta, expect) in [(1.0 / 40.0, true), (0.1, false)] {
        let (sc, c) = setup("greenspan_holmes", json!({"delta": delta}));
        let fr = periodic_adjoint(sc.system(), &c, &cc, &cfg).unwrap();
        let opts = PredictOptions {
            closed_form_margin: Some(("printed".into(), greenspan_holmes_margin(delta))),
            ..Default::default()
        };
        let rep = predict(&sc.psys, &c, &fr, &opts, &cc, &b, &cfg).unwrap();
        let e = rep.entry("symmetric_two_sided").unwrap();
        assert_eq!(e.verdict, expect, "delta {delta}: {:?}", e.hypotheses);
        assert_eq!(e.conclusion.is_some(), expect);
        let p = e.predicted.as_ref();
        assert_eq!(p.map(|p| p.sides.len()), expect.then_some(2));
        // every reported hypothesis carries a margin or a reason
        assert!(e.hypotheses.iter().all(|h| h.margin.is_some() || h.detail.is_some() || h.passed));
    }
}

#[test]
fn predictions_for_the_degenerate_ring() {
    let cfg = IntegratorConfig::default();
    let cc = CycleConfig::default();
    let b = BifConfig::default();
    let (sc, c) = setup("degenerate_ring", json!({"mu": 1.0, "nu": 0.0}));
    let fr = periodic_adjoint(sc.system(), &c, &cc, &cfg).unwrap();
    let fam = sc.closed.family.clone().unwrap();
    let opts = PredictOptions { family: Some((fam, 1.0)), ..Default::default() };
    let rep = predict(&sc.psys, &c, &fr, &opts, &cc, &b, &cfg).unwrap();
    assert!(!rep.cycle.simple);
    let e = rep.entry("degenerate_two_sided").unwrap();
    assert!(e.verdict, "{:?}", e.hypotheses);
    assert_eq!(e.predicted.as_ref().unwrap().sides, vec![Side::Inside, Side::Outside]);
    assert!(rep.entry("degenerate_periodic_variations").unwrap().verdict);
    // the simple-cycle statements do not apply
    assert!(!rep.entry("malkin_sign_change").unwrap().verdict);
    let json = serde_json::to_value(&rep).unwrap();
    assert!(json["entries"].as_array().unwrap().len() >= 8);
}

#[test]
fn predictions_for_a_simple_cycle() {
    let cfg = IntegratorConfig::default();
    let cc = CycleConfig::default();
    let b = BifConfig::default();
    let (sc, c) = setup("predator_prey", json!({}));
    let fr = periodic_adjoint(sc.system(), &c, &cc, &cfg).unwrap();
    let rep = predict(&sc.psys, &c, &fr, &PredictOptions::default(), &cc, &b, &cfg).unwrap();
    assert!(rep.cycle.simple);
    let sign = rep.entry("malkin_sign_change").unwrap();
    assert!(sign.verdict);
    let mono = rep.entry("malkin_monotone_zero").unwrap();
    assert_eq!(mono.predicted.as_ref().unwrap().phases.len(), 2);
    let sin = rep.entry("sinusoidal_phases").unwrap();
    assert!(sin.verdict);
    let phases = &sin.predicted.as_ref().unwrap().phases;
    let zeros = multistart_phases(&sc.psys, &fr, &b).unwrap();
    for z in zeros {
        assert!(phases.iter().any(|p| (p - z).abs() < 1e-6), "{phases:?} vs {z}");
    }
}

#[test]
fn first_exit_feeds_the_degree_formula() {
    use pertorb::degree::{assemble_degree_1_60, SampledCurve};
    let cfg = IntegratorConfig::default();
    let (sc, c) = setup("predator_prey", json!({}));
    // small disk through x~(0) centred ahead along the tangent: the cycle runs
    // through it and leaves transversally
    let x0 = c.at(0.0);
    let u = c.deriv(sc.system(), 0.0).normalize();
    let r = 0.05;
    let disk = SampledCurve::circle([x0[0] + r * u[0], x0[1] + r * u[1]], r, 4096);
    let fe = first_exit(&c, &disk, 1e-8).unwrap();
    assert_eq!(fe.kind, ExitKind::Crossing);
    let e = boundary_cycle_entry(&sc.psys, &c, &disk, &CycleConfig::default(), &BifConfig::default(), &cfg)
        .unwrap()
        .unwrap();
    assert!(!e.touches_only);
    assert_eq!(e.beta, 0);
    assert!(e.theta_first_exit > 0.0 && e.theta_first_exit < 0.1 * c.period);
    assert_eq!(assemble_degree_1_60(2, 1, &[e.clone()]), 1 - e.degree_1d_malkin);
    // the disk on the other side is left at once: no contribution
    let other = SampledCurve::circle([x0[0] - r * u[0], x0[1] - r * u[1]], r, 4096);
    assert_eq!(first_exit(&c, &other, 1e-8).unwrap().kind, ExitKind::LeavesImmediately);
    assert!(boundary_cycle_entry(&sc.psys, &c, &other, &CycleConfig::default(), &BifConfig::default(), &cfg)
        .unwrap()
        .is_none());
}
