mod common;

use common::*;
use proptest::prelude::*;
use seqconvex::harness::instances::DEFAULT_SEED;
use seqconvex::harness::{bundled_instances, load_instance};
use seqconvex::kkt::DEFAULT_TOL_ACTIVE;
use seqconvex::problem::ConvexSet;
use seqconvex::{
    active_set, brute_force_minimize, kkt_residual, run_exact, ExactOptions, ProblemInstance, ScpError,
    TerminationReason,
};

fn ball_quadratic() -> ProblemInstance {
    // min ‖x − (3, 0)‖² s.t. ‖x‖² ≤ 1
    ProblemInstance::new("ballq", quad(diag(&[2.0, 2.0]), vec![-6.0, 0.0], 9.0), zero(2), zero(2), ConvexSet::free(2))
        .unwrap()
        .with_constraint(quad(diag(&[2.0, 2.0]), vec![0.0, 0.0], -1.0), zero(2), zero(2))
        .unwrap()
}

#[test]
fn smooth_minimizer_has_zero_residual() {
    let prob = ProblemInstance::new("q", quad(diag(&[2.0, 2.0]), vec![-2.0, 4.0], 5.0), zero(2), zero(2), ConvexSet::free(2))
        .unwrap();
    let r = kkt_residual(&prob, &[1.0, -2.0], &[], DEFAULT_TOL_ACTIVE).unwrap();
    assert_eq!(r.stationarity, 0.0);
    assert_eq!(r.feasibility, f64::NEG_INFINITY);
    assert_eq!(r.complementarity, 0.0);
    assert!(r.active.is_empty());
}

#[test]
fn dc_point_is_stationary_and_locally_minimal() {
    let (prob, _) = load_instance("dc1d", DEFAULT_SEED).unwrap();
    let r = kkt_residual(&prob, &[1.0], &[], DEFAULT_TOL_ACTIVE).unwrap();
    assert_eq!(r.stationarity, 0.0);
    let (t, v) = grid_min_1d(|x| x * x - 2.0 * x.abs(), 0.5, 1.5, 1e-5);
    assert!((t - 1.0).abs() < 1e-5 && (v + 1.0).abs() < 1e-9);
}

#[test]
fn ball_quadratic_analytic_multiplier() {
    // Stationarity 2(x − c) + 2λx = 0 at x = (1, 0) gives λ = 2.
    let prob = ball_quadratic();
    let r = kkt_residual(&prob, &[1.0, 0.0], &[2.0], DEFAULT_TOL_ACTIVE).unwrap();
    assert!(r.stationarity <= 1e-10);
    assert!(r.feasibility <= 1e-10);
    assert!(r.complementarity <= 1e-10);
    assert_eq!(r.active, vec![0]);
    // A wrong multiplier leaves a residual.
    let r = kkt_residual(&prob, &[1.0, 0.0], &[1.0], DEFAULT_TOL_ACTIVE).unwrap();
    assert!((r.stationarity - 2.0).abs() < 1e-12);
}

#[test]
fn negative_or_misshaped_multipliers_rejected() {
    let prob = ball_quadratic();
    assert!(matches!(kkt_residual(&prob, &[1.0, 0.0], &[-1.0], 1e-7), Err(ScpError::Input(_))));
    assert!(matches!(kkt_residual(&prob, &[1.0, 0.0], &[1.0, 1.0], 1e-7), Err(ScpError::Input(_))));
}

#[test]
fn brute_force_examples() {
    let sq = ProblemInstance::new("sq", quad(vec![vec![2.0]], vec![0.0], 0.0), zero(1), zero(1), ConvexSet::free(1)).unwrap();
    let (x, v) = brute_force_minimize(&sq, &[-1.0], &[1.0], 0.5).unwrap().unwrap();
    assert_eq!((x, v), (vec![0.0], 0.0));

    let (dc, _) = load_instance("dc1d", DEFAULT_SEED).unwrap();
    let (x, v) = brute_force_minimize(&dc, &[-2.0], &[2.0], 1e-4).unwrap().unwrap();
    assert!((v + 1.0).abs() < 1e-12);
    assert!((x[0].abs() - 1.0).abs() < 1e-9);

    let infeasible = ProblemInstance::new("inf", zero(1), zero(1), zero(1), ConvexSet::free(1))
        .unwrap()
        .with_constraint(quad(vec![vec![0.0]], vec![1.0], 5.0), zero(1), zero(1))
        .unwrap();
    assert!(brute_force_minimize(&infeasible, &[0.0], &[1.0], 0.01).unwrap().is_none());
}

#[test]
fn brute_force_rejects_bad_grids() {
    let (dc, _) = load_instance("dc1d", DEFAULT_SEED).unwrap();
    assert!(brute_force_minimize(&dc, &[-2.0], &[2.0], 0.0).is_err());
    assert!(brute_force_minimize(&dc, &[-2.0], &[f64::INFINITY], 0.1).is_err());
    let (big, _) = load_instance("sparse_ls_l1", DEFAULT_SEED).unwrap();
    assert!(brute_force_minimize(&big, &[0.0; 20], &[1.0; 20], 0.5).is_err());
}

#[test]
fn active_set_examples() {
    let prob = ball_quadratic();
    assert!(active_set(&prob, &[0.2, 0.1], 1e-7).unwrap().is_empty());
    assert_eq!(active_set(&prob, &[0.0, 1.0], 1e-7).unwrap(), vec![0]);
    assert_eq!(active_set(&prob, &[0.2, 0.1], f64::INFINITY).unwrap(), vec![0]);
}

#[test]
fn exact_fixed_points_certify() {
    let opts = ExactOptions { kkt_tol: f64::MIN_POSITIVE, step_tol: 0.0, max_outer: 300, ..Default::default() };
    let mut fixed = 0;
    for (name, prob, x0) in bundled() {
        let trace = run_exact(&prob, &x0, &opts).unwrap();
        if trace.termination != TerminationReason::StepTol {
            continue;
        }
        fixed += 1;
        let last = trace.last().unwrap();
        let r = kkt_residual(&prob, &last.x, &last.multipliers, DEFAULT_TOL_ACTIVE).unwrap();
        assert!(r.max_violation() <= 10.0 * opts.tol_inner, "{name}: {r:?}");
    }
    assert!(fixed > 0);
}

#[test]
fn solver_agrees_with_grid_on_small_instances() {
    for entry in bundled_instances() {
        let Some((lo, hi)) = &entry.known.grid_box else { continue };
        let (prob, x0) = load_instance(&entry.name, DEFAULT_SEED).unwrap();
        let trace = run_exact(&prob, &x0, &ExactOptions::default()).unwrap();
        let (_, best) = brute_force_minimize(&prob, lo, hi, 2e-3).unwrap().unwrap();
        let fin = trace.last().unwrap();
        let certified = kkt_residual(&prob, &fin.x, &fin.multipliers, DEFAULT_TOL_ACTIVE)
            .unwrap()
            .max_violation()
            <= 1e-6;
        assert!(fin.objective <= best + 1e-3 || certified, "{}", entry.name);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn residual_components_are_well_formed(idx in 0usize..8, seed in any::<u64>(), scale in 0.0..3.0f64) {
        let all = bundled();
        let (name, prob, x0) = &all[idx % all.len()];
        let mut r = rng(seed);
        let x = sample_in_set(&mut r, &prob.set, x0, 1.0);
        let lam = uniform(&mut r, prob.m(), 0.0, scale);
        let a = kkt_residual(prob, &x, &lam, DEFAULT_TOL_ACTIVE).unwrap();
        let b = kkt_residual(prob, &x, &lam, DEFAULT_TOL_ACTIVE).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.stationarity >= 0.0 && a.complementarity >= 0.0, "{}", name);
        prop_assert!(a.selection < seqconvex::kkt::SELECTION_COMBINATIONS);
        let c = prob.constraint_values(&x).unwrap();
        for (i, ci) in c.iter().enumerate() {
            prop_assert_eq!(a.active.contains(&i), ci.abs() <= DEFAULT_TOL_ACTIVE);
        }
    }
}
