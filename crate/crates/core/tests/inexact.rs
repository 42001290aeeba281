mod common;

use common::*;
use seqconvex::harness::instances::DEFAULT_SEED;
use seqconvex::harness::load_instance;
use seqconvex::inexact::DUAL_GAP_WINDOW;
use seqconvex::problem::ConvexSet;
use seqconvex::{
    dual_gap_monitor, run_exact, run_inexact, EpsSchedule, ExactOptions, InexactOptions, ProblemInstance,
    SubproblemData,
};

fn default_power() -> InexactOptions {
    InexactOptions { schedule: EpsSchedule::Power { eps0: 1e-2, r: 2.0 }, ..Default::default() }
}

#[test]
fn huge_tolerance_gives_a_well_formed_trace() {
    let (prob, x0) = load_instance("mba2d", DEFAULT_SEED).unwrap();
    let opts = InexactOptions {
        schedule: EpsSchedule::Constant { eps0: 1e6 },
        require_summable: false,
        max_outer: 5,
        ..Default::default()
    };
    let trace = run_inexact(&prob, &x0, &opts).unwrap();
    assert!(!trace.records.is_empty() && trace.records.len() <= 6);
    for r in &trace.records {
        if let Some(c) = &r.inexact {
            assert_eq!(c.eps_k, 1e6);
            assert!(c.stationarity <= 1e6 && c.feasibility <= 1e6 && c.complementarity <= 1e6);
        }
        assert!(r.objective.is_finite());
    }
    let csv = trace.to_csv();
    assert_eq!(csv.lines().count(), trace.records.len() + 1);
}

#[test]
fn mba2d_power_schedule_reaches_the_exact_limit() {
    let (prob, x0) = load_instance("mba2d", DEFAULT_SEED).unwrap();
    let exact = run_exact(&prob, &x0, &ExactOptions::default()).unwrap();
    let opts = InexactOptions { kkt_tol: 1e-5, max_outer: 200, ..default_power() };
    let trace = run_inexact(&prob, &x0, &opts).unwrap();
    assert!(trace.outer_iterations() <= 200);
    assert!(trace.final_residual().unwrap() <= 1e-5);
    assert!(dist(trace.final_point().unwrap(), exact.final_point().unwrap()) < 1e-4);
    let last_step = trace.records.iter().filter_map(|r| r.step).last().unwrap();
    assert!(last_step < 1e-4);
    assert!(!dual_gap_monitor(&trace).divergence_warning);
}

#[test]
fn zero_lipschitz_objective_warns_and_floors() {
    let prob = ProblemInstance::new(
        "flat",
        zero(2),
        l1(2, 1.0),
        quad(vec![vec![2.0, 1.0], vec![1.0, 2.0]], vec![0.0, 0.0], 0.0),
        ConvexSet::boxed(vec![-2.0, -2.0], vec![2.0, 2.0]),
    )
    .unwrap();
    let trace = run_inexact(&prob, &[0.6, 0.1], &default_power()).unwrap();
    assert!(trace.curvature_floor.is_some());
    assert!(trace.warnings.iter().any(|w| w.contains("L_f")));
    assert!(trace.records.iter().all(|r| r.l_f == trace.curvature_floor.unwrap()));
}

#[test]
fn infeasible_start_in_x_is_allowed_with_a_warning() {
    let (prob, _) = load_instance("mba2d", DEFAULT_SEED).unwrap();
    let trace = run_inexact(&prob, &[0.0, 0.0], &default_power()).unwrap();
    assert!(trace.warnings.iter().any(|w| w.contains("violates")));
    assert!(dist(trace.final_point().unwrap(), &[1.0, 0.0]) < 1e-4);
}

#[test]
fn dual_gap_examples() {
    let (prob, x0) = load_instance("dc1d", DEFAULT_SEED).unwrap();
    let trace = run_inexact(&prob, &x0, &default_power()).unwrap();
    assert_eq!(dual_gap_monitor(&trace).partial_sum, 0.0);

    // The ball contains the unconstrained minimizer, so the multiplier stays 0.
    let loose = ProblemInstance::new(
        "loose",
        quad(vec![vec![2.0, 0.0], vec![0.0, 2.0]], vec![-1.0, 0.0], 0.25),
        zero(2),
        zero(2),
        ConvexSet::free(2),
    )
    .unwrap()
    .with_constraint(quad(vec![vec![2.0, 0.0], vec![0.0, 2.0]], vec![0.0, 0.0], -4.0), zero(2), zero(2))
    .unwrap();
    let trace = run_inexact(&loose, &[1.0, 1.0], &default_power()).unwrap();
    assert!(trace.records.iter().all(|r| r.multipliers == vec![0.0]));
    assert_eq!(dual_gap_monitor(&trace).partial_sum, 0.0);
    assert!(!dual_gap_monitor(&trace).divergence_warning);
}

#[test]
fn rising_partial_sums_raise_the_warning() {
    let (prob, x0) = load_instance("mba2d", DEFAULT_SEED).unwrap();
    let mut trace = run_inexact(&prob, &x0, &default_power()).unwrap();
    let template = trace.records.iter().find(|r| r.inexact.is_some()).unwrap().clone();
    trace.records.clear();
    for k in 0..=DUAL_GAP_WINDOW + 1 {
        let mut r = template.clone();
        r.k = k;
        r.inexact.as_mut().unwrap().dual_gap_partial = k as f64;
        trace.records.push(r);
    }
    let rep = dual_gap_monitor(&trace);
    assert!(rep.divergence_warning);
    assert_eq!(rep.partial_sum, (DUAL_GAP_WINDOW + 1) as f64);
}

/// Residuals of the moving-balls model written out by hand: the objective
/// and constraint models are quadratics and X is the whole plane.
fn mba_residuals(x: &[f64], y: &[f64], lam: f64, l_f: f64, l_g: f64) -> (f64, f64, f64) {
    let d = [y[0] - x[0], y[1] - x[1]];
    let gf = [2.0 * x[0], 2.0 * x[1]];
    let gg = [2.0 * (x[0] - 2.0), 2.0 * x[1]];
    let g = (x[0] - 2.0).powi(2) + x[1] * x[1] - 1.0;
    let model_g = g + gg[0] * d[0] + gg[1] * d[1] + 0.5 * l_g * (d[0] * d[0] + d[1] * d[1]);
    let w = [
        gf[0] + l_f * d[0] + lam * (gg[0] + l_g * d[0]),
        gf[1] + l_f * d[1] + lam * (gg[1] + l_g * d[1]),
    ];
    (w[0].hypot(w[1]), model_g, (-lam * model_g).max(0.0))
}

#[test]
fn certificates_hold_under_independent_evaluation() {
    let (prob, x0) = load_instance("mba2d", DEFAULT_SEED).unwrap();
    let trace = run_inexact(&prob, &x0, &default_power()).unwrap();
    for w in trace.records.windows(2) {
        let c = w[0].inexact.as_ref().unwrap();
        let (stat, feas, comp) = mba_residuals(&w[0].x, &w[1].x, w[1].multipliers[0], w[0].l_f, w[0].l_g[0]);
        assert!(stat <= c.eps_k + 1e-12, "k={}: {stat} > {}", w[0].k, c.eps_k);
        assert!(feas <= c.eps_k + 1e-12, "k={}", w[0].k);
        assert!(comp <= c.eps_k + 1e-12, "k={}", w[0].k);
    }
}

#[test]
fn certificates_and_slack_on_bundled_instances() {
    for (name, prob, x0) in bundled() {
        let trace = run_inexact(&prob, &x0, &default_power()).unwrap();
        for w in trace.records.windows(2) {
            let c = w[0].inexact.as_ref().unwrap();
            let sub = SubproblemData::linearize(&prob, &w[0].x, w[0].l_f, &w[0].l_g).unwrap();
            let r = sub.residuals(&w[1].x, &w[1].multipliers).unwrap();
            assert!(r.stationarity <= c.eps_k + 1e-12, "{name} k={}: {} > {}", w[0].k, r.stationarity, c.eps_k);
            assert!(r.feasibility <= c.eps_k + 1e-12, "{name} k={}", w[0].k);
            assert!(r.complementarity <= c.eps_k + 1e-12, "{name} k={}", w[0].k);
            let true_max = prob.max_constraint(&w[1].x).unwrap();
            assert!(true_max <= c.eps_k + 1e-12, "{name} k={}: {true_max}", w[0].k);
            assert_eq!(true_max, c.next_max_constraint);
            assert!(w[1].multipliers.iter().all(|l| *l >= 0.0));
        }
    }
}

#[test]
fn squared_steps_plateau() {
    for (name, prob, x0) in bundled() {
        let opts = InexactOptions { kkt_tol: f64::MIN_POSITIVE, step_tol: 0.0, max_outer: 300, ..default_power() };
        let trace = run_inexact(&prob, &x0, &opts).unwrap();
        let sq: Vec<f64> = trace.records.iter().filter_map(|r| r.step).map(|s| s * s).collect();
        if sq.len() < 100 {
            assert_eq!(trace.final_residual(), Some(0.0), "{name}");
            continue;
        }
        let tail: f64 = sq[sq.len() - 100..].iter().sum();
        assert!(tail < 1e-8, "{name}: last-100 increment {tail}");
    }
}
