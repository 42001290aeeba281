mod common;

use common::*;
use seqconvex::harness::load_instance;
use seqconvex::harness::instances::DEFAULT_SEED;
use seqconvex::problem::ConvexSet;
use seqconvex::{default_kkt_stop, run_exact, ExactOptions, ProblemInstance, ScpError, TerminationReason};

#[test]
fn dc1d_trace() {
    let (prob, x0) = load_instance("dc1d", DEFAULT_SEED).unwrap();
    assert_eq!(x0, vec![0.5]);
    let trace = run_exact(&prob, &x0, &ExactOptions::default()).unwrap();
    let xs: Vec<f64> = trace.records.iter().map(|r| r.x[0]).collect();
    let fs: Vec<f64> = trace.records.iter().map(|r| r.objective).collect();
    // One step of the shifted quadratic: argmin 2·0.5·(y−0.5) + (y−0.5)² − 2(y−0.5) over [−2, 2].
    let (oracle, _) = grid_min_1d(|y| 2.0 * 0.5 * (y - 0.5) + (y - 0.5).powi(2) - 2.0 * (y - 0.5), -2.0, 2.0, 1e-5);
    assert!((oracle - 1.0).abs() < 1e-5);
    assert_eq!(xs.len(), 2);
    assert_eq!(xs[0], 0.5);
    assert!((xs[1] - 1.0).abs() < 1e-10);
    assert_eq!(fs[0], -0.75);
    assert!((fs[1] + 1.0).abs() < 1e-10);
    assert_eq!(trace.termination, TerminationReason::KktTol);
}

#[test]
fn kkt_start_gives_one_record() {
    let (prob, _) = load_instance("dc1d", DEFAULT_SEED).unwrap();
    let trace = run_exact(&prob, &[1.0], &ExactOptions::default()).unwrap();
    assert_eq!(trace.records.len(), 1);
    assert_eq!(trace.records[0].x, vec![1.0]);
    assert_eq!(trace.termination, TerminationReason::KktTol);
}

#[test]
fn infeasible_start_is_an_input_error() {
    let (prob, _) = load_instance("mba2d", DEFAULT_SEED).unwrap();
    assert!(matches!(run_exact(&prob, &[0.0, 0.0], &ExactOptions::default()), Err(ScpError::Input(_))));
}

/// DCA for min ‖x‖₁ − ½xᵀAx over [−2, 2]² with the same proximal floor `eps`
/// the exact method adds when `L_f = 0`.
fn dca_reference(a: [[f64; 2]; 2], x0: [f64; 2], eps: f64, iters: usize) -> Vec<[f64; 2]> {
    let mut xs = vec![x0];
    let mut x = x0;
    for _ in 0..iters {
        let c = [a[0][0] * x[0] + a[0][1] * x[1], a[1][0] * x[0] + a[1][1] * x[1]];
        let mut next = [0.0; 2];
        for j in 0..2 {
            // argmin |t| − c t + (eps/2)(t − x_j)² over [−2, 2]
            let v = x[j] + c[j] / eps;
            let shrunk = v.signum() * (v.abs() - 1.0 / eps).max(0.0);
            next[j] = shrunk.clamp(-2.0, 2.0);
        }
        xs.push(next);
        if next == x {
            break;
        }
        x = next;
    }
    xs
}

#[test]
fn dc_specialization_matches_dca() {
    let a = [[2.0, 1.0], [1.0, 2.0]];
    let prob = ProblemInstance::new(
        "dca",
        zero(2),
        l1(2, 1.0),
        quad(vec![vec![2.0, 1.0], vec![1.0, 2.0]], vec![0.0, 0.0], 0.0),
        ConvexSet::boxed(vec![-2.0, -2.0], vec![2.0, 2.0]),
    )
    .unwrap();
    let trace = run_exact(&prob, &[0.6, 0.1], &ExactOptions::default()).unwrap();
    let floor = trace.curvature_floor.expect("L_f = 0 triggers the floor");
    let reference = dca_reference(a, [0.6, 0.1], floor, 30);
    assert_eq!(reference[1], [2.0, 0.0]);
    assert_eq!(reference[2], [2.0, 2.0]);
    for (rec, r) in trace.records.iter().zip(&reference) {
        assert!(dist(&rec.x, r) < 1e-10, "k={}: {:?} vs {:?}", rec.k, rec.x, r);
    }
    assert_eq!(trace.final_point().unwrap().len(), 2);
    assert!(dist(trace.final_point().unwrap(), &[2.0, 2.0]) < 1e-10);
}

#[test]
fn bundled_instances_stay_feasible_and_descend() {
    let opts = ExactOptions::default();
    for (name, prob, x0) in bundled() {
        let trace = run_exact(&prob, &x0, &opts).unwrap();
        assert!(trace.records.len() <= opts.max_outer + 1);
        for w in trace.records.windows(2) {
            assert!(prob.is_feasible(&w[1].x, 1e-7).unwrap(), "{name} k={}", w[1].k);
            assert!(w[1].objective <= w[0].objective + 10.0 * opts.tol_inner, "{name} k={}", w[1].k);
            // Sandwich: F(x^{k+1}) ≤ model(x^{k+1}) ≤ F(x^k).
            let model = w[0].model_value.unwrap();
            assert!(w[1].objective <= model + 10.0 * opts.tol_inner, "{name} k={}", w[1].k);
            assert!(model <= w[0].objective + 10.0 * opts.tol_inner, "{name} k={}", w[1].k);
        }
        assert!(trace.records.iter().all(|r| r.objective.is_finite()));
        if trace.termination == TerminationReason::StepTol {
            let last = trace.last().unwrap();
            let res = last.stationarity.max(last.feasibility.max(0.0)).max(last.complementarity);
            assert!(res <= 10.0 * opts.kkt_tol, "{name}: {res}");
        }
        let expect = prob.lipschitz_f().max(seqconvex::exact::CURVATURE_FLOOR);
        assert!(trace.records.iter().all(|r| r.l_f == expect && r.l_g == prob.lipschitz_g()));
    }
}

#[test]
fn mba2d_reaches_the_nearest_point() {
    let (prob, x0) = load_instance("mba2d", DEFAULT_SEED).unwrap();
    let trace = run_exact(&prob, &x0, &ExactOptions::default()).unwrap();
    assert!(dist(trace.final_point().unwrap(), &[1.0, 0.0]) < 1e-4);
}

#[test]
fn kkt_stop_examples() {
    let (prob, _) = load_instance("dc1d", DEFAULT_SEED).unwrap();
    let trace = run_exact(&prob, &[1.0], &ExactOptions::default()).unwrap();
    let mut rec = trace.records[0].clone();
    rec.stationarity = 0.0;
    rec.feasibility = 0.0;
    rec.complementarity = 0.0;
    assert!(default_kkt_stop(&rec, 1e-8));
    rec.stationarity = 2e-8;
    assert!(!default_kkt_stop(&rec, 1e-8));
    rec.stationarity = 0.0;
    rec.feasibility = -5.0;
    assert!(default_kkt_stop(&rec, 1e-8));
}

#[test]
fn max_outer_caps_the_trace() {
    let (prob, x0) = load_instance("sparse_ls_scad", DEFAULT_SEED).unwrap();
    let opts = ExactOptions { max_outer: 3, ..Default::default() };
    let trace = run_exact(&prob, &x0, &opts).unwrap();
    assert_eq!(trace.records.len(), 4);
    assert_eq!(trace.termination, TerminationReason::MaxOuter);
}
