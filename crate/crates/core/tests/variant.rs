mod common;

use common::*;
use seqconvex::harness::instances::DEFAULT_SEED;
use seqconvex::harness::load_instance;
use seqconvex::variant::{inner_loop_bound, CurvatureInit, UpdateStrategy};
use seqconvex::{
    bb_estimate, nonmonotone_reference, run_variant, theorem_bound, ProblemInstance, SolverTrace,
    TerminationReason, VariantOptions,
};

fn bound_for(prob: &ProblemInstance, opts: &VariantOptions) -> usize {
    let lg = prob.lipschitz_g().iter().copied().fold(0.0, f64::max);
    let lg = (prob.m() > 0 && lg > 0.0).then_some(lg);
    theorem_bound(prob.lipschitz_f(), opts.c, lg, opts.l_min, opts.tau)
}

fn check_acceptance(trace: &SolverTrace, opts: &VariantOptions) {
    for w in trace.records.windows(2) {
        let v = w[0].variant.as_ref().unwrap();
        let step = w[0].step.unwrap();
        assert_eq!(v.accepted_value, w[1].objective);
        assert!(
            v.accepted_value <= v.reference - 0.5 * opts.c * step * step + opts.accept_slack,
            "k={}",
            w[0].k
        );
    }
}

#[test]
fn bound_example() {
    let direct = ((11f64).ln() + (10f64).ln() - 2.0 * (2f64).ln()) / (2f64).ln() + 4.0;
    assert_eq!(direct.floor(), 8.0);
    assert_eq!(theorem_bound(10.0, 1.0, Some(10.0), 1.0, 2.0), 8);
    // Objective-only form when no constraint curvature enters.
    let direct = (11f64 / 2.0).ln() / (2f64).ln() + 2.0;
    assert_eq!(theorem_bound(10.0, 1.0, None, 1.0, 2.0), direct.floor() as usize);
}

#[test]
fn bb_and_window_examples() {
    assert_eq!(bb_estimate(&[1.0, 0.0], &[2.0, 0.0], 0.1, 100.0), 2.0);
    assert_eq!(bb_estimate(&[1.0, 1.0], &[-1.0, 0.0], 0.1, 100.0), 0.1);
    assert_eq!(bb_estimate(&[1e-3, 0.0], &[1e3, 0.0], 0.1, 100.0), 100.0);
    assert_eq!(bb_estimate(&[0.0, 0.0], &[1.0, 0.0], 0.1, 100.0), 0.1);
    let h = [5.0, 3.0, 4.0];
    assert_eq!(nonmonotone_reference(&h, 2, 2), 5.0);
    assert_eq!(nonmonotone_reference(&h, 2, 0), 4.0);
    assert_eq!(nonmonotone_reference(&h, 2, 7), 5.0);
}

#[test]
fn dc1d_with_threshold_constants_never_rejects() {
    let (prob, x0) = load_instance("dc1d", DEFAULT_SEED).unwrap();
    let c = 1.0;
    let opts = VariantOptions {
        memory: 0,
        c,
        init: CurvatureInit::Constant { l_f: Some((prob.lipschitz_f() + c) / 2.0), l_g: None },
        ..Default::default()
    };
    let trace = run_variant(&prob, &x0, &opts).unwrap();
    assert!(trace.rejections.is_empty());
    assert_eq!(trace.termination, TerminationReason::KktTol);
}

#[test]
fn constrained_instances_with_threshold_constants_never_reject() {
    for name in ["mba2d", "constrained_dc"] {
        let (prob, x0) = load_instance(name, DEFAULT_SEED).unwrap();
        for c in [0.1, 1.0] {
            for tau in [1.5, 2.0, 4.0] {
                let opts = VariantOptions {
                    memory: 0,
                    c,
                    tau,
                    init: CurvatureInit::Constant {
                        l_f: Some((prob.lipschitz_f() + c) / 2.0),
                        l_g: Some(prob.lipschitz_g()),
                    },
                    ..Default::default()
                };
                let trace = run_variant(&prob, &x0, &opts).unwrap();
                assert!(trace.rejections.is_empty(), "{name} c={c} tau={tau}: {:?}", trace.rejections);
            }
        }
    }
}

#[test]
fn bundled_runs_respect_the_invariants() {
    for (name, prob, x0) in bundled() {
        for memory in [0, 5] {
            let opts = VariantOptions { memory, c: 1.0, ..Default::default() };
            let trace = run_variant(&prob, &x0, &opts).unwrap();
            let bound = bound_for(&prob, &opts);
            check_acceptance(&trace, &opts);
            let lf_cap = opts.tau * (prob.lipschitz_f() + opts.c) / 2.0;
            let lg_max = prob.lipschitz_g().iter().copied().fold(0.0, f64::max);
            for r in &trace.records {
                assert!(prob.is_feasible(&r.x, 1e-7).unwrap(), "{name} k={}", r.k);
                let Some(v) = &r.variant else { continue };
                assert!(v.trials <= bound, "{name} k={}: {} > {bound}", r.k, v.trials);
                assert!(v.trials <= inner_loop_bound(&prob, &opts, v.l_f_init, &v.l_g_init));
                assert!(r.l_f >= opts.l_min);
                if r.l_f > v.l_f_init {
                    assert!(r.l_f < lf_cap, "{name} k={}: l_f {}", r.k, r.l_f);
                }
                if r.l_g != v.l_g_init {
                    let min_lg = r.l_g.iter().copied().fold(f64::INFINITY, f64::min);
                    assert!(min_lg < opts.tau * lg_max, "{name} k={}", r.k);
                }
            }
            if memory == 0 {
                for w in trace.records.windows(2) {
                    assert!(w[1].objective <= w[0].objective + opts.accept_slack, "{name} k={}", w[1].k);
                }
            }
            assert_ne!(trace.termination, TerminationReason::MaxOuter, "{name}");
        }
    }
}

#[test]
fn steps_vanish_on_long_runs() {
    // KKT stop disabled: the trace runs to max_outer and must settle.
    for (name, prob, x0) in bundled() {
        for memory in [0, 5] {
            let opts = VariantOptions {
                memory,
                kkt_tol: f64::MIN_POSITIVE,
                step_tol: 0.0,
                max_outer: 150,
                ..Default::default()
            };
            let trace = run_variant(&prob, &x0, &opts).unwrap();
            let steps: Vec<f64> = trace.records.iter().filter_map(|r| r.step).collect();
            if trace.termination == TerminationReason::KktTol {
                // Only an exactly zero residual stops the run early.
                assert_eq!(trace.final_residual(), Some(0.0), "{name}");
                continue;
            }
            assert!(steps.len() >= 10, "{name}");
            let tail = &steps[steps.len() - 10..];
            assert!(tail.iter().all(|s| *s < 1e-5), "{name} M={memory}: {tail:?}");
        }
    }
}

#[test]
fn mba2d_inner_counts_within_bound() {
    let (prob, x0) = load_instance("mba2d", DEFAULT_SEED).unwrap();
    let opts = VariantOptions { tau: 2.0, c: 1.0, ..Default::default() };
    let trace = run_variant(&prob, &x0, &opts).unwrap();
    let bound = bound_for(&prob, &opts);
    assert!(trace.records.iter().filter_map(|r| r.variant.as_ref()).all(|v| v.trials <= bound));
}

#[test]
fn strategies_agree_on_the_ball_instance() {
    let (prob, x0) = load_instance("mba2d", DEFAULT_SEED).unwrap();
    for strategy in [UpdateStrategy::Separate, UpdateStrategy::Simultaneous, UpdateStrategy::PerConstraint] {
        let opts = VariantOptions { strategy, ..Default::default() };
        let trace = run_variant(&prob, &x0, &opts).unwrap();
        assert!(dist(trace.final_point().unwrap(), &[1.0, 0.0]) < 1e-6, "{strategy:?}");
    }
}

#[test]
fn rejection_log_matches_trial_counts() {
    let (prob, x0) = load_instance("constrained_dc", DEFAULT_SEED).unwrap();
    let trace = run_variant(&prob, &x0, &VariantOptions::default()).unwrap();
    for r in &trace.records {
        if let Some(v) = &r.variant {
            let n = trace.rejections.iter().filter(|j| j.k == r.k).count();
            assert_eq!(n + 1, v.trials, "k={}", r.k);
        }
    }
}
