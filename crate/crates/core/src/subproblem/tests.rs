use std::sync::Arc;

use super::*;
use crate::problem::{ConvexSet, Quadratic, WeightedL1, Zero};

fn linear_with_l1() -> ProblemInstance {
    ProblemInstance::new(
        "soft",
        Arc::new(Quadratic::new(vec![vec![0.0]], vec![3.0], 0.0).unwrap()),
        Arc::new(WeightedL1::new(1, 2.0).unwrap()),
        Arc::new(Zero { dim: 1 }),
        ConvexSet::free(1),
    )
    .unwrap()
}

fn mba() -> ProblemInstance {
    ProblemInstance::new(
        "mba",
        Arc::new(Quadratic::new(vec![vec![2.0, 0.0], vec![0.0, 2.0]], vec![0.0, 0.0], 0.0).unwrap()),
        Arc::new(Zero { dim: 2 }),
        Arc::new(Zero { dim: 2 }),
        ConvexSet::free(2),
    )
    .unwrap()
    .with_constraint(
        Arc::new(
            Quadratic::new(vec![vec![2.0, 0.0], vec![0.0, 2.0]], vec![-4.0, 0.0], 3.0).unwrap(),
        ),
        Arc::new(Zero { dim: 2 }),
        Arc::new(Zero { dim: 2 }),
    )
    .unwrap()
}

#[test]
fn soft_threshold_step() {
    let prob = linear_with_l1();
    let sub = SubproblemData::linearize(&prob, &[0.0], 1.0, &[]).unwrap();
    let sol = solve_exact(&sub, 1e-10).unwrap();
    assert!((sol.y[0] + 1.0).abs() < 1e-10, "{:?}", sol.y);
    assert!(sol.multipliers.is_empty());
}

#[test]
fn model_at_base_point_is_objective() {
    let prob = mba();
    let x = [1.5, 0.5];
    let sub = SubproblemData::linearize(&prob, &x, 2.0, &[2.0]).unwrap();
    assert_eq!(sub.model_objective(&x), prob.evaluate_objective(&x).unwrap());
    assert_eq!(sub.model_constraint(0, &x).unwrap(), prob.evaluate_constraint(0, &x).unwrap());
    assert!(sub.model_constraint(1, &x).is_err());
}

#[test]
fn constrained_model_solve_satisfies_kkt() {
    let prob = mba();
    let sub = SubproblemData::linearize(&prob, &[2.0, 0.5], 2.0, &[2.0]).unwrap();
    let sol = solve_exact(&sub, 1e-9).unwrap();
    assert!(sol.stationarity_residual <= 1e-9);
    assert!(sol.feasibility_residual <= 1e-9);
    assert!(sol.complementarity_abs <= 1e-9);
    assert!(sol.multipliers[0] > 0.0);
}

#[test]
fn inexact_is_cheaper() {
    let prob = mba();
    let sub = SubproblemData::linearize(&prob, &[2.0, 0.5], 2.0, &[2.0]).unwrap();
    let exact = solve_exact(&sub, 1e-8).unwrap();
    let loose = solve_inexact(&sub, 1e-1, 0.0).unwrap();
    assert!(loose.inner_iterations < exact.inner_iterations);
}

#[test]
fn slater_examples() {
    let prob = mba();
    let sub = SubproblemData::linearize(&prob, &[2.0, 0.0], 2.0, &[2.0]).unwrap();
    let y = find_slater_point(&sub).unwrap();
    assert!(sub.model_constraint(0, &y).unwrap() < -SLATER_MARGIN);

    let line = |s: f64| Arc::new(Quadratic::new(vec![vec![0.0]], vec![s], 0.0).unwrap());
    let pair = ProblemInstance::new(
        "pair",
        line(0.0),
        Arc::new(Zero { dim: 1 }),
        Arc::new(Zero { dim: 1 }),
        ConvexSet::free(1),
    )
    .unwrap()
    .with_constraint(line(1.0), Arc::new(Zero { dim: 1 }), Arc::new(Zero { dim: 1 }))
    .unwrap()
    .with_constraint(line(-1.0), Arc::new(Zero { dim: 1 }), Arc::new(Zero { dim: 1 }))
    .unwrap();
    let sub = SubproblemData::linearize(&pair, &[0.0], 1.0, &[0.0, 0.0]).unwrap();
    assert!(find_slater_point(&sub).is_none());
}

#[test]
fn projection_onto_model_set() {
    let prob = mba();
    let sub = SubproblemData::linearize(&prob, &[2.0, 0.0], 2.0, &[2.0]).unwrap();
    let (p, d) = project_onto_model_set(&sub, &[0.0, 0.0], 1e-10).unwrap();
    assert!((p[0] - 1.0).abs() < 1e-8 && p[1].abs() < 1e-8, "{p:?}");
    assert!((d - 1.0).abs() < 1e-8);
}
