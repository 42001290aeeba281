//! The exact sequential convex programming method: linearize at `x^k` with the
//! global Lipschitz constants as curvatures, solve the model, repeat.

use serde::{Deserialize, Serialize};

use crate::error::{Result, ScpError};
use crate::kkt::{kkt_residual, DEFAULT_TOL_ACTIVE};
use crate::linalg::dist;
use crate::problem::{ProblemInstance, FEASIBILITY_TOL};
use crate::subproblem::{
    solve_model, SolveTarget, SubproblemData, SubproblemOptions, SubproblemSolution, WarmStart,
    DEFAULT_TOL_INNER,
};
use crate::trace::{IterationRecord, Method, SolverTrace, TerminationReason};

/// Smallest objective curvature handed to the inner solver.
pub const CURVATURE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExactOptions {
    pub max_outer: usize,
    pub kkt_tol: f64,
    pub tol_inner: f64,
    /// Stop once `‖x^{k+1} − x^k‖ ≤ step_tol`.
    pub step_tol: f64,
    pub tol_active: f64,
    /// Tolerance of the feasibility check on `x⁰`.
    pub feas_tol: f64,
    pub inner: SubproblemOptions,
}

impl Default for ExactOptions {
    fn default() -> Self {
        ExactOptions {
            max_outer: 500,
            kkt_tol: 1e-8,
            tol_inner: DEFAULT_TOL_INNER,
            step_tol: 1e-12,
            tol_active: DEFAULT_TOL_ACTIVE,
            feas_tol: FEASIBILITY_TOL,
            inner: SubproblemOptions::default(),
        }
    }
}

impl ExactOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.kkt_tol > 0.0 && self.tol_inner > 0.0) {
            return Err(ScpError::config("kkt_tol and tol_inner must be > 0"));
        }
        if !(self.step_tol >= 0.0 && self.feas_tol >= 0.0 && self.tol_active >= 0.0) {
            return Err(ScpError::config("step_tol, feas_tol and tol_active must be ≥ 0"));
        }
        self.inner.validate()
    }
}

/// `max(stationarity, feasibility⁺, |complementarity|) ≤ kkt_tol`.
pub fn default_kkt_stop(rec: &IterationRecord, kkt_tol: f64) -> bool {
    rec.stationarity.max(rec.feasibility.max(0.0)).max(rec.complementarity.abs()) <= kkt_tol
}

/// Record of `x^k` with its KKT residual under `lam`; step data left empty.
pub(crate) fn base_record(
    prob: &ProblemInstance,
    k: usize,
    x: &[f64],
    lam: &[f64],
    tol_active: f64,
    l_f: f64,
    l_g: &[f64],
) -> Result<IterationRecord> {
    let kkt = kkt_residual(prob, x, lam, tol_active)?;
    Ok(IterationRecord {
        k,
        x: x.to_vec(),
        objective: prob.evaluate_objective(x)?,
        max_constraint: prob.max_constraint(x)?,
        stationarity: kkt.stationarity,
        feasibility: kkt.feasibility,
        complementarity: kkt.complementarity,
        multipliers: lam.to_vec(),
        step: None,
        inner_iterations: 0,
        al_rounds: 0,
        l_f,
        l_g: l_g.to_vec(),
        model_value: None,
        inexact: None,
        variant: None,
    })
}

pub(crate) fn fill_step(rec: &mut IterationRecord, sub: &SubproblemData<'_>, sol: &SubproblemSolution) {
    rec.step = Some(dist(&sol.y, &sub.x));
    rec.inner_iterations += sol.inner_iterations;
    rec.al_rounds += sol.al_rounds;
    rec.model_value = Some(sub.model_objective(&sol.y));
}

pub(crate) fn abort(mut trace: SolverTrace, source: ScpError) -> ScpError {
    trace.termination = TerminationReason::Error;
    ScpError::Aborted { source: Box::new(source), trace: Box::new(trace) }
}

/// Objective curvature with the floor applied; the second value reports
/// whether the floor was needed.
pub(crate) fn floored_curvature(l_f: f64) -> (f64, bool) {
    if l_f < CURVATURE_FLOOR {
        (CURVATURE_FLOOR, true)
    } else {
        (l_f, false)
    }
}

/// Run the exact method from a feasible `x0`.
pub fn run_exact(prob: &ProblemInstance, x0: &[f64], opts: &ExactOptions) -> Result<SolverTrace> {
    opts.validate()?;
    prob.check_point(x0)?;
    if !prob.is_feasible(x0, opts.feas_tol)? {
        return Err(ScpError::input(format!(
            "x0 is not feasible at tolerance {:e}; the exact method starts inside the feasible region",
            opts.feas_tol
        )));
    }
    let mut trace = SolverTrace::new(Method::Exact, prob.name.clone());
    let (l_f, floored) = floored_curvature(prob.lipschitz_f());
    if floored {
        trace.curvature_floor = Some(CURVATURE_FLOOR);
        trace.warnings.push(format!(
            "L_f = {} is below the curvature floor; the model uses l_f = {CURVATURE_FLOOR:e}",
            prob.lipschitz_f()
        ));
    }
    let l_g = prob.lipschitz_g();
    let mut x = x0.to_vec();
    let mut lam = vec![0.0; prob.m()];

    for k in 0..=opts.max_outer {
        let mut rec = match base_record(prob, k, &x, &lam, opts.tol_active, l_f, &l_g) {
            Ok(r) => r,
            Err(e) => return Err(abort(trace, e)),
        };
        if default_kkt_stop(&rec, opts.kkt_tol) {
            trace.records.push(rec);
            trace.termination = TerminationReason::KktTol;
            return Ok(trace);
        }
        if k == opts.max_outer {
            trace.records.push(rec);
            trace.termination = TerminationReason::MaxOuter;
            return Ok(trace);
        }
        let step = SubproblemData::linearize(prob, &x, l_f, &l_g).and_then(|sub| {
            let warm = WarmStart { y: None, multipliers: Some(&lam) };
            let sol = solve_model(&sub, SolveTarget::Exact(opts.tol_inner), &warm, &opts.inner)?;
            fill_step(&mut rec, &sub, &sol);
            Ok(sol)
        });
        let sol = match step {
            Ok(s) => s,
            Err(e) => {
                trace.records.push(rec);
                return Err(abort(trace, e));
            }
        };
        let moved = rec.step.unwrap_or(0.0);
        let f_prev = rec.objective;
        trace.records.push(rec);
        x = sol.y;
        lam = sol.multipliers;
        if let Ok(f_next) = prob.evaluate_objective(&x) {
            if f_next > f_prev + 10.0 * opts.tol_inner {
                trace.warnings.push(format!(
                    "iteration {k}: objective rose from {f_prev} to {f_next}"
                ));
            }
        }
        if moved <= opts.step_tol {
            match base_record(prob, k + 1, &x, &lam, opts.tol_active, l_f, &l_g) {
                Ok(r) => trace.records.push(r),
                Err(e) => return Err(abort(trace, e)),
            }
            trace.termination = TerminationReason::StepTol;
            return Ok(trace);
        }
    }
    unreachable!("the loop returns at k = max_outer")
}
