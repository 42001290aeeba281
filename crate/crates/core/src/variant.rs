//! The variant method: local curvatures estimated per outer iteration and
//! inflated by `τ` until the trial point is feasible and passes the
//! nonmonotone decrease test.

use serde::{Deserialize, Serialize};

use crate::error::{Result, ScpError};
use crate::exact::{abort, base_record, default_kkt_stop, fill_step};
use crate::kkt::DEFAULT_TOL_ACTIVE;
use crate::linalg::{dot, norm_sq, sub};
use crate::problem::{ProblemInstance, FEASIBILITY_TOL};
use crate::subproblem::{
    solve_model, SolveTarget, SubproblemData, SubproblemOptions, WarmStart, DEFAULT_TOL_INNER,
};
use crate::trace::{
    Method, Rejection, RejectionReason, SolverTrace, TerminationReason, VariantRecord,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum UpdateStrategy {
    /// Infeasible trial: inflate every `l_gᵢ`; insufficient decrease: inflate `l_f`.
    #[default]
    Separate,
    /// Any rejection inflates `l_f` and every `l_gᵢ`.
    Simultaneous,
    /// Infeasible trial: inflate only the `l_gᵢ` of violated constraints.
    PerConstraint,
}

/// Initial curvatures of each outer iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureInit {
    /// Secant estimates from the last two iterates, clamped to `[L_min, L_max]`.
    Bb,
    /// Fixed values; `None` means `L_min`.
    Constant { l_f: Option<f64>, l_g: Option<Vec<f64>> },
}

impl Default for CurvatureInit {
    fn default() -> Self {
        CurvatureInit::Bb
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VariantOptions {
    pub c: f64,
    pub l_min: f64,
    pub l_max: f64,
    pub tau: f64,
    /// Window length `M` of the nonmonotone test.
    pub memory: usize,
    pub strategy: UpdateStrategy,
    pub init: CurvatureInit,
    /// Absolute slack added to the right side of the decrease test to absorb
    /// the inner solver's tolerance.
    pub accept_slack: f64,
    pub max_outer: usize,
    pub kkt_tol: f64,
    pub tol_inner: f64,
    pub step_tol: f64,
    pub tol_active: f64,
    pub feas_tol: f64,
    pub inner: SubproblemOptions,
}

impl Default for VariantOptions {
    fn default() -> Self {
        VariantOptions {
            c: 1e-4,
            l_min: 1e-3,
            l_max: 1e8,
            tau: 2.0,
            memory: 5,
            strategy: UpdateStrategy::Separate,
            init: CurvatureInit::Bb,
            accept_slack: 10.0 * DEFAULT_TOL_INNER,
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

impl VariantOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) {
            return Err(ScpError::config("c must be > 0"));
        }
        if !(self.l_min > 0.0 && self.l_min < self.l_max && self.l_max.is_finite()) {
            return Err(ScpError::config("need 0 < L_min < L_max < ∞"));
        }
        if !(self.tau > 1.0 && self.tau.is_finite()) {
            return Err(ScpError::config("tau must be > 1"));
        }
        if !(self.kkt_tol > 0.0 && self.tol_inner > 0.0) {
            return Err(ScpError::config("kkt_tol and tol_inner must be > 0"));
        }
        if !(self.accept_slack >= 0.0 && self.step_tol >= 0.0 && self.feas_tol >= 0.0) {
            return Err(ScpError::config("accept_slack, step_tol and feas_tol must be ≥ 0"));
        }
        if let CurvatureInit::Constant { l_f, l_g } = &self.init {
            if l_f.is_some_and(|v| !(v > 0.0)) {
                return Err(ScpError::config("constant l_f must be > 0"));
            }
            if l_g.as_ref().is_some_and(|v| v.iter().any(|l| !(*l > 0.0))) {
                return Err(ScpError::config("constant l_g entries must be > 0"));
            }
        }
        self.inner.validate()
    }
}

/// `clamp(dx·dgrad / ‖dx‖², L_min, L_max)`, or `L_min` when `dx = 0`.
pub fn bb_estimate(dx: &[f64], dgrad: &[f64], l_min: f64, l_max: f64) -> f64 {
    let nx = norm_sq(dx);
    if nx == 0.0 {
        return l_min;
    }
    let est = dot(dx, dgrad) / nx;
    if est.is_nan() {
        return l_min;
    }
    est.clamp(l_min, l_max)
}

/// `max F(x^i)` over `i ∈ [max(k − M, 0), k]`.
pub fn nonmonotone_reference(history: &[f64], k: usize, memory: usize) -> f64 {
    let lo = k.saturating_sub(memory);
    history[lo..=k].iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// The inner-loop bound of the variant method,
/// `⌊(ln(L_f + c) + ln(max L_g) − 2 ln(2 L_min)) / ln τ + 4⌋`.
///
/// Without curved constraints (`max L_g = 0` or `m = 0`) the constraint
/// curvatures are never inflated and the bound reduces to its objective half,
/// `⌊ln((L_f + c) / (2 L_min)) / ln τ + 2⌋`. The result is at least 1.
pub fn theorem_bound(l_f: f64, c: f64, max_l_g: Option<f64>, l_min: f64, tau: f64) -> usize {
    let lt = tau.ln();
    let raw = match max_l_g {
        Some(lg) if lg > 0.0 => {
            ((l_f + c).ln() + lg.ln() - 2.0 * (2.0 * l_min).ln()) / lt + 4.0
        }
        _ => ((l_f + c) / (2.0 * l_min)).ln() / lt + 2.0,
    };
    (raw.floor().max(1.0)) as usize
}

/// Largest number of inflations a curvature starting at `start` can receive
/// while staying below `threshold`.
fn max_bumps(start: f64, threshold: f64, tau: f64) -> usize {
    if start >= threshold {
        return 0;
    }
    // Each inflation happens while the value is below the threshold.
    let mut n = 0;
    let mut l = start;
    while l < threshold {
        l *= tau;
        n += 1;
    }
    n
}

/// Trial count that the driver treats as an internal fault when exceeded.
///
/// The objective curvature stops growing once it reaches `(L_f + c)/2`. A
/// trial can only be infeasible while some `l_gᵢ < L_gᵢ`, since the model
/// constraint majorizes the true one from that point on.
pub fn inner_loop_bound(prob: &ProblemInstance, opts: &VariantOptions, l_f0: f64, l_g0: &[f64]) -> usize {
    let bf = max_bumps(l_f0, 0.5 * (prob.lipschitz_f() + opts.c), opts.tau);
    let lgs = prob.lipschitz_g();
    let bg = match opts.strategy {
        UpdateStrategy::PerConstraint => lgs
            .iter()
            .zip(l_g0)
            .map(|(lg, l0)| max_bumps(*l0, *lg, opts.tau))
            .sum(),
        _ => {
            let max_lg = lgs.iter().copied().fold(0.0, f64::max);
            let min_l0 = l_g0.iter().copied().fold(f64::INFINITY, f64::min);
            if lgs.is_empty() {
                0
            } else {
                max_bumps(min_l0, max_lg, opts.tau)
            }
        }
    };
    match opts.strategy {
        UpdateStrategy::Simultaneous => 1 + bf.max(bg),
        _ => 1 + bf + bg,
    }
}

fn initial_curvatures(
    prob: &ProblemInstance,
    opts: &VariantOptions,
    prev: Option<(&[f64], &[f64], &[Vec<f64>])>,
    x: &[f64],
    grad_f: &[f64],
    grad_g: &[Vec<f64>],
) -> (f64, Vec<f64>) {
    let m = prob.m();
    match &opts.init {
        CurvatureInit::Constant { l_f, l_g } => (
            l_f.unwrap_or(opts.l_min),
            l_g.clone().unwrap_or_else(|| vec![opts.l_min; m]),
        ),
        CurvatureInit::Bb => match prev {
            None => (opts.l_min, vec![opts.l_min; m]),
            Some((x_prev, gf_prev, gg_prev)) => {
                let dx = sub(x, x_prev);
                let lf = bb_estimate(&dx, &sub(grad_f, gf_prev), opts.l_min, opts.l_max);
                let lg = (0..m)
                    .map(|i| bb_estimate(&dx, &sub(&grad_g[i], &gg_prev[i]), opts.l_min, opts.l_max))
                    .collect();
                (lf, lg)
            }
        },
    }
}

/// Run the variant method from a feasible `x0`.
pub fn run_variant(prob: &ProblemInstance, x0: &[f64], opts: &VariantOptions) -> Result<SolverTrace> {
    opts.validate()?;
    prob.check_point(x0)?;
    let m = prob.m();
    if let CurvatureInit::Constant { l_g: Some(l), .. } = &opts.init {
        if l.len() != m {
            return Err(ScpError::config(format!("constant l_g needs {m} entries, got {}", l.len())));
        }
    }
    if !prob.is_feasible(x0, opts.feas_tol)? {
        return Err(ScpError::input(format!(
            "x0 is not feasible at tolerance {:e}; the variant method starts inside the feasible region",
            opts.feas_tol
        )));
    }
    let mut trace = SolverTrace::new(Method::Variant, prob.name.clone());
    let mut x = x0.to_vec();
    let mut lam = vec![0.0; m];
    let mut history: Vec<f64> = Vec::new();
    let mut prev: Option<(Vec<f64>, Vec<f64>, Vec<Vec<f64>>)> = None;
    let mut last_curv = (opts.l_min, vec![opts.l_min; m]);

    for k in 0..=opts.max_outer {
        let grads = (|| -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
            let gf = prob.grad_f(&x)?;
            let gg = (0..m).map(|i| prob.grad_g(i, &x)).collect::<Result<Vec<_>>>()?;
            Ok((gf, gg))
        })();
        let (grad_f, grad_g) = match grads {
            Ok(g) => g,
            Err(e) => return Err(abort(trace, e)),
        };
        let mut rec = match base_record(prob, k, &x, &lam, opts.tol_active, last_curv.0, &last_curv.1) {
            Ok(r) => r,
            Err(e) => return Err(abort(trace, e)),
        };
        history.push(rec.objective);
        if default_kkt_stop(&rec, opts.kkt_tol) || k == opts.max_outer {
            trace.termination = if default_kkt_stop(&rec, opts.kkt_tol) {
                TerminationReason::KktTol
            } else {
                TerminationReason::MaxOuter
            };
            trace.records.push(rec);
            return Ok(trace);
        }

        let (l_f0, l_g0) = initial_curvatures(
            prob,
            opts,
            prev.as_ref().map(|(a, b, c)| (a.as_slice(), b.as_slice(), c.as_slice())),
            &x,
            &grad_f,
            &grad_g,
        );
        let bound = inner_loop_bound(prob, opts, l_f0, &l_g0);
        let reference = nonmonotone_reference(&history, k, opts.memory);
        let (mut l_f, mut l_g) = (l_f0, l_g0.clone());
        let base = match SubproblemData::linearize(prob, &x, l_f, &l_g) {
            Ok(s) => s,
            Err(e) => {
                trace.records.push(rec);
                return Err(abort(trace, e));
            }
        };
        let mut warm_lam = lam.clone();
        let mut trial = 0;
        let accepted = loop {
            trial += 1;
            if trial > bound {
                trace.records.push(rec);
                let e = ScpError::Internal(format!(
                    "outer iteration {k} needed more than {bound} curvature trials"
                ));
                return Err(abort(trace, e));
            }
            let attempt = base.with_curvatures(l_f, &l_g).and_then(|sub| {
                let warm = WarmStart { y: None, multipliers: Some(&warm_lam) };
                let sol = solve_model(&sub, SolveTarget::Exact(opts.tol_inner), &warm, &opts.inner)?;
                let cvals = prob.constraint_values(&sol.y)?;
                let f_next = prob.evaluate_objective(&sol.y)?;
                Ok((sub, sol, cvals, f_next))
            });
            let (sub, sol, cvals, f_next) = match attempt {
                Ok(a) => a,
                Err(e) => {
                    trace.records.push(rec);
                    return Err(abort(trace, e));
                }
            };
            rec.inner_iterations += sol.inner_iterations;
            rec.al_rounds += sol.al_rounds;
            warm_lam = sol.multipliers.clone();
            let feasible = prob.set.contains(&sol.y, FEASIBILITY_TOL)
                && cvals.iter().all(|c| *c <= FEASIBILITY_TOL);
            let d2 = norm_sq(&sub_vec(&sol.y, &x));
            let decrease = f_next <= reference - 0.5 * opts.c * d2 + opts.accept_slack;
            if feasible && decrease {
                break (sub, sol, f_next);
            }
            let reason = if feasible {
                RejectionReason::InsufficientDecrease
            } else {
                RejectionReason::Infeasible
            };
            trace.rejections.push(Rejection { k, trial, l_f, l_g: l_g.clone(), reason });
            match (opts.strategy, reason) {
                (UpdateStrategy::Simultaneous, _) => {
                    l_f *= opts.tau;
                    l_g.iter_mut().for_each(|l| *l *= opts.tau);
                }
                (_, RejectionReason::InsufficientDecrease) => l_f *= opts.tau,
                (UpdateStrategy::Separate, RejectionReason::Infeasible) => {
                    l_g.iter_mut().for_each(|l| *l *= opts.tau);
                }
                (UpdateStrategy::PerConstraint, RejectionReason::Infeasible) => {
                    let mut any = false;
                    for (l, c) in l_g.iter_mut().zip(&cvals) {
                        if *c > FEASIBILITY_TOL {
                            *l *= opts.tau;
                            any = true;
                        }
                    }
                    // Only the set membership failed: no constraint to blame.
                    if !any {
                        l_g.iter_mut().for_each(|l| *l *= opts.tau);
                    }
                }
            }
        };
        let (sub, sol, f_next) = accepted;
        fill_step(&mut rec, &sub, &sol);
        rec.inner_iterations -= sol.inner_iterations;
        rec.al_rounds -= sol.al_rounds;
        rec.l_f = l_f;
        rec.l_g = l_g.clone();
        rec.variant = Some(VariantRecord {
            trials: trial,
            l_f_init: l_f0,
            l_g_init: l_g0,
            reference,
            accepted_value: f_next,
        });
        let moved = rec.step.unwrap_or(0.0);
        trace.records.push(rec);
        last_curv = (l_f, l_g);
        prev = Some((x.clone(), grad_f, grad_g));
        x = sol.y;
        lam = sol.multipliers;
        if moved <= opts.step_tol {
            match base_record(prob, k + 1, &x, &lam, opts.tol_active, last_curv.0, &last_curv.1) {
                Ok(r) => trace.records.push(r),
                Err(e) => return Err(abort(trace, e)),
            }
            trace.termination = TerminationReason::StepTol;
            return Ok(trace);
        }
    }
    unreachable!("the loop returns at k = max_outer")
}

fn sub_vec(a: &[f64], b: &[f64]) -> Vec<f64> {
    sub(a, b)
}
