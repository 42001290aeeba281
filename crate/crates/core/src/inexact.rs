//! The inexact method: each model is solved only to the approximate KKT
//! conditions at a level `ε_k` taken from a schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Result, ScpError};
use crate::exact::{abort, base_record, default_kkt_stop, fill_step, floored_curvature, CURVATURE_FLOOR};
use crate::kkt::DEFAULT_TOL_ACTIVE;
use crate::problem::{ProblemInstance, FEASIBILITY_TOL};
use crate::subproblem::{solve_model, SolveTarget, SubproblemData, SubproblemOptions, WarmStart};
use crate::trace::{InexactRecord, Method, SolverTrace, TerminationReason};

/// Tolerance schedule `ε_k`, indexed from `k = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EpsSchedule {
    Constant { eps0: f64 },
    /// `ε₀ / (k + 1)^r`.
    Power { eps0: f64, r: f64 },
    /// `ε₀ · ρ^k`.
    Geometric { eps0: f64, rho: f64 },
}

impl Default for EpsSchedule {
    fn default() -> Self {
        EpsSchedule::Power { eps0: 1e-2, r: 2.0 }
    }
}

impl EpsSchedule {
    pub fn eps(&self, k: usize) -> f64 {
        match *self {
            EpsSchedule::Constant { eps0 } => eps0,
            EpsSchedule::Power { eps0, r } => eps0 / ((k + 1) as f64).powf(r),
            EpsSchedule::Geometric { eps0, rho } => eps0 * rho.powi(k.min(i32::MAX as usize) as i32),
        }
    }

    pub fn is_summable(&self) -> bool {
        match *self {
            EpsSchedule::Constant { .. } => false,
            EpsSchedule::Power { r, .. } => r > 1.0,
            EpsSchedule::Geometric { rho, .. } => rho < 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            EpsSchedule::Constant { eps0 } => eps0 > 0.0 && eps0.is_finite(),
            EpsSchedule::Power { eps0, r } => eps0 > 0.0 && eps0.is_finite() && r > 0.0,
            EpsSchedule::Geometric { eps0, rho } => eps0 > 0.0 && eps0.is_finite() && rho > 0.0 && rho <= 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(ScpError::config(format!("invalid tolerance schedule {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InexactOptions {
    pub schedule: EpsSchedule,
    /// Reject schedules whose sum diverges.
    pub require_summable: bool,
    /// Lower bound on the inner solver's own stopping tolerance.
    pub tol_floor: f64,
    /// Abort once a multiplier exceeds this value.
    pub multiplier_cap: f64,
    pub max_outer: usize,
    pub kkt_tol: f64,
    pub step_tol: f64,
    pub tol_active: f64,
    pub inner: SubproblemOptions,
}

impl Default for InexactOptions {
    fn default() -> Self {
        InexactOptions {
            schedule: EpsSchedule::default(),
            require_summable: true,
            tol_floor: 1e-13,
            multiplier_cap: 1e8,
            max_outer: 500,
            kkt_tol: 1e-8,
            step_tol: 1e-12,
            tol_active: DEFAULT_TOL_ACTIVE,
            inner: SubproblemOptions::default(),
        }
    }
}

impl InexactOptions {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if self.require_summable && !self.schedule.is_summable() {
            return Err(ScpError::config(
                "schedule is not summable; use power with r > 1, geometric with rho < 1, \
                 or set require_summable = false",
            ));
        }
        if !(self.kkt_tol > 0.0 && self.multiplier_cap > 0.0) {
            return Err(ScpError::config("kkt_tol and multiplier_cap must be > 0"));
        }
        if !(self.tol_floor >= 0.0 && self.step_tol >= 0.0) {
            return Err(ScpError::config("tol_floor and step_tol must be ≥ 0"));
        }
        self.inner.validate()
    }
}

/// Run the inexact method from `x0 ∈ X`.
pub fn run_inexact(prob: &ProblemInstance, x0: &[f64], opts: &InexactOptions) -> Result<SolverTrace> {
    opts.validate()?;
    prob.check_point(x0)?;
    if !prob.set.contains(x0, FEASIBILITY_TOL) {
        return Err(ScpError::input("x0 must lie in X"));
    }
    let mut trace = SolverTrace::new(Method::Inexact, prob.name.clone());
    if !prob.is_feasible(x0, FEASIBILITY_TOL)? {
        let msg = "x0 violates the constraints; the first models may have no feasible point".to_string();
        log::warn!("{msg}");
        trace.warnings.push(msg);
    }
    let (l_f, floored) = floored_curvature(prob.lipschitz_f());
    if floored {
        let msg = format!(
            "L_f = {} but the inexact method assumes L_f > 0; using l_f = {CURVATURE_FLOOR:e}",
            prob.lipschitz_f()
        );
        log::warn!("{msg}");
        trace.warnings.push(msg);
        trace.curvature_floor = Some(CURVATURE_FLOOR);
    }
    let l_g = prob.lipschitz_g();
    let mut inner = opts.inner;
    inner.multiplier_cap = inner.multiplier_cap.max(opts.multiplier_cap);
    let mut x = x0.to_vec();
    let mut lam = vec![0.0; prob.m()];
    let mut gap_sum = 0.0;

    for k in 0..=opts.max_outer {
        let mut rec = match base_record(prob, k, &x, &lam, opts.tol_active, l_f, &l_g) {
            Ok(r) => r,
            Err(e) => return Err(abort(trace, e)),
        };
        if default_kkt_stop(&rec, opts.kkt_tol) || k == opts.max_outer {
            trace.termination = if default_kkt_stop(&rec, opts.kkt_tol) {
                TerminationReason::KktTol
            } else {
                TerminationReason::MaxOuter
            };
            trace.records.push(rec);
            return Ok(trace);
        }
        let eps_k = opts.schedule.eps(k);
        let step = SubproblemData::linearize(prob, &x, l_f, &l_g).and_then(|sub| {
            let warm = WarmStart { y: None, multipliers: Some(&lam) };
            let target = SolveTarget::Approximate { eps: eps_k, floor: opts.tol_floor };
            let sol = solve_model(&sub, target, &warm, &inner)?;
            let cvals = prob.constraint_values(&sol.y)?;
            fill_step(&mut rec, &sub, &sol);
            Ok((sol, cvals))
        });
        let (sol, cvals) = match step {
            Ok(s) => s,
            Err(e) => {
                trace.records.push(rec);
                return Err(abort(trace, e));
            }
        };
        gap_sum += sol
            .multipliers
            .iter()
            .zip(&lam)
            .zip(&cvals)
            .map(|((new, old), c)| (new - old) * c)
            .sum::<f64>();
        rec.inexact = Some(InexactRecord {
            eps_k,
            stationarity: sol.stationarity_residual,
            feasibility: sol.feasibility_residual,
            complementarity: sol.complementarity_residual,
            complementarity_abs: sol.complementarity_abs,
            dual_gap_partial: gap_sum,
            next_max_constraint: cvals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        });
        let moved = rec.step.unwrap_or(0.0);
        trace.records.push(rec);
        if let Some(big) = sol.multipliers.iter().copied().find(|l| *l > opts.multiplier_cap) {
            let e = ScpError::Infeasible(format!(
                "multiplier {big:e} exceeded the cap {:e}; the multiplier sequence looks unbounded",
                opts.multiplier_cap
            ));
            return Err(abort(trace, e));
        }
        x = sol.y;
        lam = sol.multipliers;
        // A zero step only signals convergence once ε_k is as tight as the KKT
        // tolerance; before that the start point may simply satisfy a loose ε_k.
        if moved <= opts.step_tol && eps_k <= opts.kkt_tol {
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

/// Running dual-gap sum and whether it looks divergent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualGapReport {
    pub partial_sum: f64,
    /// Strictly increasing, non-negligibly, over the last 50 iterations.
    pub divergence_warning: bool,
}

/// Window used by the divergence heuristic of [`dual_gap_monitor`].
pub const DUAL_GAP_WINDOW: usize = 50;

pub fn dual_gap_monitor(trace: &SolverTrace) -> DualGapReport {
    let sums: Vec<f64> = trace
        .records
        .iter()
        .filter_map(|r| r.inexact.as_ref().map(|c| c.dual_gap_partial))
        .collect();
    let partial_sum = sums.last().copied().unwrap_or(0.0);
    let divergence_warning = sums.len() > DUAL_GAP_WINDOW && {
        let tail = &sums[sums.len() - DUAL_GAP_WINDOW - 1..];
        let rising = tail.windows(2).all(|w| w[1] > w[0]);
        rising && tail[DUAL_GAP_WINDOW] - tail[0] > 1e-10 * (1.0 + partial_sum.abs())
    };
    DualGapReport { partial_sum, divergence_warning }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedules() {
        let p = EpsSchedule::Power { eps0: 1e-2, r: 2.0 };
        assert_eq!(p.eps(0), 1e-2);
        assert_eq!(p.eps(1), 2.5e-3);
        assert!(p.is_summable());
        assert!(!EpsSchedule::Constant { eps0: 1.0 }.is_summable());
        assert!(EpsSchedule::Geometric { eps0: 1.0, rho: 0.5 }.is_summable());
    }

    #[test]
    fn non_summable_rejected_when_required() {
        let opts = InexactOptions {
            schedule: EpsSchedule::Constant { eps0: 1e-3 },
            ..Default::default()
        };
        assert!(matches!(opts.validate(), Err(ScpError::Config(_))));
    }
}
