//! The convex model solved at every outer iteration.
//!
//! At a base point `x` the model objective is
//! `f(x) + s_f·(y−x) + (l_f/2)‖y−x‖² + p(y) − u(x) − s_u·(y−x)` and the model
//! constraints are
//! `gᵢ(x) + s_gᵢ·(y−x) + (l_gᵢ/2)‖y−x‖² + qᵢ(y) − vᵢ(x) − s_vᵢ·(y−x) ≤ 0`, `y ∈ X`.

mod engine;

use serde::Serialize;
use serde_json::json;

use crate::error::{Result, ScpError};
use crate::linalg::{axpy, dist, dot, norm, norm_sq, sub};
use crate::problem::ProblemInstance;

pub use engine::SolveTarget;
use engine::Program;

/// Margin below which a model constraint counts as strictly satisfied.
pub const SLATER_MARGIN: f64 = 1e-8;
/// Step cap of the Slater-point search.
pub const SLATER_MAX_STEPS: usize = 500;
/// Default inner tolerance of exact solves.
pub const DEFAULT_TOL_INNER: f64 = 1e-9;

/// Augmented Lagrangian settings of the inner solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SubproblemOptions {
    pub penalty0: f64,
    pub penalty_growth: f64,
    pub multiplier_cap: f64,
    /// Proximal-gradient steps per AL round.
    pub max_inner: usize,
    pub max_rounds: usize,
}

impl Default for SubproblemOptions {
    fn default() -> Self {
        SubproblemOptions {
            penalty0: 10.0,
            penalty_growth: 5.0,
            multiplier_cap: 1e8,
            max_inner: 20_000,
            max_rounds: 100,
        }
    }
}

impl SubproblemOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.penalty0 > 0.0 && self.penalty_growth > 1.0 && self.multiplier_cap > 0.0) {
            return Err(ScpError::config(
                "AL options need penalty0 > 0, penalty_growth > 1, multiplier_cap > 0",
            ));
        }
        if self.max_inner == 0 || self.max_rounds == 0 {
            return Err(ScpError::config("AL iteration caps must be positive"));
        }
        Ok(())
    }
}

/// Linearization of the problem at a base point.
#[derive(Debug, Clone)]
pub struct SubproblemData<'p> {
    pub prob: &'p ProblemInstance,
    pub x: Vec<f64>,
    pub f_x: f64,
    pub s_f: Vec<f64>,
    pub u_x: f64,
    pub s_u: Vec<f64>,
    pub g_x: Vec<f64>,
    pub s_g: Vec<Vec<f64>>,
    pub v_x: Vec<f64>,
    pub s_v: Vec<Vec<f64>>,
    pub l_f: f64,
    pub l_g: Vec<f64>,
}

/// Output of a model solve together with the achieved residuals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubproblemSolution {
    pub y: Vec<f64>,
    pub multipliers: Vec<f64>,
    pub stationarity_residual: f64,
    /// Largest model-constraint value at `y` (`−∞` when `m = 0`).
    pub feasibility_residual: f64,
    /// `max(0, maxᵢ −λᵢ·Gᵢ(y))`, the one-sided complementarity gap.
    pub complementarity_residual: f64,
    /// `maxᵢ |λᵢ·Gᵢ(y)|`.
    pub complementarity_abs: f64,
    pub inner_iterations: usize,
    pub al_rounds: usize,
}

/// Residuals of the model KKT system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residuals {
    pub stationarity: f64,
    pub feasibility: f64,
    pub complementarity: f64,
    pub complementarity_abs: f64,
}

impl Residuals {
    pub(crate) fn infinite() -> Self {
        Residuals {
            stationarity: f64::INFINITY,
            feasibility: f64::INFINITY,
            complementarity: f64::INFINITY,
            complementarity_abs: f64::INFINITY,
        }
    }

    pub fn max_violation(&self) -> f64 {
        self.stationarity
            .max(self.feasibility.max(0.0))
            .max(self.complementarity_abs)
    }
}

impl<'p> SubproblemData<'p> {
    /// Linearize at `x` with curvatures `l_f > 0` and `l_g ≥ 0`.
    pub fn linearize(prob: &'p ProblemInstance, x: &[f64], l_f: f64, l_g: &[f64]) -> Result<Self> {
        prob.check_point(x)?;
        let (f_x, _, u_x) = prob.objective_parts(x)?;
        let m = prob.m();
        let mut g_x = Vec::with_capacity(m);
        let mut v_x = Vec::with_capacity(m);
        let mut s_g = Vec::with_capacity(m);
        let mut s_v = Vec::with_capacity(m);
        for i in 0..m {
            let (g, _, v) = prob.constraint_parts(i, x)?;
            g_x.push(g);
            v_x.push(v);
            s_g.push(prob.grad_g(i, x)?);
            s_v.push(prob.subgrad_v(i, x)?);
        }
        let mut sub = SubproblemData {
            prob,
            x: x.to_vec(),
            f_x,
            s_f: prob.grad_f(x)?,
            u_x,
            s_u: prob.subgrad_u(x)?,
            g_x,
            s_g,
            v_x,
            s_v,
            l_f: 1.0,
            l_g: vec![0.0; m],
        };
        sub.set_curvatures(l_f, l_g)?;
        Ok(sub)
    }

    /// Same linearization with different curvatures.
    pub fn with_curvatures(&self, l_f: f64, l_g: &[f64]) -> Result<Self> {
        let mut s = self.clone();
        s.set_curvatures(l_f, l_g)?;
        Ok(s)
    }

    fn set_curvatures(&mut self, l_f: f64, l_g: &[f64]) -> Result<()> {
        if !(l_f > 0.0 && l_f.is_finite()) {
            return Err(ScpError::input(format!("objective curvature must be > 0, got {l_f}")));
        }
        if l_g.len() != self.prob.m() {
            return Err(ScpError::input(format!(
                "expected {} constraint curvatures, got {}",
                self.prob.m(),
                l_g.len()
            )));
        }
        if l_g.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(ScpError::input("constraint curvatures must be finite and ≥ 0"));
        }
        self.l_f = l_f;
        self.l_g = l_g.to_vec();
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.l_g.len()
    }

    /// `h(y; x, s_f, s_u)`.
    pub fn model_objective(&self, y: &[f64]) -> f64 {
        let d = sub(y, &self.x);
        self.f_x + dot(&self.s_f, &d) + 0.5 * self.l_f * norm_sq(&d) + self.prob.p.value(y)
            - self.u_x
            - dot(&self.s_u, &d)
    }

    /// Model of constraint `i` at `y`.
    pub fn model_constraint(&self, i: usize, y: &[f64]) -> Result<f64> {
        if i >= self.m() {
            return Err(ScpError::input(format!(
                "constraint index {i} out of range (m = {})",
                self.m()
            )));
        }
        Ok(self.base_constraint(i, y).0 + self.prob.constraints[i].q.value(y))
    }

    pub fn model_constraints(&self, y: &[f64]) -> Vec<f64> {
        (0..self.m())
            .map(|i| self.base_constraint(i, y).0 + self.prob.constraints[i].q.value(y))
            .collect()
    }

    /// Smooth part of model constraint `i` (everything except `qᵢ`) and its gradient.
    pub(crate) fn base_constraint(&self, i: usize, y: &[f64]) -> (f64, Vec<f64>) {
        let d = sub(y, &self.x);
        let mut lin = self.s_g[i].clone();
        axpy(-1.0, &self.s_v[i], &mut lin);
        let val = self.g_x[i] - self.v_x[i] + dot(&lin, &d) + 0.5 * self.l_g[i] * norm_sq(&d);
        axpy(self.l_g[i], &d, &mut lin);
        (val, lin)
    }

    fn objective_program(&self) -> Result<Program<'_, 'p>> {
        Program::new(self, sub(&self.s_f, &self.s_u), self.l_f, self.x.clone(), true)
    }

    /// Residuals of the model KKT system at `(y, λ)`.
    pub fn residuals(&self, y: &[f64], lam: &[f64]) -> Result<Residuals> {
        Ok(self.objective_program()?.residuals(y, lam))
    }

    pub(crate) fn diagnostic_json(&self) -> serde_json::Value {
        json!({
            "problem": self.prob.name,
            "x": self.x,
            "f_x": self.f_x,
            "s_f": self.s_f,
            "u_x": self.u_x,
            "s_u": self.s_u,
            "g_x": self.g_x,
            "s_g": self.s_g,
            "v_x": self.v_x,
            "s_v": self.s_v,
            "l_f": self.l_f,
            "l_g": self.l_g,
        })
    }
}

/// Stationarity, feasibility and complementarity of a program at `(y, λ)`.
///
/// For each nonsmooth piece the subgradient is either the oracle's own
/// selection or, when the subdifferential is a box, the element of the box
/// that makes the projected residual smallest. Both choices are tried for the
/// objective piece and for the constraint pieces; the smallest residual wins.
fn residuals_for(prog: &Program<'_, '_>, y: &[f64], lam: &[f64]) -> Residuals {
    let data = prog.sub;
    let prob = data.prob;
    let n = y.len();
    let mut base = prog.objective_gradient(y);

    // (weighted selection, weighted box, group)
    let mut pieces: Vec<(Vec<f64>, Option<(Vec<f64>, Vec<f64>)>, usize)> = Vec::new();
    let mut push = |o: &dyn crate::problem::ConvexOracle, weight: f64, group: usize, base: &mut Vec<f64>| {
        if weight == 0.0 || o.is_zero() {
            return;
        }
        let sel: Vec<f64> = o.subgradient(y).iter().map(|v| weight * v).collect();
        if o.smooth_lipschitz().is_some() {
            axpy(1.0, &sel, base);
            return;
        }
        let bx = o.subdifferential_box_near(y, crate::kkt::KINK_TOL).map(|(l, h)| {
            (l.iter().map(|v| weight * v).collect(), h.iter().map(|v| weight * v).collect())
        });
        pieces.push((sel, bx, group));
    };

    if prog.includes_p() && prob.p.smooth_lipschitz().is_none() {
        push(prob.p.as_ref(), 1.0, 0, &mut base);
    }
    let mut g_vals = Vec::with_capacity(lam.len());
    for (i, &li) in lam.iter().enumerate() {
        let (gb, grad) = data.base_constraint(i, y);
        let q = &prob.constraints[i].q;
        g_vals.push(gb + q.value(y));
        axpy(li, &grad, &mut base);
        push(q.as_ref(), li, 1, &mut base);
    }

    let mut stationarity = f64::INFINITY;
    for combo in 0..4usize {
        let mut w = base.clone();
        let mut lo = vec![0.0; n];
        let mut hi = vec![0.0; n];
        for (sel, bx, group) in &pieces {
            match bx {
                Some((l, h)) if combo & (1 << group) != 0 => {
                    for j in 0..n {
                        lo[j] += l[j];
                        hi[j] += h[j];
                    }
                }
                _ => axpy(1.0, sel, &mut w),
            }
        }
        let step: Vec<f64> = (0..n).map(|j| y[j] - w[j] - (-w[j]).clamp(lo[j], hi[j])).collect();
        stationarity = stationarity.min(dist(&prob.set.project(&step), y));
    }

    let feasibility = g_vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut complementarity: f64 = 0.0;
    let mut complementarity_abs: f64 = 0.0;
    for (g, l) in g_vals.iter().zip(lam) {
        complementarity = complementarity.max(-l * g);
        complementarity_abs = complementarity_abs.max((l * g).abs());
    }
    Residuals { stationarity, feasibility, complementarity, complementarity_abs }
}

fn solution_from(out: engine::InnerOutcome) -> SubproblemSolution {
    SubproblemSolution {
        y: out.y,
        multipliers: out.multipliers,
        stationarity_residual: out.residuals.stationarity,
        feasibility_residual: out.residuals.feasibility,
        complementarity_residual: out.residuals.complementarity,
        complementarity_abs: out.residuals.complementarity_abs,
        inner_iterations: out.inner_iterations,
        al_rounds: out.rounds,
    }
}

/// Starting data for a model solve. A supplied `y` that already meets the
/// target is returned as is.
#[derive(Debug, Clone, Default)]
pub struct WarmStart<'a> {
    pub y: Option<&'a [f64]>,
    pub multipliers: Option<&'a [f64]>,
}

/// General entry point: solve the model to `target` from an optional warm start.
pub fn solve_model(
    sub: &SubproblemData<'_>,
    target: SolveTarget,
    warm: &WarmStart<'_>,
    opts: &SubproblemOptions,
) -> Result<SubproblemSolution> {
    opts.validate()?;
    let prog = sub.objective_program()?;
    let y0 = warm.y.unwrap_or(&sub.x);
    sub.prob.check_point(y0)?;
    prog.solve(y0, warm.multipliers, target, opts, warm.y.is_some()).map(solution_from)
}

/// Solve the model with all three residuals `≤ tol_inner`.
pub fn solve_exact(sub: &SubproblemData<'_>, tol_inner: f64) -> Result<SubproblemSolution> {
    if !(tol_inner > 0.0) {
        return Err(ScpError::input("tol_inner must be > 0"));
    }
    solve_model(sub, SolveTarget::Exact(tol_inner), &WarmStart::default(), &SubproblemOptions::default())
}

/// Solve the model to the approximate KKT conditions at level `eps_k`.
pub fn solve_inexact(
    sub: &SubproblemData<'_>,
    eps_k: f64,
    tol_floor: f64,
) -> Result<SubproblemSolution> {
    if !(eps_k > 0.0) {
        return Err(ScpError::input("eps_k must be > 0"));
    }
    solve_model(
        sub,
        SolveTarget::Approximate { eps: eps_k, floor: tol_floor.max(0.0) },
        &WarmStart::default(),
        &SubproblemOptions::default(),
    )
}

/// Search for `ŷ ∈ X` with every model constraint below `−SLATER_MARGIN`.
///
/// Projected subgradient descent on `maxᵢ Gᵢ` from the base point, with a
/// Polyak step aimed just below the best value seen.
pub fn find_slater_point(sub: &SubproblemData<'_>) -> Option<Vec<f64>> {
    let prob = sub.prob;
    if sub.m() == 0 {
        return Some(sub.x.clone());
    }
    let eval = |y: &[f64]| -> (f64, Vec<f64>) {
        let mut best = (f64::NEG_INFINITY, Vec::new());
        for i in 0..sub.m() {
            let (gb, mut grad) = sub.base_constraint(i, y);
            let q = &prob.constraints[i].q;
            let val = gb + q.value(y);
            if val > best.0 {
                axpy(1.0, &q.subgradient(y), &mut grad);
                best = (val, grad);
            }
        }
        best
    };
    let mut y = prob.set.project(&sub.x);
    let mut best_val = f64::INFINITY;
    let mut best_y = y.clone();
    for _ in 0..=SLATER_MAX_STEPS {
        let (val, grad) = eval(&y);
        if !val.is_finite() {
            break;
        }
        if val < best_val {
            best_val = val;
            best_y = y.clone();
        }
        if best_val < -SLATER_MARGIN {
            break;
        }
        let gn = norm_sq(&grad);
        if gn == 0.0 {
            break;
        }
        let target = best_val - (0.5 * best_val.abs()).max(1e-3);
        let step = (val - target) / gn;
        let mut trial = y.clone();
        axpy(-step, &grad, &mut trial);
        y = prob.set.project(&trial);
    }
    (best_val < -SLATER_MARGIN).then_some(best_y)
}

/// Euclidean projection of `z` onto the model feasible set, computed by the
/// inner solver. Returns the projection and the distance.
pub fn project_onto_model_set(
    sub: &SubproblemData<'_>,
    z: &[f64],
    tol: f64,
) -> Result<(Vec<f64>, f64)> {
    sub.prob.check_point(z)?;
    let prog = Program::new(sub, vec![0.0; z.len()], 1.0, z.to_vec(), false)?;
    let out = prog.solve(z, None, SolveTarget::Exact(tol), &SubproblemOptions::default(), true)?;
    let d = dist(&out.y, z);
    Ok((out.y, d))
}

/// `dist(0, G(z) + ℝ₊ᵐ) = ‖max(G(z), 0)‖`.
pub fn constraint_violation(sub: &SubproblemData<'_>, z: &[f64]) -> f64 {
    let pos: Vec<f64> = sub.model_constraints(z).into_iter().map(|g| g.max(0.0)).collect();
    norm(&pos)
}

#[cfg(test)]
mod tests;
