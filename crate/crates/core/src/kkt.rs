//! Approximate KKT residuals for the original problem and a brute-force grid
//! oracle for small instances.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ScpError};
use crate::linalg::{axpy, dist};
use crate::problem::{ConvexOracle, ProblemInstance};
use crate::trace::float;

/// Relative distance within which a kink counts as reached when measuring residuals.
pub const KINK_TOL: f64 = 1e-9;

pub const DEFAULT_TOL_ACTIVE: f64 = 1e-7;

/// Number of subgradient-selection combinations tried by [`kkt_residual`].
pub const SELECTION_COMBINATIONS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktResidual {
    /// `‖P_X(x − [∇f + s_p − s_u + Σ λᵢ(∇gᵢ + s_qᵢ − s_vᵢ)]) − x‖`.
    pub stationarity: f64,
    /// Largest constraint value, raised to the distance to `X` when `x ∉ X`;
    /// `−∞` for an unconstrained point inside `X`.
    #[serde(with = "float")]
    pub feasibility: f64,
    /// `maxᵢ |λᵢ·cᵢ(x)|`.
    pub complementarity: f64,
    pub multipliers: Vec<f64>,
    pub active: Vec<usize>,
    /// Index of the subgradient-selection combination that gave the reported
    /// stationarity (0 means the oracles' own selections).
    pub selection: usize,
}

impl KktResidual {
    /// `max(stationarity, feasibility⁺, complementarity)`.
    pub fn max_violation(&self) -> f64 {
        self.stationarity
            .max(self.feasibility.max(0.0))
            .max(self.complementarity.abs())
    }
}

/// One contribution `weight · ∂φ(x)` to the stationarity sum.
struct Piece<'a> {
    oracle: &'a dyn ConvexOracle,
    weight: f64,
    group: usize,
}

/// Indices with `|cᵢ(x)| ≤ tol`.
pub fn active_set(prob: &ProblemInstance, x: &[f64], tol: f64) -> Result<Vec<usize>> {
    let vals = prob.constraint_values(x)?;
    Ok(vals
        .iter()
        .enumerate()
        .filter(|(_, c)| c.abs() <= tol)
        .map(|(i, _)| i)
        .collect())
}

/// KKT residual at `(x, λ)`.
///
/// Subdifferentials are only available as selections, so a nonzero residual
/// under one selection does not rule out a KKT point. Three groups of pieces
/// (`p`; `u`; the `qᵢ`, `vᵢ`) each use either the oracle's selection or, when
/// the oracle exposes its subdifferential as a box, the element of that box
/// minimizing the residual. The smallest of the eight combinations is reported.
pub fn kkt_residual(
    prob: &ProblemInstance,
    x: &[f64],
    lam: &[f64],
    tol_active: f64,
) -> Result<KktResidual> {
    prob.check_point(x)?;
    let m = prob.m();
    if lam.len() != m {
        return Err(ScpError::input(format!(
            "expected {m} multipliers, got {}",
            lam.len()
        )));
    }
    if lam.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
        return Err(ScpError::input("multipliers must be finite and ≥ 0"));
    }
    let n = x.len();
    let mut base = prob.grad_f(x)?;
    let cvals = prob.constraint_values(x)?;
    for (i, &li) in lam.iter().enumerate() {
        if li != 0.0 {
            axpy(li, &prob.grad_g(i, x)?, &mut base);
        }
    }

    let mut pieces = vec![
        Piece { oracle: prob.p.as_ref(), weight: 1.0, group: 0 },
        Piece { oracle: prob.u.as_ref(), weight: -1.0, group: 1 },
    ];
    for (c, &li) in prob.constraints.iter().zip(lam) {
        pieces.push(Piece { oracle: c.q.as_ref(), weight: li, group: 2 });
        pieces.push(Piece { oracle: c.v.as_ref(), weight: -li, group: 2 });
    }

    struct Prepared {
        selection: Vec<f64>,
        bounds: Option<(Vec<f64>, Vec<f64>)>,
        group: usize,
    }
    let mut prepared = Vec::new();
    for (idx, pc) in pieces.iter().enumerate() {
        if pc.weight == 0.0 || pc.oracle.is_zero() {
            continue;
        }
        let s = pc.oracle.subgradient(x);
        if !crate::linalg::all_finite(&s) {
            return Err(ScpError::NonFinite { oracle: format!("subgradient piece {idx}") });
        }
        let selection: Vec<f64> = s.iter().map(|v| pc.weight * v).collect();
        let bounds = if pc.oracle.smooth_lipschitz().is_some() {
            None
        } else {
            pc.oracle.subdifferential_box_near(x, KINK_TOL).map(|(l, h)| {
                let (a, b): (Vec<f64>, Vec<f64>) = l
                    .iter()
                    .zip(&h)
                    .map(|(l, h)| {
                        let (p, q) = (pc.weight * l, pc.weight * h);
                        (p.min(q), p.max(q))
                    })
                    .unzip();
                (a, b)
            })
        };
        prepared.push(Prepared { selection, bounds, group: pc.group });
    }

    let mut best = (f64::INFINITY, 0usize);
    for combo in 0..SELECTION_COMBINATIONS {
        let mut w = base.clone();
        let mut lo = vec![0.0; n];
        let mut hi = vec![0.0; n];
        for pr in &prepared {
            let use_box = combo & (1 << pr.group) != 0;
            match (&pr.bounds, use_box) {
                (Some((l, h)), true) => {
                    for j in 0..n {
                        lo[j] += l[j];
                        hi[j] += h[j];
                    }
                }
                _ => axpy(1.0, &pr.selection, &mut w),
            }
        }
        let z: Vec<f64> = (0..n).map(|j| x[j] - w[j] - (-w[j]).clamp(lo[j], hi[j])).collect();
        let r = dist(&prob.set.project(&z), x);
        if r < best.0 {
            best = (r, combo);
        }
    }

    let mut feasibility = cvals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let gap = prob.set.distance(x);
    if gap > 0.0 {
        feasibility = feasibility.max(gap);
    }
    let complementarity = cvals
        .iter()
        .zip(lam)
        .map(|(c, l)| (l * c).abs())
        .fold(0.0, f64::max);
    let active = cvals
        .iter()
        .enumerate()
        .filter(|(_, c)| c.abs() <= tol_active)
        .map(|(i, _)| i)
        .collect();
    Ok(KktResidual {
        stationarity: best.0,
        feasibility,
        complementarity,
        multipliers: lam.to_vec(),
        active,
        selection: best.1,
    })
}

/// Best feasible point of a uniform grid over the box `[lo, hi]`.
///
/// Feasibility uses tolerance `grid_step`. Returns `None` when no grid point is
/// feasible. Ties go to the lexicographically first grid point, so the result
/// does not depend on the evaluation order.
pub fn brute_force_minimize(
    prob: &ProblemInstance,
    lo: &[f64],
    hi: &[f64],
    grid_step: f64,
) -> Result<Option<(Vec<f64>, f64)>> {
    let n = prob.dim();
    if n > 3 {
        return Err(ScpError::input("brute-force search supports dim ≤ 3"));
    }
    if lo.len() != n || hi.len() != n {
        return Err(ScpError::input("grid box dimension mismatch"));
    }
    if !(grid_step > 0.0) {
        return Err(ScpError::input("grid step must be > 0"));
    }
    if lo.iter().zip(hi).any(|(a, b)| !(a.is_finite() && b.is_finite() && a <= b)) {
        return Err(ScpError::input("grid box must be bounded with lo ≤ hi"));
    }
    let counts: Vec<usize> = lo
        .iter()
        .zip(hi)
        .map(|(a, b)| ((b - a) / grid_step + 1e-9).floor() as usize + 1)
        .collect();
    let total: usize = counts.iter().product();
    let point = |mut idx: usize| -> Vec<f64> {
        let mut x = vec![0.0; n];
        for j in (0..n).rev() {
            x[j] = lo[j] + (idx % counts[j]) as f64 * grid_step;
            idx /= counts[j];
        }
        x
    };
    let best = (0..total)
        .into_par_iter()
        .filter_map(|idx| {
            let x = point(idx);
            match prob.is_feasible(&x, grid_step) {
                Ok(true) => prob.evaluate_objective(&x).ok().map(|v| (idx, v)),
                _ => None,
            }
        })
        .reduce_with(|a, b| {
            if b.1 < a.1 || (b.1 == a.1 && b.0 < a.0) {
                b
            } else {
                a
            }
        });
    Ok(best.map(|(idx, v)| (point(idx), v)))
}
