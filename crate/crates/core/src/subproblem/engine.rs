//! Augmented Lagrangian over the model constraints, with each penalized
//! problem solved by accelerated proximal gradient.
//!
//! Constraint pieces `qᵢ` that are nonsmooth but expose an epigraph
//! projection are lifted: `qᵢ(y) ≤ tᵢ` joins the nonsmooth part and `tᵢ`
//! replaces `qᵢ(y)` in the penalized constraint, which keeps the penalty term
//! smooth. When another block already acts on `y`, the epigraph holds a copy
//! `wᵢ` of `y` tied to it by the equality `wᵢ = y` in the augmented Lagrangian,
//! so every block's proximal map stays exact. The remaining case of a general
//! set with a nonsmooth p uses the parallel Dykstra-like splitting.

use crate::error::{BestResiduals, Result, ScpError};
use crate::linalg::{axpy, dot, norm, norm_sq};
use crate::problem::set::DYKSTRA_MAX_ITER;

use super::{Residuals, SubproblemData, SubproblemOptions};


const BLOCK_SPLIT_TOL: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq)]
enum QKind {
    None,
    Smooth,
    /// Index of the epigraph variable and, if present, the start of the copy of `y`.
    Lifted { slot: usize, copy: Option<usize> },
    /// No prox or epigraph projection: handled by subgradient steps.
    Subgradient,
}

#[derive(Debug, Clone)]
enum Block {
    Joint,
    Prox,
    Project,
    /// Separable p restricted to per-coordinate bounds.
    ClampedProx { lo: Vec<f64>, hi: Vec<f64>, with_p: bool },
    Epigraph { constraint: usize, slot: usize, copy: Option<usize> },
}

/// `lin·(y − x) + (curv/2)‖y − center‖² [+ p(y)]` over the model set.
pub(crate) struct Program<'s, 'p> {
    pub sub: &'s SubproblemData<'p>,
    pub lin: Vec<f64>,
    pub curv: f64,
    pub center: Vec<f64>,
    with_p: bool,
    p_smooth: bool,
    qkinds: Vec<QKind>,
    n: usize,
    n_lift: usize,
    /// Offsets of the copies of `y` in the lifted vector.
    copies: Vec<usize>,
    blocks: Vec<Block>,
}

pub(crate) struct InnerOutcome {
    pub y: Vec<f64>,
    pub multipliers: Vec<f64>,
    pub residuals: Residuals,
    pub inner_iterations: usize,
    pub rounds: usize,
}

/// What the inner solver must reach before returning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolveTarget {
    /// All residuals (two-sided complementarity) ≤ tol.
    Exact(f64),
    /// The approximate KKT system (one-sided complementarity) within eps.
    Approximate { eps: f64, floor: f64 },
}

impl SolveTarget {
    fn level(&self) -> f64 {
        match *self {
            SolveTarget::Exact(t) => t,
            SolveTarget::Approximate { eps, .. } => eps,
        }
    }

    fn inner_floor(&self) -> f64 {
        match *self {
            SolveTarget::Exact(t) => (1e-3 * t).max(1e-15),
            SolveTarget::Approximate { eps, floor } => (1e-3 * eps).max(floor).max(1e-15),
        }
    }

    fn inner_start(&self) -> f64 {
        match *self {
            SolveTarget::Exact(t) => 0.1 * t,
            SolveTarget::Approximate { eps, floor } => (0.1 * eps).max(floor),
        }
    }

    pub fn met(&self, r: &Residuals) -> bool {
        let t = self.level();
        match self {
            SolveTarget::Exact(_) => {
                r.stationarity <= t && r.feasibility <= t && r.complementarity_abs <= t
            }
            SolveTarget::Approximate { .. } => {
                r.stationarity <= t && r.feasibility <= t && r.complementarity <= t
            }
        }
    }
}

impl<'s, 'p> Program<'s, 'p> {
    pub fn new(
        sub: &'s SubproblemData<'p>,
        lin: Vec<f64>,
        curv: f64,
        center: Vec<f64>,
        with_p: bool,
    ) -> Result<Self> {
        let prob = sub.prob;
        let n = prob.dim();
        let p_smooth = with_p && prob.p.smooth_lipschitz().is_some() && !prob.p.is_zero();
        let p_nonsmooth = with_p && !prob.p.is_zero() && !p_smooth;

        let mut blocks = Vec::new();
        if p_nonsmooth && prob.joint_prox.is_some() {
            blocks.push(Block::Joint);
        } else {
            if p_nonsmooth && prob.p.prox(&sub.x, 1.0).is_none() {
                return Err(ScpError::config(
                    "the nonsmooth objective piece p has no proximal map",
                ));
            }
            match prob.set.coordinate_bounds() {
                Some((lo, hi)) if !p_nonsmooth || prob.p.is_separable() => {
                    if p_nonsmooth || !prob.set.is_free() {
                        blocks.push(Block::ClampedProx { lo, hi, with_p: p_nonsmooth });
                    }
                }
                _ => {
                    if p_nonsmooth {
                        blocks.push(Block::Prox);
                    }
                    if !prob.set.is_free() {
                        blocks.push(Block::Project);
                    }
                }
            }
        }
        let mut qkinds = Vec::with_capacity(prob.m());
        let mut copies = Vec::new();
        let mut len = n;
        let mut y_taken = !blocks.is_empty();
        for (i, c) in prob.constraints.iter().enumerate() {
            let probe_y = &sub.x;
            let kind = if c.q.is_zero() {
                QKind::None
            } else if c.q.smooth_lipschitz().is_some() {
                QKind::Smooth
            } else if c.q.project_epigraph(probe_y, c.q.value(probe_y)).is_some() {
                let copy = if y_taken {
                    copies.push(len);
                    len += n;
                    Some(len - n)
                } else {
                    y_taken = true;
                    None
                };
                let slot = len;
                len += 1;
                blocks.push(Block::Epigraph { constraint: i, slot, copy });
                QKind::Lifted { slot, copy }
            } else {
                QKind::Subgradient
            };
            qkinds.push(kind);
        }
        let n_lift = len - n;

        Ok(Program { sub, lin, curv, center, with_p, p_smooth, qkinds, n, n_lift, copies, blocks })
    }

    fn uses_subgradient_path(&self) -> bool {
        self.qkinds.contains(&QKind::Subgradient)
    }

    pub fn includes_p(&self) -> bool {
        self.with_p
    }

    /// Smooth objective part and its gradient at `y`.
    fn objective_smooth(&self, y: &[f64]) -> (f64, Vec<f64>) {
        let x = &self.sub.x;
        let mut val = 0.0;
        let mut grad = self.lin.clone();
        for j in 0..self.n {
            let dc = y[j] - self.center[j];
            val += self.lin[j] * (y[j] - x[j]) + 0.5 * self.curv * dc * dc;
            grad[j] += self.curv * dc;
        }
        if self.p_smooth {
            let p = &self.sub.prob.p;
            val += p.value(y);
            axpy(1.0, &p.subgradient(y), &mut grad);
        }
        (val, grad)
    }

    /// Gradient of the smooth objective part.
    pub fn objective_gradient(&self, y: &[f64]) -> Vec<f64> {
        self.objective_smooth(y).1
    }

    /// Constraint `i` in the penalized form, with its gradient over the lifted vector.
    fn penalized_constraint(&self, i: usize, z: &[f64]) -> (f64, Vec<f64>) {
        let y = &z[..self.n];
        let (mut val, gy) = self.sub.base_constraint(i, y);
        let mut grad = vec![0.0; self.n + self.n_lift];
        grad[..self.n].copy_from_slice(&gy);
        let q = &self.sub.prob.constraints[i].q;
        match self.qkinds[i] {
            QKind::None => {}
            QKind::Smooth | QKind::Subgradient => {
                val += q.value(y);
                axpy(1.0, &q.subgradient(y), &mut grad[..self.n]);
            }
            QKind::Lifted { slot, .. } => {
                val += z[slot];
                grad[slot] = 1.0;
            }
        }
        (val, grad)
    }

    /// Augmented Lagrangian (smooth part) and gradient. `mu` holds the
    /// multipliers of the copy equalities, `n` entries per copy.
    fn al_value_grad(&self, z: &[f64], lam: &[f64], mu: &[f64], rho: f64) -> (f64, Vec<f64>) {
        let n = self.n;
        let (mut val, gy) = self.objective_smooth(&z[..n]);
        let mut grad = vec![0.0; n + self.n_lift];
        grad[..n].copy_from_slice(&gy);
        for (c, &off) in self.copies.iter().enumerate() {
            for j in 0..n {
                let e = z[off + j] - z[j];
                let mj = mu[c * n + j];
                val += mj * e + 0.5 * rho * e * e;
                let g = mj + rho * e;
                grad[off + j] += g;
                grad[j] -= g;
            }
        }
        for (i, &li) in lam.iter().enumerate() {
            let (gi, dgi) = self.penalized_constraint(i, z);
            let shifted = (li + rho * gi).max(0.0);
            val += (shifted * shifted - li * li) / (2.0 * rho);
            if shifted > 0.0 {
                axpy(shifted, &dgi, &mut grad);
            }
        }
        (val, grad)
    }

    fn apply_block(&self, block: &Block, z: &[f64], step: f64) -> Vec<f64> {
        let prob = self.sub.prob;
        let n = self.n;
        let mut out = z.to_vec();
        match block {
            Block::Joint => {
                let jp = prob.joint_prox.as_ref().expect("joint block without joint prox");
                out[..n].copy_from_slice(&jp.prox(&z[..n], step));
            }
            Block::Prox => {
                let y = prob.p.prox(&z[..n], step).expect("checked at construction");
                out[..n].copy_from_slice(&y);
            }
            Block::Project => {
                out[..n].copy_from_slice(&prob.set.project(&z[..n]));
            }
            Block::ClampedProx { lo, hi, with_p } => {
                let y = if *with_p {
                    prob.p.prox(&z[..n], step).expect("checked at construction")
                } else {
                    z[..n].to_vec()
                };
                for j in 0..n {
                    out[j] = y[j].clamp(lo[j], hi[j]);
                }
            }
            Block::Epigraph { constraint, slot, copy } => {
                let q = &prob.constraints[*constraint].q;
                let off = copy.unwrap_or(0);
                let (y, t) = q
                    .project_epigraph(&z[off..off + n], z[*slot])
                    .expect("lifted piece has an epigraph projection");
                out[off..off + n].copy_from_slice(&y);
                out[*slot] = t;
            }
        }
        out
    }

    /// Prox of `step·Ψ` where Ψ is the sum of all nonsmooth blocks.
    fn prox(&self, r: &[f64], step: f64) -> Vec<f64> {
        let k = self.blocks.len();
        match k {
            0 => r.to_vec(),
            1 => self.apply_block(&self.blocks[0], r, step),
            _ => {
                let kf = k as f64;
                let mut x = r.to_vec();
                let mut incr = vec![vec![0.0; r.len()]; k];
                for _ in 0..DYKSTRA_MAX_ITER {
                    let mut next = vec![0.0; r.len()];
                    for (b, p) in self.blocks.iter().zip(incr.iter_mut()) {
                        let shifted: Vec<f64> = x.iter().zip(p.iter()).map(|(a, c)| a + c).collect();
                        let yb = self.apply_block(b, &shifted, kf * step);
                        for j in 0..r.len() {
                            p[j] = shifted[j] - yb[j];
                            next[j] += yb[j] / kf;
                        }
                    }
                    let moved = x
                        .iter()
                        .zip(&next)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                    x = next;
                    if moved <= BLOCK_SPLIT_TOL * (1.0 + norm(&x)) {
                        break;
                    }
                }
                x
            }
        }
    }

    fn lift(&self, y: &[f64]) -> Vec<f64> {
        let mut z = y.to_vec();
        z.resize(self.n + self.n_lift, 0.0);
        for &off in &self.copies {
            z[off..off + self.n].copy_from_slice(y);
        }
        for (i, k) in self.qkinds.iter().enumerate() {
            if let QKind::Lifted { slot, .. } = *k {
                z[slot] = self.sub.prob.constraints[i].q.value(y);
            }
        }
        z
    }

    /// Accelerated proximal gradient with backtracking and gradient restart.
    /// Returns `(z, iterations, converged)`.
    fn fista(
        &self,
        z0: Vec<f64>,
        lam: &[f64],
        mu: &[f64],
        rho: f64,
        tol: f64,
        max_iter: usize,
        lip: &mut f64,
    ) -> Result<(Vec<f64>, usize, bool)> {
        let mut z = z0;
        let mut w = z.clone();
        let mut theta = 1.0_f64;
        for it in 0..max_iter {
            let (fw, gw) = self.al_value_grad(&w, lam, mu, rho);
            let (z_new, d) = loop {
                let step = 1.0 / *lip;
                let mut trial = w.clone();
                axpy(-step, &gw, &mut trial);
                let z_new = self.prox(&trial, step);
                let d: Vec<f64> = z_new.iter().zip(&w).map(|(a, b)| a - b).collect();
                let (fz, _) = self.al_value_grad(&z_new, lam, mu, rho);
                let model = fw + dot(&gw, &d) + 0.5 * *lip * norm_sq(&d);
                if fz <= model + 1e-14 * (1.0 + fw.abs()) {
                    break (z_new, d);
                }
                *lip *= 2.0;
                if !lip.is_finite() || *lip > 1e30 {
                    return Err(ScpError::Internal(
                        "step-size search diverged in the inner solver".into(),
                    ));
                }
            };
            let gmap = *lip * norm(&d);
            if gmap <= tol {
                return Ok((z_new, it + 1, true));
            }
            // Gradient-based adaptive restart.
            let restart = d
                .iter()
                .zip(z_new.iter().zip(&z))
                .map(|(dw, (zn, zo))| -dw * (zn - zo))
                .sum::<f64>()
                > 0.0;
            if restart {
                theta = 1.0;
                w = z_new.clone();
            } else {
                let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
                let beta = (theta - 1.0) / theta_next;
                w = z_new.iter().zip(&z).map(|(a, b)| a + beta * (a - b)).collect();
                theta = theta_next;
            }
            z = z_new;
        }
        Ok((z, max_iter, false))
    }

    /// Projected subgradient steps on the penalized problem; keeps the best point.
    fn subgradient_descent(
        &self,
        z0: Vec<f64>,
        lam: &[f64],
        mu: &[f64],
        rho: f64,
        max_iter: usize,
    ) -> (Vec<f64>, usize) {
        let bound: f64 = (0..lam.len())
            .map(|i| {
                let (_, g) = self.penalized_constraint(i, &z0);
                norm_sq(&g) + self.sub.l_g[i]
            })
            .sum();
        let base_step = 1.0 / (self.curv.max(1e-12) + rho * bound);
        let mut z = z0;
        let mut best = z.clone();
        let mut best_val = f64::INFINITY;
        for j in 0..max_iter {
            let (v, g) = self.al_value_grad(&z, lam, mu, rho);
            let total = v + if self.with_p && !self.p_smooth {
                self.sub.prob.p.value(&z[..self.n])
            } else {
                0.0
            };
            if total < best_val {
                best_val = total;
                best = z.clone();
            }
            let step = base_step / ((j + 1) as f64).sqrt();
            let mut trial = z.clone();
            axpy(-step, &g, &mut trial);
            z = self.prox(&trial, step);
        }
        (best, max_iter)
    }

    /// Residuals of the model KKT system at `(y, λ)` with the true `qᵢ`.
    pub fn residuals(&self, y: &[f64], lam: &[f64]) -> Residuals {
        super::residuals_for(self, y, lam)
    }

    pub fn solve(
        &self,
        y0: &[f64],
        lam0: Option<&[f64]>,
        target: SolveTarget,
        opts: &SubproblemOptions,
        accept_start: bool,
    ) -> Result<InnerOutcome> {
        let m = self.sub.prob.m();
        let mut lam: Vec<f64> = match lam0 {
            Some(l) if l.len() == m => l.iter().map(|v| v.max(0.0)).collect(),
            _ => vec![0.0; m],
        };
        let mut mu = vec![0.0; self.copies.len() * self.n];
        let mut rho = opts.penalty0;
        let mut lip = self.curv.max(1e-8);
        let mut z = self.lift(y0);
        if self.sub.prob.set.contains(y0, 0.0) {
            let res = self.residuals(y0, &lam);
            if accept_start && target.met(&res) {
                return Ok(InnerOutcome {
                    y: y0.to_vec(),
                    multipliers: lam,
                    residuals: res,
                    inner_iterations: 0,
                    rounds: 0,
                });
            }
        } else {
            z = self.lift(&self.prox(&z, 1e-12)[..self.n]);
        }
        let mut inner_tol = target.inner_start();
        let mut total_inner = 0;
        let mut prev_viol = f64::INFINITY;
        let mut best: Option<Residuals> = None;
        let mut history = Vec::new();

        for round in 0..opts.max_rounds {
            let (z_new, iters) = if self.uses_subgradient_path() {
                self.subgradient_descent(z.clone(), &lam, &mu, rho, opts.max_inner)
            } else {
                lip = (lip / 4.0).max(self.curv.max(1e-8));
                let (zn, it, _) = self.fista(z.clone(), &lam, &mu, rho, inner_tol, opts.max_inner, &mut lip)?;
                (zn, it)
            };
            total_inner += iters;
            z = z_new;
            let y = z[..self.n].to_vec();

            let mut viol: f64 = 0.0;
            for i in 0..m {
                let (gi, _) = self.penalized_constraint(i, &z);
                let next = (lam[i] + rho * gi).max(0.0);
                viol = viol.max(gi.max(-lam[i] / rho).abs());
                lam[i] = next;
            }
            for (c, &off) in self.copies.iter().enumerate() {
                for j in 0..self.n {
                    let e = z[off + j] - z[j];
                    mu[c * self.n + j] += rho * e;
                    viol = viol.max(e.abs());
                }
            }
            if lam.iter().any(|l| *l > opts.multiplier_cap) {
                return Err(ScpError::Infeasible(format!(
                    "multiplier exceeded the safeguard {:.1e} after {} AL rounds; \
                     the model constraints may have no feasible point",
                    opts.multiplier_cap,
                    round + 1
                )));
            }

            let res = self.residuals(&y, &lam);
            history.push(res);
            if best.map_or(true, |b| res.max_violation() < b.max_violation()) {
                best = Some(res);
            }
            if target.met(&res) {
                return Ok(InnerOutcome {
                    y,
                    multipliers: lam,
                    residuals: res,
                    inner_iterations: total_inner,
                    rounds: round + 1,
                });
            }
            if m > 0 {
                if viol > 0.5 * prev_viol {
                    rho *= opts.penalty_growth;
                }
                prev_viol = viol;
            }
            if res.stationarity > target.level() {
                inner_tol = (inner_tol * 0.1).max(target.inner_floor());
            }
        }

        let best = best.unwrap_or(Residuals::infinite());
        let diagnostic = serde_json::to_string(&serde_json::json!({
            "subproblem": self.sub.diagnostic_json(),
            "residual_history": history,
            "last_point": &z[..self.n],
            "last_multipliers": lam,
        }))
        .ok();
        Err(ScpError::NonConvergence {
            iterations: total_inner,
            best: BestResiduals {
                stationarity: best.stationarity,
                feasibility: best.feasibility,
                complementarity: best.complementarity_abs,
            },
            diagnostic,
        })
    }
}
