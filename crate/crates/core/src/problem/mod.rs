//! The structured program
//!
//! ```text
//!   minimize   f(x) + p(x) − u(x)
//!   subject to gᵢ(x) + qᵢ(x) − vᵢ(x) ≤ 0,  i = 0..m
//!              x ∈ X
//! ```
//!
//! with `f`, `gᵢ` smooth (Lipschitz gradients) and `p`, `u`, `qᵢ`, `vᵢ` convex.
//! Constraint indices are zero-based throughout the crate.

pub mod oracle;
pub mod set;
pub mod spec;

use std::fmt;
use std::sync::Arc;

pub use oracle::{
    ConvexOracle, Embedded, FnConvex, FnSmooth, LeastSquares, Quadratic, SmoothOracle, WeightedL1,
    Zero,
};
pub use set::{project_epigraph_abs, ConvexSet};

use crate::error::{Result, ScpError};
use crate::linalg::all_finite;

/// Default absolute tolerance for feasibility checks.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Proximal map of `t·p + ι_X` for problems where the pair admits a cheaper
/// combined formula than composing the two pieces.
pub trait JointProx: Send + Sync + fmt::Debug {
    fn prox(&self, z: &[f64], t: f64) -> Vec<f64>;
}

/// The three pieces of one constraint `gᵢ + qᵢ − vᵢ ≤ 0`.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub g: Arc<dyn SmoothOracle>,
    pub q: Arc<dyn ConvexOracle>,
    pub v: Arc<dyn ConvexOracle>,
}

#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub name: String,
    dim: usize,
    pub f: Arc<dyn SmoothOracle>,
    pub p: Arc<dyn ConvexOracle>,
    pub u: Arc<dyn ConvexOracle>,
    pub constraints: Vec<Constraint>,
    pub set: ConvexSet,
    pub joint_prox: Option<Arc<dyn JointProx>>,
}

fn check_value(name: impl fmt::Display, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ScpError::NonFinite { oracle: name.to_string() })
    }
}

fn check_vec(name: impl fmt::Display, v: Vec<f64>) -> Result<Vec<f64>> {
    if all_finite(&v) {
        Ok(v)
    } else {
        Err(ScpError::NonFinite { oracle: name.to_string() })
    }
}

impl ProblemInstance {
    pub fn new(
        name: impl Into<String>,
        f: Arc<dyn SmoothOracle>,
        p: Arc<dyn ConvexOracle>,
        u: Arc<dyn ConvexOracle>,
        set: ConvexSet,
    ) -> Result<Self> {
        let dim = set.dim();
        if dim == 0 {
            return Err(ScpError::input("problem dimension must be positive"));
        }
        set.validate()?;
        for (label, d) in [("f", f.dim()), ("p", p.dim()), ("u", u.dim())] {
            if d != dim {
                return Err(ScpError::input(format!(
                    "oracle {label} has dimension {d}, set has {dim}"
                )));
            }
        }
        if !(f.lipschitz().is_finite() && f.lipschitz() >= 0.0) {
            return Err(ScpError::input("L_f must be finite and ≥ 0"));
        }
        Ok(ProblemInstance {
            name: name.into(),
            dim,
            f,
            p,
            u,
            constraints: Vec::new(),
            set,
            joint_prox: None,
        })
    }

    pub fn with_constraint(
        mut self,
        g: Arc<dyn SmoothOracle>,
        q: Arc<dyn ConvexOracle>,
        v: Arc<dyn ConvexOracle>,
    ) -> Result<Self> {
        let i = self.constraints.len();
        for (label, d) in [("g", g.dim()), ("q", q.dim()), ("v", v.dim())] {
            if d != self.dim {
                return Err(ScpError::input(format!(
                    "constraint {i}: oracle {label} has dimension {d}, expected {}",
                    self.dim
                )));
            }
        }
        if !(g.lipschitz().is_finite() && g.lipschitz() >= 0.0) {
            return Err(ScpError::input(format!("constraint {i}: L_g must be finite and ≥ 0")));
        }
        self.constraints.push(Constraint { g, q, v });
        Ok(self)
    }

    pub fn with_joint_prox(mut self, jp: Arc<dyn JointProx>) -> Self {
        self.joint_prox = Some(jp);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of inequality constraints.
    pub fn m(&self) -> usize {
        self.constraints.len()
    }

    pub fn lipschitz_f(&self) -> f64 {
        self.f.lipschitz()
    }

    pub fn lipschitz_g(&self) -> Vec<f64> {
        self.constraints.iter().map(|c| c.g.lipschitz()).collect()
    }

    pub(crate) fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(ScpError::input(format!(
                "point has dimension {}, problem has {}",
                x.len(),
                self.dim
            )));
        }
        if !all_finite(x) {
            return Err(ScpError::input("point has non-finite entries"));
        }
        Ok(())
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.m() {
            return Err(ScpError::input(format!(
                "constraint index {i} out of range (m = {})",
                self.m()
            )));
        }
        Ok(())
    }

    /// `(f(x), p(x), u(x))`.
    pub fn objective_parts(&self, x: &[f64]) -> Result<(f64, f64, f64)> {
        self.check_point(x)?;
        Ok((
            check_value("f", self.f.value(x))?,
            check_value("p", self.p.value(x))?,
            check_value("u", self.u.value(x))?,
        ))
    }

    /// `F(x) = f(x) + p(x) − u(x)`.
    pub fn evaluate_objective(&self, x: &[f64]) -> Result<f64> {
        let (f, p, u) = self.objective_parts(x)?;
        check_value("F", f + p - u)
    }

    /// `(gᵢ(x), qᵢ(x), vᵢ(x))`.
    pub fn constraint_parts(&self, i: usize, x: &[f64]) -> Result<(f64, f64, f64)> {
        self.check_index(i)?;
        self.check_point(x)?;
        let c = &self.constraints[i];
        Ok((
            check_value(format_args!("g[{i}]"), c.g.value(x))?,
            check_value(format_args!("q[{i}]"), c.q.value(x))?,
            check_value(format_args!("v[{i}]"), c.v.value(x))?,
        ))
    }

    /// `gᵢ(x) + qᵢ(x) − vᵢ(x)`.
    pub fn evaluate_constraint(&self, i: usize, x: &[f64]) -> Result<f64> {
        let (g, q, v) = self.constraint_parts(i, x)?;
        Ok(g + q - v)
    }

    pub fn constraint_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        (0..self.m()).map(|i| self.evaluate_constraint(i, x)).collect()
    }

    /// Largest constraint value, `−∞` when there are no constraints.
    pub fn max_constraint(&self, x: &[f64]) -> Result<f64> {
        Ok(self
            .constraint_values(x)?
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max))
    }

    /// Membership of `X` and every constraint value `≤ tol`.
    pub fn is_feasible(&self, x: &[f64], tol: f64) -> Result<bool> {
        if !(tol >= 0.0) {
            return Err(ScpError::input("feasibility tolerance must be ≥ 0"));
        }
        self.check_point(x)?;
        if !self.set.contains(x, tol) {
            return Ok(false);
        }
        Ok(self.max_constraint(x)? <= tol)
    }

    pub fn grad_f(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_vec("∇f", self.f.gradient(x))
    }

    pub fn subgrad_u(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_vec("∂u", self.u.subgradient(x))
    }

    pub fn subgrad_p(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_vec("∂p", self.p.subgradient(x))
    }

    pub fn grad_g(&self, i: usize, x: &[f64]) -> Result<Vec<f64>> {
        check_vec(format_args!("∇g[{i}]"), self.constraints[i].g.gradient(x))
    }

    pub fn subgrad_q(&self, i: usize, x: &[f64]) -> Result<Vec<f64>> {
        check_vec(format_args!("∂q[{i}]"), self.constraints[i].q.subgradient(x))
    }

    pub fn subgrad_v(&self, i: usize, x: &[f64]) -> Result<Vec<f64>> {
        check_vec(format_args!("∂v[{i}]"), self.constraints[i].v.subgradient(x))
    }

    pub fn project(&self, z: &[f64]) -> Vec<f64> {
        self.set.project(z)
    }
}
