//! JSON descriptors for problem instances.
//!
//! ```json
//! {
//!   "dim": 2, "m": 1,
//!   "set": {"free": {"dim": 2}},
//!   "objective": {"f": {"quadratic": {"q": [[2,0],[0,2]]}}, "p": {"zero": {}}, "u": {"zero": {}}},
//!   "constraints": [{"g": {"quadratic": {"q": [[2,0],[0,2]], "b": [-4,0], "c": 3}}}]
//! }
//! ```
//!
//! Missing pieces default to zero. `custom` pieces are looked up by name in an
//! [`OracleRegistry`] populated from code.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::oracle::{ConvexOracle, LeastSquares, Quadratic, SmoothOracle, WeightedL1, Zero};
use super::{ConvexSet, ProblemInstance};
use crate::error::{Result, ScpError};
use crate::penalties::{build_sparse_nlp, PenaltySpec, PenaltyU};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothSpec {
    Zero {},
    Quadratic {
        q: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b: Option<Vec<f64>>,
        #[serde(default)]
        c: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lipschitz: Option<f64>,
    },
    LeastSquares { a: Vec<Vec<f64>>, b: Vec<f64> },
    Custom { name: String },
}

impl Default for SmoothSpec {
    fn default() -> Self {
        SmoothSpec::Zero {}
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvexSpec {
    Zero {},
    L1 {
        weight: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        coords: Option<Vec<usize>>,
    },
    /// Must be positive semidefinite.
    Quadratic {
        q: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b: Option<Vec<f64>>,
        #[serde(default)]
        c: f64,
    },
    /// The concave-part carrier `Σ (λ yⱼ − h(yⱼ))` over `y = x[offset .. offset + len]`.
    Penalty {
        spec: PenaltySpec,
        #[serde(default)]
        offset: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        len: Option<usize>,
    },
    Custom { name: String },
}

impl Default for ConvexSpec {
    fn default() -> Self {
        ConvexSpec::Zero {}
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    #[serde(default)]
    pub f: SmoothSpec,
    #[serde(default)]
    pub p: ConvexSpec,
    #[serde(default)]
    pub u: ConvexSpec,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    #[serde(default)]
    pub g: SmoothSpec,
    #[serde(default)]
    pub q: ConvexSpec,
    #[serde(default)]
    pub v: ConvexSpec,
}

/// A general instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub set: Option<ConvexSet>,
    #[serde(default)]
    pub objective: ObjectiveSpec,
    #[serde(default)]
    pub constraints: Vec<ConstraintSpec>,
    /// Suggested starting point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
}

/// `min_{x∈Ω} l(x) + Σ h(|xᵢ|)`, lifted to `(x, y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseNlpSpec {
    pub loss: SmoothSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<ConvexSet>,
    pub penalty: PenaltySpec,
    /// Starting point in the original variables `x`; lifted to `(x, |x|)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
}

/// Code-registered oracles referenced by `{"custom": {"name": ...}}`.
#[derive(Debug, Clone, Default)]
pub struct OracleRegistry {
    smooth: BTreeMap<String, Arc<dyn SmoothOracle>>,
    convex: BTreeMap<String, Arc<dyn ConvexOracle>>,
}

impl OracleRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register_smooth(&mut self, name: impl Into<String>, o: Arc<dyn SmoothOracle>) {
        self.smooth.insert(name.into(), o);
    }

    pub fn register_convex(&mut self, name: impl Into<String>, o: Arc<dyn ConvexOracle>) {
        self.convex.insert(name.into(), o);
    }

    fn smooth(&self, name: &str) -> Result<Arc<dyn SmoothOracle>> {
        self.smooth
            .get(name)
            .cloned()
            .ok_or_else(|| ScpError::input(format!("no smooth oracle registered as `{name}`")))
    }

    fn convex(&self, name: &str) -> Result<Arc<dyn ConvexOracle>> {
        self.convex
            .get(name)
            .cloned()
            .ok_or_else(|| ScpError::input(format!("no convex oracle registered as `{name}`")))
    }
}

fn build_quadratic(q: &[Vec<f64>], b: &Option<Vec<f64>>, c: f64, dim: usize) -> Result<Quadratic> {
    let b = b.clone().unwrap_or_else(|| vec![0.0; dim]);
    if b.len() != dim {
        return Err(ScpError::input(format!("quadratic: b has length {}, expected {dim}", b.len())));
    }
    Quadratic::new(q.to_vec(), b, c)
}

impl SmoothSpec {
    pub fn build(&self, dim: usize, reg: &OracleRegistry) -> Result<Arc<dyn SmoothOracle>> {
        let o: Arc<dyn SmoothOracle> = match self {
            SmoothSpec::Zero {} => Arc::new(Zero { dim }),
            SmoothSpec::Quadratic { q, b, c, lipschitz } => {
                let quad = build_quadratic(q, b, *c, dim)?;
                Arc::new(match lipschitz {
                    Some(l) => quad.with_lipschitz(*l)?,
                    None => quad,
                })
            }
            SmoothSpec::LeastSquares { a, b } => Arc::new(LeastSquares::new(a.clone(), b.clone())?),
            SmoothSpec::Custom { name } => reg.smooth(name)?,
        };
        if o.dim() != dim {
            return Err(ScpError::input(format!(
                "smooth oracle has dimension {}, expected {dim}",
                o.dim()
            )));
        }
        Ok(o)
    }
}

impl ConvexSpec {
    pub fn build(&self, dim: usize, reg: &OracleRegistry) -> Result<Arc<dyn ConvexOracle>> {
        let o: Arc<dyn ConvexOracle> = match self {
            ConvexSpec::Zero {} => Arc::new(Zero { dim }),
            ConvexSpec::L1 { weight, coords } => Arc::new(match coords {
                Some(c) => WeightedL1::on_coords(dim, *weight, c.clone())?,
                None => WeightedL1::new(dim, *weight)?,
            }),
            ConvexSpec::Quadratic { q, b, c } => {
                Arc::new(build_quadratic(q, b, *c, dim)?.into_convex()?)
            }
            ConvexSpec::Penalty { spec, offset, len } => {
                let len = len.unwrap_or(dim.saturating_sub(*offset));
                Arc::new(PenaltyU::new(*spec, *offset, len, dim)?)
            }
            ConvexSpec::Custom { name } => reg.convex(name)?,
        };
        if o.dim() != dim {
            return Err(ScpError::input(format!(
                "convex oracle has dimension {}, expected {dim}",
                o.dim()
            )));
        }
        Ok(o)
    }
}

impl ProblemSpec {
    pub fn build(&self, reg: &OracleRegistry) -> Result<ProblemInstance> {
        let dim = self.dim;
        if let Some(m) = self.m {
            if m != self.constraints.len() {
                return Err(ScpError::input(format!(
                    "m = {m} but {} constraints given",
                    self.constraints.len()
                )));
            }
        }
        let set = self.set.clone().unwrap_or(ConvexSet::free(dim));
        if set.dim() != dim {
            return Err(ScpError::input(format!("set has dimension {}, dim = {dim}", set.dim())));
        }
        let o = &self.objective;
        let mut prob = ProblemInstance::new(
            self.name.clone().unwrap_or_else(|| "problem".into()),
            o.f.build(dim, reg)?,
            o.p.build(dim, reg)?,
            o.u.build(dim, reg)?,
            set,
        )?;
        for c in &self.constraints {
            prob = prob.with_constraint(c.g.build(dim, reg)?, c.q.build(dim, reg)?, c.v.build(dim, reg)?)?;
        }
        Ok(prob)
    }
}

impl SparseNlpSpec {
    pub fn build(&self, reg: &OracleRegistry) -> Result<ProblemInstance> {
        let n = match &self.loss {
            SmoothSpec::LeastSquares { a, .. } => a.first().map_or(0, Vec::len),
            SmoothSpec::Quadratic { q, .. } => q.len(),
            SmoothSpec::Custom { name } => reg.smooth(name)?.dim(),
            SmoothSpec::Zero {} => self
                .omega
                .as_ref()
                .map(ConvexSet::dim)
                .ok_or_else(|| ScpError::input("zero loss needs omega to fix the dimension"))?,
        };
        let loss = self.loss.build(n, reg)?;
        let omega = self.omega.clone().unwrap_or(ConvexSet::free(n));
        build_sparse_nlp(loss, omega, self.penalty)
    }

    pub fn lifted_x0(&self) -> Option<Vec<f64>> {
        self.x0.as_deref().map(crate::penalties::lift)
    }
}
