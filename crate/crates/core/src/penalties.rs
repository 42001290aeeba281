//! Separable sparsity penalties `h : ℝ₊ → ℝ`, their DC split
//! `h(t) = λt − (λt − h(t))`, and the lifted sparse program
//!
//! ```text
//!   min l(x) + λ‖y‖₁ − Σ (λ yᵢ − h(yᵢ))   s.t.  y ≥ |x|,  x ∈ Ω.
//! ```

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, ScpError};
use crate::problem::oracle::{ConvexOracle, Embedded, SmoothOracle, WeightedL1};
use crate::problem::{ConvexSet, JointProx, ProblemInstance};

/// One of the five supported penalties. JSON form: `{"kind": "scad", "lambda": 1.0, "a": 3.7}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PenaltySpec {
    L1 { lambda: f64 },
    Scad { lambda: f64, a: f64 },
    /// `λ (t + ε)^q`; note `h(0) = λ ε^q ≠ 0`.
    Lq { lambda: f64, q: f64, eps: f64 },
    /// `λ log(t + ε) − λ log ε`.
    Log { lambda: f64, eps: f64 },
    CappedL1 { lambda: f64, eta: f64 },
}

impl PenaltySpec {
    pub fn lambda(&self) -> f64 {
        match *self {
            PenaltySpec::L1 { lambda }
            | PenaltySpec::Scad { lambda, .. }
            | PenaltySpec::Lq { lambda, .. }
            | PenaltySpec::Log { lambda, .. }
            | PenaltySpec::CappedL1 { lambda, .. } => lambda,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            PenaltySpec::L1 { .. } => "l1",
            PenaltySpec::Scad { .. } => "scad",
            PenaltySpec::Lq { .. } => "lq",
            PenaltySpec::Log { .. } => "log",
            PenaltySpec::CappedL1 { .. } => "capped_l1",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(ScpError::input(format!("penalty parameter {name} must be > 0, got {v}")))
            }
        };
        pos("lambda", self.lambda())?;
        match *self {
            PenaltySpec::L1 { .. } => Ok(()),
            PenaltySpec::Scad { a, .. } => {
                if a.is_finite() && a > 1.0 {
                    Ok(())
                } else {
                    Err(ScpError::input(format!("SCAD needs a > 1, got {a}")))
                }
            }
            PenaltySpec::Lq { q, eps, .. } => {
                pos("eps", eps)?;
                if q > 0.0 && q < 1.0 {
                    Ok(())
                } else {
                    Err(ScpError::input(format!("lq needs 0 < q < 1, got {q}")))
                }
            }
            PenaltySpec::Log { eps, .. } => pos("eps", eps),
            PenaltySpec::CappedL1 { eta, .. } => pos("eta", eta),
        }
    }

    /// Points where the branch formula changes.
    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            PenaltySpec::Scad { lambda, a } => vec![lambda, a * lambda],
            PenaltySpec::CappedL1 { eta, .. } => vec![eta],
            _ => Vec::new(),
        }
    }

    /// `h(t)` without the domain check.
    pub(crate) fn h(&self, t: f64) -> f64 {
        match *self {
            PenaltySpec::L1 { lambda } => lambda * t,
            PenaltySpec::Scad { lambda, a } => {
                if t <= lambda {
                    lambda * t
                } else if t <= a * lambda {
                    (-t * t + 2.0 * a * lambda * t - lambda * lambda) / (2.0 * (a - 1.0))
                } else {
                    (a + 1.0) * lambda * lambda / 2.0
                }
            }
            PenaltySpec::Lq { lambda, q, eps } => lambda * (t + eps).powf(q),
            PenaltySpec::Log { lambda, eps } => lambda * (t + eps).ln() - lambda * eps.ln(),
            PenaltySpec::CappedL1 { lambda, eta } => {
                if t < eta {
                    lambda * t
                } else {
                    lambda * eta
                }
            }
        }
    }

    /// Right derivative `h′(t⁺)`.
    pub(crate) fn h_prime_right(&self, t: f64) -> f64 {
        match *self {
            PenaltySpec::L1 { lambda } => lambda,
            PenaltySpec::Scad { lambda, a } => {
                if t < lambda {
                    lambda
                } else if t < a * lambda {
                    (a * lambda - t) / (a - 1.0)
                } else {
                    0.0
                }
            }
            PenaltySpec::Lq { lambda, q, eps } => lambda * q * (t + eps).powf(q - 1.0),
            PenaltySpec::Log { lambda, eps } => lambda / (t + eps),
            PenaltySpec::CappedL1 { lambda, eta } => {
                if t < eta {
                    lambda
                } else {
                    0.0
                }
            }
        }
    }

    /// Left derivative `h′(t⁻)` for `t > 0`.
    pub(crate) fn h_prime_left(&self, t: f64) -> f64 {
        match *self {
            PenaltySpec::CappedL1 { lambda, eta } => {
                if t <= eta {
                    lambda
                } else {
                    0.0
                }
            }
            // SCAD is C¹; the others are smooth on (0, ∞).
            _ => self.h_prime_right(t),
        }
    }
}

fn check_nonneg(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(ScpError::input(format!("penalty argument must be finite and ≥ 0, got {t}")))
    }
}

/// `h(t)` for `t ≥ 0`.
pub fn penalty_value(spec: &PenaltySpec, t: f64) -> Result<f64> {
    check_nonneg(t)?;
    Ok(spec.h(t))
}

/// `u(y) = Σᵢ (λ yᵢ − h(yᵢ))`, convex on the nonnegative orthant.
pub fn u_value(spec: &PenaltySpec, y: &[f64]) -> Result<f64> {
    let lambda = spec.lambda();
    y.iter().try_fold(0.0, |acc, &t| {
        check_nonneg(t)?;
        Ok(acc + (lambda * t - spec.h(t)))
    })
}

/// Componentwise `λ − h′(yᵢ⁺)`, the right-derivative selection from `∂u(y)`.
/// Negative components are read as `0`.
pub fn u_subgradient(spec: &PenaltySpec, y: &[f64]) -> Vec<f64> {
    let lambda = spec.lambda();
    y.iter()
        .map(|&t| lambda - spec.h_prime_right(t.max(0.0)))
        .collect()
}

/// `u` of a penalty acting on the block `x[offset .. offset + len]` of an
/// ambient vector of dimension `dim`.
#[derive(Debug, Clone)]
pub struct PenaltyU {
    spec: PenaltySpec,
    offset: usize,
    len: usize,
    dim: usize,
}

impl PenaltyU {
    pub fn new(spec: PenaltySpec, offset: usize, len: usize, dim: usize) -> Result<Self> {
        spec.validate()?;
        if offset + len > dim {
            return Err(ScpError::input("penalty block exceeds the ambient dimension"));
        }
        Ok(PenaltyU { spec, offset, len, dim })
    }

    pub fn spec(&self) -> &PenaltySpec {
        &self.spec
    }

    fn block<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[self.offset..self.offset + self.len]
    }
}

impl ConvexOracle for PenaltyU {
    fn dim(&self) -> usize {
        self.dim
    }

    /// NaN outside the nonnegative orthant so the caller reports a domain fault.
    fn value(&self, x: &[f64]) -> f64 {
        u_value(&self.spec, self.block(x)).unwrap_or(f64::NAN)
    }

    fn subgradient(&self, x: &[f64]) -> Vec<f64> {
        let mut s = vec![0.0; self.dim];
        s[self.offset..self.offset + self.len]
            .copy_from_slice(&u_subgradient(&self.spec, self.block(x)));
        s
    }

    fn subdifferential_box(&self, x: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let lambda = self.spec.lambda();
        let mut lo = vec![0.0; self.dim];
        let mut hi = vec![0.0; self.dim];
        for (j, &t) in self.block(x).iter().enumerate() {
            let t = t.max(0.0);
            let right = lambda - self.spec.h_prime_right(t);
            let left = if t > 0.0 { lambda - self.spec.h_prime_left(t) } else { right };
            lo[self.offset + j] = left.min(right);
            hi[self.offset + j] = left.max(right);
        }
        Some((lo, hi))
    }
}

/// Prox of `t λ Σ yᵢ + ι_X` on `X = {y ≥ |x|, x ∈ Ω}`: on `X` the ℓ₁ term is
/// linear, so the prox is a shifted projection.
#[derive(Debug, Clone)]
struct LiftedL1Prox {
    n: usize,
    lambda: f64,
    set: ConvexSet,
}

impl JointProx for LiftedL1Prox {
    fn prox(&self, z: &[f64], t: f64) -> Vec<f64> {
        let mut shifted = z.to_vec();
        for v in &mut shifted[self.n..] {
            *v -= t * self.lambda;
        }
        self.set.project(&shifted)
    }
}

/// Build the lifted `2n`-dimensional instance over `(x, y)` for
/// `min_{x∈Ω} l(x) + Σ h(|xᵢ|)`.
pub fn build_sparse_nlp(
    loss: Arc<dyn SmoothOracle>,
    omega: ConvexSet,
    spec: PenaltySpec,
) -> Result<ProblemInstance> {
    spec.validate()?;
    let n = loss.dim();
    if omega.dim() != n {
        return Err(ScpError::input(format!(
            "Ω has dimension {}, loss has {n}",
            omega.dim()
        )));
    }
    let dim = 2 * n;
    let lambda = spec.lambda();
    let set = ConvexSet::EpiAbsProduct { omega: Box::new(omega) };
    let f = Embedded::new(loss, 0, dim)?;
    let p = WeightedL1::on_coords(dim, lambda, (n..dim).collect())?;
    let u = PenaltyU::new(spec, n, n, dim)?;
    let prob = ProblemInstance::new(
        format!("sparse_{}", spec.kind()),
        Arc::new(f),
        Arc::new(p),
        Arc::new(u),
        set.clone(),
    )?;
    Ok(prob.with_joint_prox(Arc::new(LiftedL1Prox { n, lambda, set })))
}

/// `(x, |x|)`, a feasible lift of any `x ∈ Ω`.
pub fn lift(x: &[f64]) -> Vec<f64> {
    x.iter().copied().chain(x.iter().map(|v| v.abs())).collect()
}

/// The unlifted objective `l(x) + Σ h(|xᵢ|)`.
pub fn sparse_objective(loss: &dyn SmoothOracle, spec: &PenaltySpec, x: &[f64]) -> f64 {
    loss.value(x) + x.iter().map(|v| spec.h(v.abs())).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCAD: PenaltySpec = PenaltySpec::Scad { lambda: 1.0, a: 3.7 };

    #[test]
    fn scad_branches() {
        assert_eq!(penalty_value(&SCAD, 1.0).unwrap(), 1.0);
        assert!((penalty_value(&SCAD, 3.7).unwrap() - 2.35).abs() < 1e-12);
        assert!((penalty_value(&SCAD, 2.0).unwrap() - 9.8 / 5.4).abs() < 1e-12);
    }

    #[test]
    fn capped_l1_flat_branch() {
        let c = PenaltySpec::CappedL1 { lambda: 2.0, eta: 0.5 };
        assert_eq!(penalty_value(&c, 3.0).unwrap(), 1.0);
        assert_eq!(u_subgradient(&c, &[0.2]), vec![0.0]);
    }

    #[test]
    fn negative_argument_rejected() {
        assert!(penalty_value(&SCAD, -0.1).is_err());
        assert!(u_value(&SCAD, &[1.0, -1.0]).is_err());
    }

    #[test]
    fn u_examples() {
        let l1 = PenaltySpec::L1 { lambda: 0.7 };
        assert_eq!(u_value(&l1, &[0.0, 3.0, 9.0]).unwrap(), 0.0);
        assert_eq!(u_subgradient(&l1, &[0.0, 3.0]), vec![0.0, 0.0]);
        let log = PenaltySpec::Log { lambda: 1.0, eps: 1.0 };
        assert_eq!(u_value(&log, &[0.0, 0.0]).unwrap(), 0.0);
        assert!((u_value(&SCAD, &[5.0]).unwrap() - 2.65).abs() < 1e-12);
        assert_eq!(u_subgradient(&SCAD, &[5.0]), vec![1.0]);
    }

    #[test]
    fn lq_offset_at_zero() {
        let lq = PenaltySpec::Lq { lambda: 2.0, q: 0.5, eps: 0.25 };
        assert!((penalty_value(&lq, 0.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn json_form() {
        let s: PenaltySpec = serde_json::from_str(r#"{"kind": "scad", "lambda": 1.0, "a": 3.7}"#).unwrap();
        assert_eq!(s, SCAD);
        let c: PenaltySpec =
            serde_json::from_str(r#"{"kind": "capped_l1", "lambda": 1.0, "eta": 0.5}"#).unwrap();
        assert_eq!(c.kind(), "capped_l1");
    }

    #[test]
    fn invalid_parameters() {
        assert!(PenaltySpec::Scad { lambda: 1.0, a: 1.0 }.validate().is_err());
        assert!(PenaltySpec::Lq { lambda: 1.0, q: 1.0, eps: 1.0 }.validate().is_err());
        assert!(PenaltySpec::L1 { lambda: 0.0 }.validate().is_err());
    }
}
