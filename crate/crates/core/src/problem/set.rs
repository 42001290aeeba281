//! Closed convex sets with exact (or Dykstra-composed) Euclidean projections.

use serde::{Deserialize, Serialize};

use crate::error::{Result, ScpError};
use crate::linalg::{dist, dot, norm, norm_sq};

/// Iteration cap for Dykstra's alternating projections.
pub const DYKSTRA_MAX_ITER: usize = 10_000;
/// Stopping tolerance for Dykstra's alternating projections.
pub const DYKSTRA_TOL: f64 = 1e-12;

/// A closed convex set `X` given by a membership test and a projection.
///
/// The serialized form is externally tagged, e.g. `{"box": {"lo": [..], "hi": [..]}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvexSet {
    /// All of ℝⁿ.
    Free { dim: usize },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    /// `{x : aᵢ·x ≤ bᵢ for all i}`.
    Halfspaces { normals: Vec<Vec<f64>>, offsets: Vec<f64> },
    /// `{(x, y) : y ≥ |x| componentwise, x ∈ Ω}` with variables ordered `(x, y)`.
    EpiAbsProduct { omega: Box<ConvexSet> },
    /// Cartesian product, blocks laid out consecutively.
    Product(Vec<ConvexSet>),
    /// Intersection of sets of equal dimension, projected by Dykstra.
    Intersection(Vec<ConvexSet>),
}

impl ConvexSet {
    pub fn free(dim: usize) -> Self {
        ConvexSet::Free { dim }
    }

    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        ConvexSet::Box { lo, hi }
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        ConvexSet::Ball { center, radius }
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexSet::Free { dim } => *dim,
            ConvexSet::Box { lo, .. } => lo.len(),
            ConvexSet::Ball { center, .. } => center.len(),
            ConvexSet::Halfspaces { normals, .. } => normals.first().map_or(0, Vec::len),
            ConvexSet::EpiAbsProduct { omega } => 2 * omega.dim(),
            ConvexSet::Product(parts) => parts.iter().map(ConvexSet::dim).sum(),
            ConvexSet::Intersection(parts) => parts.first().map_or(0, ConvexSet::dim),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            ConvexSet::Free { .. } => "free",
            ConvexSet::Box { .. } => "box",
            ConvexSet::Ball { .. } => "ball",
            ConvexSet::Halfspaces { .. } => "halfspace-intersection",
            ConvexSet::EpiAbsProduct { .. } => "epigraph-product",
            ConvexSet::Product(_) => "cartesian-product",
            ConvexSet::Intersection(_) => "intersection",
        }
    }

    pub fn is_free(&self) -> bool {
        match self {
            ConvexSet::Free { .. } => true,
            ConvexSet::Product(parts) => parts.iter().all(ConvexSet::is_free),
            _ => false,
        }
    }

    /// Boxes (and free space) project coordinate-wise.
    pub fn is_separable(&self) -> bool {
        match self {
            ConvexSet::Free { .. } | ConvexSet::Box { .. } => true,
            ConvexSet::Product(parts) => parts.iter().all(ConvexSet::is_separable),
            _ => false,
        }
    }

    /// Per-coordinate bounds for separable sets (`±∞` on free coordinates).
    pub fn coordinate_bounds(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            ConvexSet::Free { dim } => Some((vec![f64::NEG_INFINITY; *dim], vec![f64::INFINITY; *dim])),
            ConvexSet::Box { lo, hi } => Some((lo.clone(), hi.clone())),
            ConvexSet::Product(parts) => {
                let mut lo = Vec::new();
                let mut hi = Vec::new();
                for p in parts {
                    let (l, h) = p.coordinate_bounds()?;
                    lo.extend(l);
                    hi.extend(h);
                }
                Some((lo, hi))
            }
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ConvexSet::Free { .. } => Ok(()),
            ConvexSet::Box { lo, hi } => {
                if lo.len() != hi.len() {
                    return Err(ScpError::input("box bounds have different lengths"));
                }
                if lo.iter().zip(hi).any(|(l, h)| l.is_nan() || h.is_nan() || l > h) {
                    return Err(ScpError::input("box requires lo ≤ hi componentwise"));
                }
                Ok(())
            }
            ConvexSet::Ball { center, radius } => {
                if !(radius.is_finite() && *radius >= 0.0) || !crate::linalg::all_finite(center) {
                    return Err(ScpError::input("ball needs a finite center and radius ≥ 0"));
                }
                Ok(())
            }
            ConvexSet::Halfspaces { normals, offsets } => {
                if normals.len() != offsets.len() || normals.is_empty() {
                    return Err(ScpError::input("halfspaces need one offset per normal"));
                }
                let n = normals[0].len();
                if normals.iter().any(|a| a.len() != n || norm(a) == 0.0) {
                    return Err(ScpError::input("halfspace normals must be nonzero and equally sized"));
                }
                Ok(())
            }
            ConvexSet::EpiAbsProduct { omega } => omega.validate(),
            ConvexSet::Product(parts) => parts.iter().try_for_each(ConvexSet::validate),
            ConvexSet::Intersection(parts) => {
                if parts.is_empty() {
                    return Err(ScpError::input("empty intersection"));
                }
                let n = parts[0].dim();
                if parts.iter().any(|p| p.dim() != n) {
                    return Err(ScpError::input("intersected sets must share a dimension"));
                }
                parts.iter().try_for_each(ConvexSet::validate)
            }
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match self {
            ConvexSet::Free { .. } => x.iter().all(|v| v.is_finite()),
            ConvexSet::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (l, h))| *v >= l - tol && *v <= h + tol),
            ConvexSet::Ball { center, radius } => dist(x, center) <= radius + tol,
            ConvexSet::Halfspaces { normals, offsets } => normals
                .iter()
                .zip(offsets)
                .all(|(a, b)| dot(a, x) - b <= tol),
            ConvexSet::EpiAbsProduct { omega } => {
                let n = omega.dim();
                let (xs, ys) = x.split_at(n);
                xs.iter().zip(ys).all(|(a, b)| *b >= a.abs() - tol) && omega.contains(xs, tol)
            }
            ConvexSet::Product(parts) => {
                let mut off = 0;
                parts.iter().all(|p| {
                    let d = p.dim();
                    let ok = p.contains(&x[off..off + d], tol);
                    off += d;
                    ok
                })
            }
            ConvexSet::Intersection(parts) => parts.iter().all(|p| p.contains(x, tol)),
        }
    }

    pub fn project(&self, z: &[f64]) -> Vec<f64> {
        debug_assert_eq!(z.len(), self.dim());
        match self {
            ConvexSet::Free { .. } => z.to_vec(),
            ConvexSet::Box { lo, hi } => z
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(v, (l, h))| v.clamp(*l, *h))
                .collect(),
            ConvexSet::Ball { center, radius } => {
                let d = dist(z, center);
                if d <= *radius {
                    z.to_vec()
                } else {
                    let s = radius / d;
                    z.iter().zip(center).map(|(v, c)| c + s * (v - c)).collect()
                }
            }
            ConvexSet::Halfspaces { normals, offsets } => {
                if normals.len() == 1 {
                    project_halfspace(z, &normals[0], offsets[0])
                } else {
                    let projs: Vec<Box<dyn Fn(&[f64]) -> Vec<f64> + '_>> = normals
                        .iter()
                        .zip(offsets)
                        .map(|(a, b)| {
                            Box::new(move |v: &[f64]| project_halfspace(v, a, *b))
                                as Box<dyn Fn(&[f64]) -> Vec<f64>>
                        })
                        .collect();
                    dykstra(z, &projs, DYKSTRA_MAX_ITER, DYKSTRA_TOL)
                }
            }
            ConvexSet::EpiAbsProduct { omega } => {
                let n = omega.dim();
                if omega.is_free() {
                    project_epi_pairs(z, n)
                } else {
                    let cone = move |v: &[f64]| project_epi_pairs(v, n);
                    let om = move |v: &[f64]| {
                        let mut out = omega.project(&v[..n]);
                        out.extend_from_slice(&v[n..]);
                        out
                    };
                    let projs: Vec<Box<dyn Fn(&[f64]) -> Vec<f64> + '_>> =
                        vec![Box::new(cone), Box::new(om)];
                    dykstra(z, &projs, DYKSTRA_MAX_ITER, DYKSTRA_TOL)
                }
            }
            ConvexSet::Product(parts) => {
                let mut out = Vec::with_capacity(z.len());
                let mut off = 0;
                for p in parts {
                    let d = p.dim();
                    out.extend(p.project(&z[off..off + d]));
                    off += d;
                }
                out
            }
            ConvexSet::Intersection(parts) => {
                let projs: Vec<Box<dyn Fn(&[f64]) -> Vec<f64> + '_>> = parts
                    .iter()
                    .map(|p| Box::new(move |v: &[f64]| p.project(v)) as Box<dyn Fn(&[f64]) -> Vec<f64>>)
                    .collect();
                dykstra(z, &projs, DYKSTRA_MAX_ITER, DYKSTRA_TOL)
            }
        }
    }

    /// `‖P_X(x) − x‖`.
    pub fn distance(&self, x: &[f64]) -> f64 {
        dist(&self.project(x), x)
    }
}

fn project_halfspace(z: &[f64], a: &[f64], b: f64) -> Vec<f64> {
    let viol = dot(a, z) - b;
    if viol <= 0.0 {
        return z.to_vec();
    }
    let s = viol / norm_sq(a);
    z.iter().zip(a).map(|(v, ai)| v - s * ai).collect()
}

fn project_epi_pairs(z: &[f64], n: usize) -> Vec<f64> {
    let mut out = z.to_vec();
    for i in 0..n {
        let (a, b) = project_epigraph_abs(z[i], z[n + i]);
        out[i] = a;
        out[n + i] = b;
    }
    out
}

/// Euclidean projection of `(a, b)` onto `{(x, y) ∈ ℝ² : y ≥ |x|}`.
pub fn project_epigraph_abs(a: f64, b: f64) -> (f64, f64) {
    if b >= a.abs() {
        (a, b)
    } else if b <= -a.abs() {
        (0.0, 0.0)
    } else {
        let t = 0.5 * (a.abs() + b);
        (a.signum() * t, t)
    }
}

/// Dykstra's alternating projection onto the intersection of the sets whose
/// projections are given. Stops when a full sweep moves the iterate and the
/// correction terms by at most `tol` (relative), or after `max_iter` sweeps.
pub fn dykstra(
    z: &[f64],
    projections: &[Box<dyn Fn(&[f64]) -> Vec<f64> + '_>],
    max_iter: usize,
    tol: f64,
) -> Vec<f64> {
    let k = projections.len();
    let mut x = z.to_vec();
    if k == 0 {
        return x;
    }
    if k == 1 {
        return projections[0](&x);
    }
    let mut incr = vec![vec![0.0; z.len()]; k];
    for _ in 0..max_iter {
        let mut change = 0.0;
        for (proj, p) in projections.iter().zip(incr.iter_mut()) {
            let shifted: Vec<f64> = x.iter().zip(p.iter()).map(|(a, b)| a + b).collect();
            let next = proj(&shifted);
            for j in 0..x.len() {
                let newp = shifted[j] - next[j];
                change += (newp - p[j]).powi(2) + (next[j] - x[j]).powi(2);
                p[j] = newp;
            }
            x = next;
        }
        if change.sqrt() <= tol * (1.0 + norm(&x)) {
            break;
        }
    }
    x
}
