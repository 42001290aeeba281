//! Function oracles: smooth pieces (value, gradient, Lipschitz constant of the
//! gradient) and convex pieces (value, one subgradient, optional prox).

use std::fmt;
use std::sync::Arc;

use crate::error::{Result, ScpError};
use crate::linalg::{axpy, dot, matvec, matvec_t, min_symmetric_eigenvalue, spectral_norm};

/// A continuously differentiable function with Lipschitz gradient.
pub trait SmoothOracle: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    /// Declared Lipschitz constant of the gradient.
    fn lipschitz(&self) -> f64;
    fn is_zero(&self) -> bool {
        false
    }
}

/// A proper closed convex function, finite on the feasible set.
///
/// Only one subgradient is ever requested. Implementations document which
/// element of the subdifferential they return at kinks.
pub trait ConvexOracle: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn subgradient(&self, x: &[f64]) -> Vec<f64>;

    /// `argmin_y φ(y) + ‖y − z‖² / (2t)`, when cheaply available.
    fn prox(&self, _z: &[f64], _t: f64) -> Option<Vec<f64>> {
        None
    }

    /// True when `prox` acts coordinate by coordinate.
    fn is_separable(&self) -> bool {
        false
    }

    /// Componentwise bounds `[lo, hi]` with `∂φ(x) = [lo, hi]` (a box), when the
    /// subdifferential has that shape.
    fn subdifferential_box(&self, _x: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        None
    }

    /// Projection of `(y, s)` onto the epigraph `{(y, s) : φ(y) ≤ s}`.
    fn project_epigraph(&self, _y: &[f64], _s: f64) -> Option<(Vec<f64>, f64)> {
        None
    }

    /// Hull of `subdifferential_box` over `x` and `x ± δ`, with
    /// `δⱼ = rel·max(1, |xⱼ|)`. Catches kinks that `x` misses by rounding.
    fn subdifferential_box_near(&self, x: &[f64], rel: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        let (mut lo, mut hi) = self.subdifferential_box(x)?;
        if rel <= 0.0 {
            return Some((lo, hi));
        }
        for sign in [-1.0, 1.0] {
            let shifted: Vec<f64> = x.iter().map(|v| v + sign * rel * v.abs().max(1.0)).collect();
            let (l, h) = self.subdifferential_box(&shifted)?;
            for j in 0..lo.len() {
                lo[j] = lo[j].min(l[j]);
                hi[j] = hi[j].max(h[j]);
            }
        }
        Some((lo, hi))
    }

    /// `Some(L)` when φ is differentiable with `L`-Lipschitz gradient; the
    /// subgradient is then the gradient.
    fn smooth_lipschitz(&self) -> Option<f64> {
        None
    }

    fn is_zero(&self) -> bool {
        false
    }
}

/// Sign with the right-derivative convention at zero.
pub(crate) fn sign_right(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// The zero function; usable both as a smooth and a convex piece.
#[derive(Debug, Clone)]
pub struct Zero {
    pub dim: usize,
}

impl SmoothOracle for Zero {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _x: &[f64]) -> f64 {
        0.0
    }
    fn gradient(&self, _x: &[f64]) -> Vec<f64> {
        vec![0.0; self.dim]
    }
    fn lipschitz(&self) -> f64 {
        0.0
    }
    fn is_zero(&self) -> bool {
        true
    }
}

impl ConvexOracle for Zero {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _x: &[f64]) -> f64 {
        0.0
    }
    fn subgradient(&self, _x: &[f64]) -> Vec<f64> {
        vec![0.0; self.dim]
    }
    fn prox(&self, z: &[f64], _t: f64) -> Option<Vec<f64>> {
        Some(z.to_vec())
    }
    fn is_separable(&self) -> bool {
        true
    }
    fn subdifferential_box(&self, _x: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        Some((vec![0.0; self.dim], vec![0.0; self.dim]))
    }
    fn project_epigraph(&self, y: &[f64], s: f64) -> Option<(Vec<f64>, f64)> {
        Some((y.to_vec(), s.max(0.0)))
    }
    fn smooth_lipschitz(&self) -> Option<f64> {
        Some(0.0)
    }
    fn is_zero(&self) -> bool {
        true
    }
}

/// `½ xᵀQx + bᵀx + c` with `Q` stored symmetrized.
#[derive(Debug, Clone)]
pub struct Quadratic {
    q: Vec<Vec<f64>>,
    b: Vec<f64>,
    c: f64,
    lipschitz: f64,
    min_eig: f64,
}

impl Quadratic {
    pub fn new(q: Vec<Vec<f64>>, b: Vec<f64>, c: f64) -> Result<Self> {
        let n = b.len();
        if q.len() != n || q.iter().any(|r| r.len() != n) {
            return Err(ScpError::input(format!("quadratic: Q must be {n}×{n}")));
        }
        let sym: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| 0.5 * (q[i][j] + q[j][i])).collect())
            .collect();
        let lipschitz = spectral_norm(&sym);
        let min_eig = min_symmetric_eigenvalue(&sym);
        Ok(Quadratic { q: sym, b, c, lipschitz, min_eig })
    }

    /// `w ‖x − center‖²`, i.e. `Q = 2w I`.
    pub fn scaled_distance(center: &[f64], w: f64) -> Self {
        let n = center.len();
        let q = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 2.0 * w } else { 0.0 }).collect())
            .collect();
        let b = center.iter().map(|c| -2.0 * w * c).collect();
        let c = w * dot(center, center);
        Quadratic::new(q, b, c).expect("square by construction")
    }

    /// Override the Lipschitz constant (must not be below the spectral norm).
    pub fn with_lipschitz(mut self, l: f64) -> Result<Self> {
        if l + 1e-12 < self.lipschitz {
            return Err(ScpError::input(format!(
                "declared Lipschitz constant {l} is below ‖Q‖₂ = {}",
                self.lipschitz
            )));
        }
        self.lipschitz = l;
        Ok(self)
    }

    pub fn is_convex(&self) -> bool {
        self.min_eig >= -1e-12
    }

    /// Fails unless `Q` is positive semidefinite.
    pub fn into_convex(self) -> Result<Self> {
        if self.is_convex() {
            Ok(self)
        } else {
            Err(ScpError::input(format!(
                "quadratic used as a convex piece has λ_min(Q) = {:.3e} < 0",
                self.min_eig
            )))
        }
    }
}

impl SmoothOracle for Quadratic {
    fn dim(&self) -> usize {
        self.b.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        let qx = matvec(&self.q, x);
        0.5 * dot(x, &qx) + dot(&self.b, x) + self.c
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = matvec(&self.q, x);
        axpy(1.0, &self.b, &mut g);
        g
    }
    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

impl ConvexOracle for Quadratic {
    fn dim(&self) -> usize {
        self.b.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        SmoothOracle::value(self, x)
    }
    fn subgradient(&self, x: &[f64]) -> Vec<f64> {
        self.gradient(x)
    }
    fn subdifferential_box(&self, x: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let g = self.gradient(x);
        Some((g.clone(), g))
    }
    fn smooth_lipschitz(&self) -> Option<f64> {
        Some(self.lipschitz)
    }
}

/// `½ ‖Ax − b‖²`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    ncols: usize,
    lipschitz: f64,
}

impl LeastSquares {
    pub fn new(a: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() || a.is_empty() {
            return Err(ScpError::input("least squares: A needs one row per entry of b"));
        }
        let ncols = a[0].len();
        if a.iter().any(|r| r.len() != ncols) {
            return Err(ScpError::input("least squares: ragged design matrix"));
        }
        let s = spectral_norm(&a);
        Ok(LeastSquares { a, b, ncols, lipschitz: s * s })
    }

    pub fn design(&self) -> &[Vec<f64>] {
        &self.a
    }

    pub fn response(&self) -> &[f64] {
        &self.b
    }

    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = matvec(&self.a, x);
        axpy(-1.0, &self.b, &mut r);
        r
    }
}

impl SmoothOracle for LeastSquares {
    fn dim(&self) -> usize {
        self.ncols
    }
    fn value(&self, x: &[f64]) -> f64 {
        let r = self.residual(x);
        0.5 * dot(&r, &r)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        matvec_t(&self.a, &self.residual(x), self.ncols)
    }
    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

/// Evaluates an inner smooth oracle on the block `x[offset .. offset + inner.dim()]`
/// of a longer vector.
#[derive(Debug, Clone)]
pub struct Embedded {
    inner: Arc<dyn SmoothOracle>,
    offset: usize,
    dim: usize,
}

impl Embedded {
    pub fn new(inner: Arc<dyn SmoothOracle>, offset: usize, dim: usize) -> Result<Self> {
        if offset + inner.dim() > dim {
            return Err(ScpError::input("embedded block exceeds the ambient dimension"));
        }
        Ok(Embedded { inner, offset, dim })
    }
}

impl SmoothOracle for Embedded {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.inner.value(&x[self.offset..self.offset + self.inner.dim()])
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let k = self.inner.dim();
        let mut g = vec![0.0; self.dim];
        g[self.offset..self.offset + k]
            .copy_from_slice(&self.inner.gradient(&x[self.offset..self.offset + k]));
        g
    }
    fn lipschitz(&self) -> f64 {
        self.inner.lipschitz()
    }
    fn is_zero(&self) -> bool {
        self.inner.is_zero()
    }
}

/// `w Σ_{j∈J} |x_j|` over a coordinate subset `J` (all coordinates by default).
///
/// Subgradient selection at `x_j = 0` is `+w` (right derivative).
#[derive(Debug, Clone)]
pub struct WeightedL1 {
    dim: usize,
    weight: f64,
    coords: Vec<usize>,
}

impl WeightedL1 {
    pub fn new(dim: usize, weight: f64) -> Result<Self> {
        Self::on_coords(dim, weight, (0..dim).collect())
    }

    pub fn on_coords(dim: usize, weight: f64, coords: Vec<usize>) -> Result<Self> {
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(ScpError::input("l1 weight must be finite and ≥ 0"));
        }
        if coords.iter().any(|&j| j >= dim) {
            return Err(ScpError::input("l1 coordinate index out of range"));
        }
        let mut coords = coords;
        coords.sort_unstable();
        coords.dedup();
        Ok(WeightedL1 { dim, weight, coords })
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn coords(&self) -> &[usize] {
        &self.coords
    }
}

impl ConvexOracle for WeightedL1 {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.weight * self.coords.iter().map(|&j| x[j].abs()).sum::<f64>()
    }
    fn subgradient(&self, x: &[f64]) -> Vec<f64> {
        let mut s = vec![0.0; self.dim];
        for &j in &self.coords {
            s[j] = self.weight * sign_right(x[j]);
        }
        s
    }
    fn prox(&self, z: &[f64], t: f64) -> Option<Vec<f64>> {
        let thr = t * self.weight;
        let mut out = z.to_vec();
        for &j in &self.coords {
            out[j] = z[j].signum() * (z[j].abs() - thr).max(0.0);
        }
        Some(out)
    }
    fn is_separable(&self) -> bool {
        true
    }
    fn subdifferential_box(&self, x: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let mut lo = vec![0.0; self.dim];
        let mut hi = vec![0.0; self.dim];
        let w = self.weight;
        for &j in &self.coords {
            if x[j] > 0.0 {
                lo[j] = w;
                hi[j] = w;
            } else if x[j] < 0.0 {
                lo[j] = -w;
                hi[j] = -w;
            } else {
                lo[j] = -w;
                hi[j] = w;
            }
        }
        Some((lo, hi))
    }
    fn project_epigraph(&self, y: &[f64], s: f64) -> Option<(Vec<f64>, f64)> {
        let w = self.weight;
        if ConvexOracle::value(self, y) <= s {
            return Some((y.to_vec(), s));
        }
        if w == 0.0 {
            return Some((y.to_vec(), 0.0));
        }
        // (y', s') = (soft(y, μw), s + μ) with w‖y'‖₁ = s + μ; piecewise linear in μ.
        let mut mags: Vec<f64> = self.coords.iter().map(|&j| y[j].abs()).collect();
        mags.sort_by(|a, b| b.total_cmp(a));
        let mut mu = None;
        let mut partial = 0.0;
        for k in 1..=mags.len() {
            partial += mags[k - 1];
            let cand = (w * partial - s) / (k as f64 * w * w + 1.0);
            let upper = mags[k - 1] / w;
            let lower = mags.get(k).map_or(0.0, |m| m / w);
            if cand > 0.0 && cand <= upper && cand >= lower {
                mu = Some(cand);
                break;
            }
        }
        match mu {
            Some(mu) => {
                let mut out = y.to_vec();
                for &j in &self.coords {
                    out[j] = y[j].signum() * (y[j].abs() - mu * w).max(0.0);
                }
                Some((out, s + mu))
            }
            None => {
                // Apex: the zero block with s' = 0.
                let mut out = y.to_vec();
                for &j in &self.coords {
                    out[j] = 0.0;
                }
                Some((out, 0.0))
            }
        }
    }
    fn is_zero(&self) -> bool {
        self.weight == 0.0 || self.coords.is_empty()
    }
}

type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type VecFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;
type ProxFn = dyn Fn(&[f64], f64) -> Vec<f64> + Send + Sync;

/// Smooth oracle backed by closures; used for code-registered custom pieces.
#[derive(Clone)]
pub struct FnSmooth {
    pub name: String,
    dim: usize,
    value: Arc<ValueFn>,
    gradient: Arc<VecFn>,
    lipschitz: f64,
}

impl FnSmooth {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        lipschitz: f64,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        FnSmooth {
            name: name.into(),
            dim,
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            lipschitz,
        }
    }
}

impl fmt::Debug for FnSmooth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FnSmooth({}, dim={}, L={})", self.name, self.dim, self.lipschitz)
    }
}

impl SmoothOracle for FnSmooth {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (self.gradient)(x)
    }
    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

/// Convex oracle backed by closures. Without a prox it can only appear as a
/// subtracted piece (`u`, `vᵢ`) or inside constraints (`qᵢ`, subgradient path).
#[derive(Clone)]
pub struct FnConvex {
    pub name: String,
    dim: usize,
    value: Arc<ValueFn>,
    subgradient: Arc<VecFn>,
    prox: Option<Arc<ProxFn>>,
}

impl FnConvex {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        subgradient: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        FnConvex {
            name: name.into(),
            dim,
            value: Arc::new(value),
            subgradient: Arc::new(subgradient),
            prox: None,
        }
    }

    pub fn with_prox(mut self, prox: impl Fn(&[f64], f64) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.prox = Some(Arc::new(prox));
        self
    }
}

impl fmt::Debug for FnConvex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FnConvex({}, dim={})", self.name, self.dim)
    }
}

impl ConvexOracle for FnConvex {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }
    fn subgradient(&self, x: &[f64]) -> Vec<f64> {
        (self.subgradient)(x)
    }
    fn prox(&self, z: &[f64], t: f64) -> Option<Vec<f64>> {
        self.prox.as_ref().map(|p| p(z, t))
    }
}
