#![allow(dead_code)]

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seqconvex::harness::instances::DEFAULT_SEED;
use seqconvex::harness::{instance_names, load_instance};
use seqconvex::PenaltySpec;
use seqconvex::problem::{ConvexOracle, ConvexSet, ProblemInstance, Quadratic, SmoothOracle, WeightedL1, Zero};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

pub fn diag(v: &[f64]) -> Vec<Vec<f64>> {
    (0..v.len())
        .map(|i| (0..v.len()).map(|j| if i == j { v[i] } else { 0.0 }).collect())
        .collect()
}

pub fn quad(q: Vec<Vec<f64>>, b: Vec<f64>, c: f64) -> Arc<Quadratic> {
    Arc::new(Quadratic::new(q, b, c).unwrap())
}

pub fn zero(n: usize) -> Arc<Zero> {
    Arc::new(Zero { dim: n })
}

pub fn l1(n: usize, w: f64) -> Arc<WeightedL1> {
    Arc::new(WeightedL1::new(n, w).unwrap())
}

/// Every bundled instance with its suggested start.
pub fn bundled() -> Vec<(String, ProblemInstance, Vec<f64>)> {
    instance_names()
        .into_iter()
        .map(|n| {
            let (p, x0) = load_instance(&n, DEFAULT_SEED).unwrap();
            (n, p, x0)
        })
        .collect()
}

/// A random point of `X` near `center`.
pub fn sample_in_set(rng: &mut ChaCha8Rng, set: &ConvexSet, center: &[f64], radius: f64) -> Vec<f64> {
    let z: Vec<f64> = center.iter().map(|c| c + rng.random_range(-radius..radius)).collect();
    set.project(&z)
}

/// Every convex piece of a problem with a label.
pub fn convex_pieces(p: &ProblemInstance) -> Vec<(String, Arc<dyn ConvexOracle>)> {
    let mut out: Vec<(String, Arc<dyn ConvexOracle>)> =
        vec![("p".into(), p.p.clone()), ("u".into(), p.u.clone())];
    for (i, c) in p.constraints.iter().enumerate() {
        out.push((format!("q{i}"), c.q.clone()));
        out.push((format!("v{i}"), c.v.clone()));
    }
    out
}

pub fn smooth_pieces(p: &ProblemInstance) -> Vec<(String, Arc<dyn SmoothOracle>)> {
    let mut out: Vec<(String, Arc<dyn SmoothOracle>)> = vec![("f".into(), p.f.clone())];
    for (i, c) in p.constraints.iter().enumerate() {
        out.push((format!("g{i}"), c.g.clone()));
    }
    out
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Minimize a 1-D function over `[lo, hi]` on a uniform grid.
pub fn grid_min_1d(f: impl Fn(f64) -> f64, lo: f64, hi: f64, step: f64) -> (f64, f64) {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n)
        .map(|i| lo + i as f64 * step)
        .map(|t| (t, f(t)))
        .fold((f64::NAN, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best })
}

/// Nested grid refinement over a 2-D box; `f` returns `+∞` outside the feasible region.
pub fn grid_refine_2d(
    f: impl Fn(f64, f64) -> f64,
    mut lo: [f64; 2],
    mut hi: [f64; 2],
    points: usize,
    rounds: usize,
) -> ([f64; 2], f64) {
    let mut best = ([f64::NAN; 2], f64::INFINITY);
    for _ in 0..rounds {
        let h = [(hi[0] - lo[0]) / points as f64, (hi[1] - lo[1]) / points as f64];
        for i in 0..=points {
            for j in 0..=points {
                let (a, b) = (lo[0] + i as f64 * h[0], lo[1] + j as f64 * h[1]);
                let v = f(a, b);
                if v < best.1 {
                    best = ([a, b], v);
                }
            }
        }
        // Keep a wide window: along a curved boundary the best cell can sit
        // well away from the true minimizer.
        let w = (points / 10).max(2) as f64;
        lo = [best.0[0] - w * h[0], best.0[1] - w * h[1]];
        hi = [best.0[0] + w * h[0], best.0[1] + w * h[1]];
    }
    best
}

/// The documented parameter sweep.
pub fn penalty_sweep() -> Vec<PenaltySpec> {
    let mut out = Vec::new();
    for lambda in [0.1, 1.0, 10.0] {
        out.push(PenaltySpec::L1 { lambda });
        for a in [2.1, 3.7] {
            out.push(PenaltySpec::Scad { lambda, a });
        }
        for q in [0.25, 0.5] {
            for eps in [1e-2, 1.0] {
                out.push(PenaltySpec::Lq { lambda, q, eps });
            }
        }
        for eps in [1e-2, 1.0] {
            out.push(PenaltySpec::Log { lambda, eps });
        }
        for eta in [0.1, 1.0] {
            out.push(PenaltySpec::CappedL1 { lambda, eta });
        }
    }
    out
}
