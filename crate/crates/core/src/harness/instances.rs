//! The bundled instance library.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ScpError};
use crate::penalties::PenaltySpec;
use crate::problem::spec::{
    ConstraintSpec, ConvexSpec, ObjectiveSpec, OracleRegistry, ProblemSpec, SmoothSpec,
    SparseNlpSpec,
};
use crate::problem::{ConvexSet, ProblemInstance};

/// Seed used when a configuration does not name one.
pub const DEFAULT_SEED: u64 = 7;

/// Size of the bundled sparse least-squares instances.
pub const SPARSE_N: usize = 20;
pub const SPARSE_ROWS: usize = 30;
pub const SPARSE_SUPPORT: usize = 4;
pub const SPARSE_NOISE: f64 = 0.01;
pub const SPARSE_LAMBDA: f64 = 0.1;

/// A problem document: either a general instance or a sparse approximation
/// problem that is lifted on build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProblemDescriptor {
    SparseNlp(SparseNlpSpec),
    General(ProblemSpec),
}

impl ProblemDescriptor {
    pub fn build(&self, reg: &OracleRegistry) -> Result<ProblemInstance> {
        match self {
            ProblemDescriptor::SparseNlp(s) => s.build(reg),
            ProblemDescriptor::General(s) => s.build(reg),
        }
    }

    /// Suggested starting point in the built instance's variables.
    pub fn x0(&self) -> Option<Vec<f64>> {
        match self {
            ProblemDescriptor::SparseNlp(s) => s.lifted_x0(),
            ProblemDescriptor::General(s) => s.x0.clone(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            ScpError::input(format!("problem document is neither a general nor a sparse instance: {e}"))
        })
    }
}

/// Facts known about a bundled instance, with the oracle that established them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnownProperties {
    pub optimal_value: Option<f64>,
    pub kkt_points: Vec<Vec<f64>>,
    /// `grid` or `analytic`, naming how the known values were obtained.
    pub oracle: Option<String>,
    /// Bounded box for grid searches, when the instance is small enough.
    pub grid_box: Option<(Vec<f64>, Vec<f64>)>,
    pub convex: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceLibraryEntry {
    pub name: String,
    pub description: String,
    pub generator: serde_json::Value,
    pub known: KnownProperties,
}

fn diag(v: &[f64]) -> Vec<Vec<f64>> {
    (0..v.len())
        .map(|i| (0..v.len()).map(|j| if i == j { v[i] } else { 0.0 }).collect())
        .collect()
}

fn dc1d() -> ProblemSpec {
    ProblemSpec {
        name: Some("dc1d".into()),
        dim: 1,
        m: Some(0),
        set: Some(ConvexSet::boxed(vec![-2.0], vec![2.0])),
        objective: ObjectiveSpec {
            f: SmoothSpec::Quadratic { q: vec![vec![2.0]], b: None, c: 0.0, lipschitz: None },
            p: ConvexSpec::Zero {},
            u: ConvexSpec::L1 { weight: 2.0, coords: None },
        },
        constraints: vec![],
        x0: Some(vec![0.5]),
    }
}

fn mba2d() -> ProblemSpec {
    ProblemSpec {
        name: Some("mba2d".into()),
        dim: 2,
        m: Some(1),
        set: None,
        objective: ObjectiveSpec {
            f: SmoothSpec::Quadratic { q: diag(&[2.0, 2.0]), b: None, c: 0.0, lipschitz: None },
            ..Default::default()
        },
        constraints: vec![ConstraintSpec {
            g: SmoothSpec::Quadratic {
                q: diag(&[2.0, 2.0]),
                b: Some(vec![-4.0, 0.0]),
                c: 3.0,
                lipschitz: None,
            },
            ..Default::default()
        }],
        x0: Some(vec![2.0, 0.0]),
    }
}

fn constrained_dc() -> ProblemSpec {
    ProblemSpec {
        name: Some("constrained_dc".into()),
        dim: 2,
        m: Some(2),
        set: Some(ConvexSet::boxed(vec![-3.0, -3.0], vec![3.0, 3.0])),
        objective: ObjectiveSpec {
            f: SmoothSpec::Quadratic {
                q: diag(&[1.0, 1.0]),
                b: Some(vec![-2.0, -2.0]),
                c: 4.0,
                lipschitz: None,
            },
            p: ConvexSpec::L1 { weight: 0.1, coords: None },
            u: ConvexSpec::L1 { weight: 0.5, coords: Some(vec![1]) },
        },
        constraints: vec![
            ConstraintSpec {
                g: SmoothSpec::Quadratic { q: diag(&[1.0, 1.0]), b: None, c: -2.0, lipschitz: None },
                q: ConvexSpec::L1 { weight: 0.5, coords: Some(vec![0]) },
                v: ConvexSpec::L1 { weight: 1.0, coords: Some(vec![1]) },
            },
            ConstraintSpec {
                g: SmoothSpec::Quadratic {
                    q: diag(&[0.5, 0.0]),
                    b: Some(vec![1.0, 1.0]),
                    c: -2.5,
                    lipschitz: None,
                },
                q: ConvexSpec::L1 { weight: 0.2, coords: None },
                v: ConvexSpec::Quadratic { q: diag(&[0.0, 1.0]), b: None, c: 0.0 },
            },
        ],
        x0: Some(vec![0.0, 0.0]),
    }
}

/// Gaussian design scaled by `1/√rows`, a sparse ground truth and small noise.
pub fn sparse_least_squares_data(seed: u64) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (SPARSE_ROWS as f64).sqrt();
    let a: Vec<Vec<f64>> = (0..SPARSE_ROWS)
        .map(|_| {
            (0..SPARSE_N)
                .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    let mut truth = vec![0.0; SPARSE_N];
    let mut support: Vec<usize> = sample(&mut rng, SPARSE_N, SPARSE_SUPPORT).into_vec();
    support.sort_unstable();
    for j in support {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        truth[j] = sign * (1.0 + rng.random::<f64>());
    }
    let b = a
        .iter()
        .map(|row| {
            let clean: f64 = row.iter().zip(&truth).map(|(r, t)| r * t).sum();
            clean + SPARSE_NOISE * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    (a, b, truth)
}

fn sparse_penalty(kind: &str) -> Option<PenaltySpec> {
    let lambda = SPARSE_LAMBDA;
    Some(match kind {
        "scad" => PenaltySpec::Scad { lambda, a: 3.7 },
        "capped" => PenaltySpec::CappedL1 { lambda, eta: 0.5 },
        "log" => PenaltySpec::Log { lambda, eps: 0.5 },
        "lq" => PenaltySpec::Lq { lambda, q: 0.5, eps: 0.5 },
        "l1" => PenaltySpec::L1 { lambda },
        _ => return None,
    })
}

fn sparse_ls(kind: &str, seed: u64) -> Option<SparseNlpSpec> {
    let penalty = sparse_penalty(kind)?;
    let (a, b, _) = sparse_least_squares_data(seed);
    Some(SparseNlpSpec {
        loss: SmoothSpec::LeastSquares { a, b },
        omega: None,
        penalty,
        x0: Some(vec![0.0; SPARSE_N]),
    })
}

pub const SPARSE_KINDS: [&str; 5] = ["scad", "capped", "log", "lq", "l1"];

/// Names of every bundled instance.
pub fn instance_names() -> Vec<String> {
    let mut names = vec!["dc1d".to_string(), "mba2d".to_string()];
    names.extend(SPARSE_KINDS.iter().map(|k| format!("sparse_ls_{k}")));
    names.push("constrained_dc".into());
    names
}

/// Problem document of a bundled instance.
pub fn instance_descriptor(name: &str, seed: u64) -> Result<ProblemDescriptor> {
    match name {
        "dc1d" => Ok(ProblemDescriptor::General(dc1d())),
        "mba2d" => Ok(ProblemDescriptor::General(mba2d())),
        "constrained_dc" => Ok(ProblemDescriptor::General(constrained_dc())),
        _ => name
            .strip_prefix("sparse_ls_")
            .and_then(|k| sparse_ls(k, seed))
            .map(ProblemDescriptor::SparseNlp)
            .ok_or_else(|| {
                ScpError::input(format!(
                    "unknown instance `{name}`; available: {}",
                    instance_names().join(", ")
                ))
            }),
    }
}

/// Built instance and its starting point.
pub fn load_instance(name: &str, seed: u64) -> Result<(ProblemInstance, Vec<f64>)> {
    let d = instance_descriptor(name, seed)?;
    let mut prob = d.build(&OracleRegistry::new())?;
    prob.name = name.to_string();
    let x0 = d.x0().unwrap_or_else(|| vec![0.0; prob.dim()]);
    Ok((prob, x0))
}

pub fn bundled_instances() -> Vec<InstanceLibraryEntry> {
    let mut out = vec![
        InstanceLibraryEntry {
            name: "dc1d".into(),
            description: "x² − 2|x| on [−2, 2]".into(),
            generator: serde_json::json!({}),
            known: KnownProperties {
                optimal_value: Some(-1.0),
                kkt_points: vec![vec![1.0], vec![-1.0]],
                oracle: Some("grid".into()),
                grid_box: Some((vec![-2.0], vec![2.0])),
                convex: false,
            },
        },
        InstanceLibraryEntry {
            name: "mba2d".into(),
            description: "‖x‖² subject to ‖x − (2, 0)‖² ≤ 1".into(),
            generator: serde_json::json!({}),
            known: KnownProperties {
                optimal_value: Some(1.0),
                kkt_points: vec![vec![1.0, 0.0]],
                oracle: Some("analytic".into()),
                grid_box: Some((vec![0.5, -1.5], vec![3.5, 1.5])),
                convex: true,
            },
        },
    ];
    for kind in SPARSE_KINDS {
        out.push(InstanceLibraryEntry {
            name: format!("sparse_ls_{kind}"),
            description: format!(
                "lifted sparse least squares with the {kind} penalty, n = {SPARSE_N}, {SPARSE_ROWS} rows"
            ),
            generator: serde_json::json!({
                "rng": "chacha8",
                "seed": DEFAULT_SEED,
                "n": SPARSE_N,
                "rows": SPARSE_ROWS,
                "support": SPARSE_SUPPORT,
                "noise": SPARSE_NOISE,
                "penalty": sparse_penalty(kind),
            }),
            known: KnownProperties {
                optimal_value: None,
                kkt_points: vec![],
                oracle: None,
                grid_box: None,
                convex: kind == "l1",
            },
        });
    }
    out.push(InstanceLibraryEntry {
        name: "constrained_dc".into(),
        description: "two nonsmooth DC constraints on a box".into(),
        generator: serde_json::json!({}),
        known: KnownProperties {
            optimal_value: None,
            kkt_points: vec![],
            oracle: None,
            grid_box: Some((vec![-3.0, -3.0], vec![3.0, 3.0])),
            convex: false,
        },
    });
    out
}
