//! Sequential convex programming for structured nonlinear programs
//!
//! ```text
//!   minimize   f(x) + p(x) − u(x)
//!   subject to gᵢ(x) + qᵢ(x) − vᵢ(x) ≤ 0,  x ∈ X
//! ```
//!
//! with smooth `f`, `gᵢ` and convex `p`, `u`, `qᵢ`, `vᵢ`. Three outer methods
//! share one convex-model solver: [`exact::run_exact`],
//! [`variant::run_variant`] and [`inexact::run_inexact`].

pub mod error;
pub mod exact;
pub mod harness;
pub mod inexact;
pub mod kkt;
pub mod linalg;
pub mod penalties;
pub mod problem;
pub mod subproblem;
pub mod trace;
pub mod variant;

pub use error::{Result, ScpError};
pub use exact::{default_kkt_stop, run_exact, ExactOptions};
pub use inexact::{dual_gap_monitor, run_inexact, EpsSchedule, InexactOptions};
pub use kkt::{active_set, brute_force_minimize, kkt_residual, KktResidual};
pub use penalties::{build_sparse_nlp, penalty_value, u_subgradient, u_value, PenaltySpec};
pub use problem::{ConvexSet, ProblemInstance};
pub use subproblem::{find_slater_point, solve_exact, solve_inexact, SubproblemData, SubproblemSolution};
pub use trace::{IterationRecord, Method, SolverTrace, TerminationReason};
pub use variant::{bb_estimate, nonmonotone_reference, run_variant, theorem_bound, VariantOptions};
