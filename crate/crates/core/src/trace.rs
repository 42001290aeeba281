//! Per-iteration solver records and their CSV / JSON forms.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// Serde for `f64` that keeps `±∞` and NaN as strings, since JSON numbers cannot carry them.
pub mod float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("not a number: {other}"))),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Variant,
    Inexact,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Variant => "variant",
            Method::Inexact => "inexact",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(Method::Exact),
            "variant" => Ok(Method::Variant),
            "inexact" => Ok(Method::Inexact),
            other => Err(format!("unknown method `{other}` (expected exact, variant or inexact)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    KktTol,
    StepTol,
    MaxOuter,
    Error,
}

/// Certificate of an inexact subproblem solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InexactRecord {
    pub eps_k: f64,
    pub stationarity: f64,
    #[serde(with = "float")]
    pub feasibility: f64,
    pub complementarity: f64,
    pub complementarity_abs: f64,
    /// Running sum of `(λ^{j+1} − λ^j)·c(x^{j+1})` over `j ≤ k`.
    pub dual_gap_partial: f64,
    /// Largest true constraint value at the next iterate.
    #[serde(with = "float")]
    pub next_max_constraint: f64,
}

/// Curvature search of one variant outer iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantRecord {
    /// Trial subproblems solved, including the accepted one.
    pub trials: usize,
    pub l_f_init: f64,
    pub l_g_init: Vec<f64>,
    /// Window maximum of past objective values.
    pub reference: f64,
    /// `F(x^{k+1})` of the accepted trial.
    pub accepted_value: f64,
}

/// State at iterate `x^k` and the subproblem solved there (if any).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub x: Vec<f64>,
    pub objective: f64,
    #[serde(with = "float")]
    pub max_constraint: f64,
    pub stationarity: f64,
    #[serde(with = "float")]
    pub feasibility: f64,
    pub complementarity: f64,
    /// Multipliers paired with `x^k` in the residual above.
    pub multipliers: Vec<f64>,
    /// `‖x^{k+1} − x^k‖`; absent on the final record.
    pub step: Option<f64>,
    pub inner_iterations: usize,
    pub al_rounds: usize,
    /// Curvatures of the accepted model.
    pub l_f: f64,
    pub l_g: Vec<f64>,
    /// Model objective at `x^{k+1}`.
    pub model_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inexact: Option<InexactRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<VariantRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectionReason {
    Infeasible,
    InsufficientDecrease,
}

impl RejectionReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            RejectionReason::Infeasible => "infeasible",
            RejectionReason::InsufficientDecrease => "insufficient_decrease",
        }
    }
}

/// A trial point discarded by the variant method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub k: usize,
    pub trial: usize,
    pub l_f: f64,
    pub l_g: Vec<f64>,
    pub reason: RejectionReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverTrace {
    pub method: Method,
    pub problem: String,
    pub records: Vec<IterationRecord>,
    #[serde(default)]
    pub rejections: Vec<Rejection>,
    pub termination: TerminationReason,
    /// Set when the objective curvature was raised to the floor.
    pub curvature_floor: Option<f64>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

pub const CSV_HEADER: &str = "k,F,max_g,stat,feas,comp,step,inner_iters";
pub const INEXACT_CSV_COLUMNS: &str = "eps_k,stat_res,feas_res,comp_res,dual_gap_partial";
pub const REJECTION_CSV_HEADER: &str = "k,trial,l_f,l_g,reason";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl SolverTrace {
    pub fn new(method: Method, problem: impl Into<String>) -> Self {
        SolverTrace {
            method,
            problem: problem.into(),
            records: Vec::new(),
            rejections: Vec::new(),
            termination: TerminationReason::Error,
            curvature_floor: None,
            warnings: Vec::new(),
        }
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn final_point(&self) -> Option<&[f64]> {
        self.last().map(|r| r.x.as_slice())
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.last().map(|r| r.objective)
    }

    pub fn outer_iterations(&self) -> usize {
        self.records.iter().filter(|r| r.step.is_some()).count()
    }

    pub fn total_inner_iterations(&self) -> usize {
        self.records.iter().map(|r| r.inner_iterations).sum()
    }

    /// Largest of the final stationarity, feasibility⁺ and complementarity.
    pub fn final_residual(&self) -> Option<f64> {
        self.last().map(|r| {
            r.stationarity
                .max(r.feasibility.max(0.0))
                .max(r.complementarity.abs())
        })
    }

    pub fn to_csv(&self) -> String {
        let inexact = self.method == Method::Inexact;
        let mut out = String::from(CSV_HEADER);
        if inexact {
            out.push(',');
            out.push_str(INEXACT_CSV_COLUMNS);
        }
        out.push('\n');
        for r in &self.records {
            let _ = write!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.k,
                r.objective,
                r.max_constraint,
                r.stationarity,
                r.feasibility,
                r.complementarity,
                opt(r.step),
                r.inner_iterations
            );
            if inexact {
                match &r.inexact {
                    Some(c) => {
                        let _ = write!(
                            out,
                            ",{},{},{},{},{}",
                            c.eps_k, c.stationarity, c.feasibility, c.complementarity, c.dual_gap_partial
                        );
                    }
                    None => out.push_str(",,,,,"),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn rejections_csv(&self) -> String {
        let mut out = format!("{REJECTION_CSV_HEADER}\n");
        for r in &self.rejections {
            let lg: Vec<String> = r.l_g.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.k,
                r.trial,
                r.l_f,
                lg.join(";"),
                r.reason.as_str()
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serialization cannot fail")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(k: usize) -> IterationRecord {
        IterationRecord {
            k,
            x: vec![0.1 + k as f64],
            objective: -0.75,
            max_constraint: f64::NEG_INFINITY,
            stationarity: 1.0 / 3.0,
            feasibility: f64::NEG_INFINITY,
            complementarity: 0.0,
            multipliers: vec![],
            step: Some(0.5),
            inner_iterations: 3,
            al_rounds: 1,
            l_f: 2.0,
            l_g: vec![],
            model_value: Some(-1.0),
            inexact: None,
            variant: None,
        }
    }

    #[test]
    fn csv_header_and_rows() {
        let mut t = SolverTrace::new(Method::Exact, "p");
        t.records.push(record(0));
        let csv = t.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "k,F,max_g,stat,feas,comp,step,inner_iters");
        assert_eq!(lines.next().unwrap(), "0,-0.75,-inf,0.3333333333333333,-inf,0,0.5,3");
    }

    #[test]
    fn inexact_columns() {
        let t = SolverTrace::new(Method::Inexact, "p");
        assert_eq!(
            t.to_csv().trim_end(),
            "k,F,max_g,stat,feas,comp,step,inner_iters,eps_k,stat_res,feas_res,comp_res,dual_gap_partial"
        );
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut t = SolverTrace::new(Method::Variant, "p");
        t.records.push(record(0));
        t.records[0].x = vec![0.1 + 0.2, 1e-300, -std::f64::consts::PI];
        let back: SolverTrace = serde_json::from_str(&t.to_json()).unwrap();
        assert_eq!(back.records[0].x, t.records[0].x);
        assert_eq!(back.records[0].max_constraint, f64::NEG_INFINITY);
    }
}
