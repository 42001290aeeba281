use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use super::config::ExperimentConfig;
use crate::error::{Result, ScpError};
use crate::exact::run_exact;
use crate::inexact::{dual_gap_monitor, run_inexact, DualGapReport};
use crate::problem::spec::OracleRegistry;
use crate::trace::{Method, SolverTrace, TerminationReason};
use crate::variant::run_variant;

/// Write `bytes` to `path` through a temporary file in the same directory and
/// a rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| ScpError::Io(e.error))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub problem: String,
    pub method: Method,
    pub termination: TerminationReason,
    pub final_objective: f64,
    pub stationarity: f64,
    #[serde(with = "crate::trace::float")]
    pub feasibility: f64,
    pub complementarity: f64,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub rejections: usize,
    pub wall_time_secs: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dual_gap: Option<DualGapReport>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub summary: Summary,
    pub trace: SolverTrace,
    /// Files written, in write order.
    pub files: Vec<PathBuf>,
}

fn summarize(trace: &SolverTrace, wall: f64) -> Summary {
    let last = trace.last();
    Summary {
        problem: trace.problem.clone(),
        method: trace.method,
        termination: trace.termination,
        final_objective: last.map_or(f64::NAN, |r| r.objective),
        stationarity: last.map_or(f64::NAN, |r| r.stationarity),
        feasibility: last.map_or(f64::NAN, |r| r.feasibility),
        complementarity: last.map_or(f64::NAN, |r| r.complementarity),
        outer_iterations: trace.outer_iterations(),
        inner_iterations: trace.total_inner_iterations(),
        rejections: trace.rejections.len(),
        wall_time_secs: wall,
        dual_gap: (trace.method == Method::Inexact).then(|| dual_gap_monitor(trace)),
        warnings: trace.warnings.clone(),
    }
}

fn stem(cfg: &ExperimentConfig, problem: &str) -> String {
    cfg.output
        .stem
        .clone()
        .unwrap_or_else(|| format!("{problem}_{}", cfg.method.as_str()))
}

fn write_trace(dir: &Path, stem: &str, trace: &SolverTrace) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    let mut put = |name: String, body: String| -> Result<()> {
        let path = dir.join(name);
        write_atomic(&path, body.as_bytes())?;
        files.push(path);
        Ok(())
    };
    put(format!("{stem}.csv"), trace.to_csv())?;
    put(format!("{stem}.json"), trace.to_json())?;
    if trace.method == Method::Variant {
        put(format!("{stem}_rejections.csv"), trace.rejections_csv())?;
    }
    Ok(files)
}

/// Run one configured experiment; writes traces when an output directory is set.
///
/// For a fixed config and seed the CSV and JSON traces are byte-identical
/// across runs. Only the summary's wall time varies.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment_with(cfg, &OracleRegistry::new())
}

/// As [`run_experiment`], resolving `custom` oracles from `reg`.
pub fn run_experiment_with(cfg: &ExperimentConfig, reg: &OracleRegistry) -> Result<ExperimentReport> {
    cfg.validate()?;
    let desc = cfg.descriptor()?;
    let mut prob = desc.build(reg)?;
    if let super::config::ProblemSource::Instance(name) = &cfg.problem {
        prob.name = name.clone();
    }
    let x0 = cfg
        .x0
        .clone()
        .or_else(|| desc.x0())
        .unwrap_or_else(|| vec![0.0; prob.dim()]);
    prob.check_point(&x0)?;
    let out_dir = cfg.output_dir();
    let stem = stem(cfg, &prob.name);

    log::info!("solving {} with the {} method", prob.name, cfg.method.as_str());
    let start = Instant::now();
    let result = match cfg.method {
        Method::Exact => run_exact(&prob, &x0, &cfg.exact),
        Method::Variant => run_variant(&prob, &x0, &cfg.variant),
        Method::Inexact => run_inexact(&prob, &x0, &cfg.inexact),
    };
    let wall = start.elapsed().as_secs_f64();

    match result {
        Ok(trace) => {
            let summary = summarize(&trace, wall);
            let mut files = Vec::new();
            if let Some(dir) = &out_dir {
                files = write_trace(dir, &stem, &trace)?;
                let path = dir.join(format!("{stem}_summary.json"));
                write_atomic(&path, serde_json::to_string_pretty(&summary)?.as_bytes())?;
                files.push(path);
            }
            Ok(ExperimentReport { summary, trace, files })
        }
        Err(err) => {
            if let Some(dir) = &out_dir {
                if let Some(trace) = err.partial_trace() {
                    write_trace(dir, &stem, trace)?;
                }
                if let Some(diag) = nonconvergence_diagnostic(&err) {
                    write_atomic(&dir.join(format!("{stem}_diagnostic.json")), diag.as_bytes())?;
                }
            }
            Err(err)
        }
    }
}

fn nonconvergence_diagnostic(err: &ScpError) -> Option<&str> {
    match err {
        ScpError::NonConvergence { diagnostic, .. } => diagnostic.as_deref(),
        ScpError::Aborted { source, .. } => nonconvergence_diagnostic(source),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub method: Method,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub final_objective: f64,
    pub final_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub problem: String,
    pub rows: Vec<ComparisonRow>,
    #[serde(skip)]
    pub traces: Vec<SolverTrace>,
}

impl ComparisonReport {
    pub fn to_table(&self) -> String {
        let mut out = format!("problem: {}\n", self.problem);
        out.push_str(&format!(
            "{:<8} {:>8} {:>10} {:>24} {:>12}\n",
            "method", "outer", "inner", "final_F", "residual"
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "{:<8} {:>8} {:>10} {:>24.15e} {:>12.3e}\n",
                r.method.as_str(),
                r.outer_iterations,
                r.inner_iterations,
                r.final_objective,
                r.final_residual
            ));
        }
        out
    }
}

/// Run every config on the same problem and tabulate the outcomes.
pub fn compare_methods(cfgs: &[ExperimentConfig]) -> Result<ComparisonReport> {
    if cfgs.is_empty() {
        return Err(ScpError::input("compare needs at least one config"));
    }
    let reference = cfgs[0].descriptor()?;
    for (i, c) in cfgs.iter().enumerate().skip(1) {
        if c.descriptor()? != reference {
            return Err(ScpError::input(format!(
                "config {i} refers to a different problem than config 0"
            )));
        }
    }
    let mut rows = Vec::new();
    let mut traces = Vec::new();
    let mut problem = String::new();
    for c in cfgs {
        let rep = run_experiment(c)?;
        problem = rep.summary.problem.clone();
        rows.push(ComparisonRow {
            method: rep.summary.method,
            outer_iterations: rep.summary.outer_iterations,
            inner_iterations: rep.summary.inner_iterations,
            final_objective: rep.summary.final_objective,
            final_residual: rep.trace.final_residual().unwrap_or(f64::NAN),
        });
        traces.push(rep.trace);
    }
    Ok(ComparisonReport { problem, rows, traces })
}
