//! Python bindings: problems, the three solvers, KKT certification and the
//! experiment harness. Options and reports cross the boundary as dicts.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyString;
use serde::de::DeserializeOwned;

use seqconvex::harness::instances::DEFAULT_SEED;
use seqconvex::harness::{self, ExperimentConfig, ProblemDescriptor};
use seqconvex::kkt::DEFAULT_TOL_ACTIVE;
use seqconvex::problem::spec::OracleRegistry;
use seqconvex::{
    ExactOptions, InexactOptions, PenaltySpec, ProblemInstance, ScpError, SolverTrace, VariantOptions,
};

create_exception!(seqconvex, SeqconvexError, PyException);

fn err(e: ScpError) -> PyErr {
    SeqconvexError::new_err(e.to_string())
}

/// Accept either a JSON string or any object `json.dumps` can serialize.
fn json_text(obj: &Bound<'_, PyAny>) -> PyResult<String> {
    if let Ok(s) = obj.cast::<PyString>() {
        return Ok(s.to_string());
    }
    let json = obj.py().import("json")?;
    json.call_method1("dumps", (obj,))?.extract()
}

fn parse<T: DeserializeOwned + Default>(obj: Option<&Bound<'_, PyAny>>) -> PyResult<T> {
    match obj {
        None => Ok(T::default()),
        Some(o) => serde_json::from_str(&json_text(o)?)
            .map_err(|e| SeqconvexError::new_err(format!("options: {e}"))),
    }
}

fn to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| SeqconvexError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// A problem instance with its suggested starting point.
#[pyclass(name = "Problem", module = "seqconvex", frozen)]
struct PyProblem {
    inner: ProblemInstance,
    x0: Vec<f64>,
}

#[pymethods]
impl PyProblem {
    /// Load a bundled instance by name.
    #[staticmethod]
    #[pyo3(signature = (name, seed = DEFAULT_SEED))]
    fn instance(name: &str, seed: u64) -> PyResult<Self> {
        let (inner, x0) = harness::load_instance(name, seed).map_err(err)?;
        Ok(PyProblem { inner, x0 })
    }

    /// Build a problem from a problem document (JSON string or dict).
    #[staticmethod]
    fn from_json(doc: &Bound<'_, PyAny>) -> PyResult<Self> {
        let desc = ProblemDescriptor::from_json(&json_text(doc)?).map_err(err)?;
        let inner = desc.build(&OracleRegistry::new()).map_err(err)?;
        let x0 = desc.x0().unwrap_or_else(|| vec![0.0; inner.dim()]);
        Ok(PyProblem { inner, x0 })
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn x0(&self) -> Vec<f64> {
        self.x0.clone()
    }

    #[getter]
    fn lipschitz_f(&self) -> f64 {
        self.inner.lipschitz_f()
    }

    #[getter]
    fn lipschitz_g(&self) -> Vec<f64> {
        self.inner.lipschitz_g()
    }

    fn objective(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.evaluate_objective(&x).map_err(err)
    }

    fn constraints(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.constraint_values(&x).map_err(err)
    }

    #[pyo3(signature = (x, tol = 1e-9))]
    fn is_feasible(&self, x: Vec<f64>, tol: f64) -> PyResult<bool> {
        self.inner.is_feasible(&x, tol).map_err(err)
    }

    /// KKT residual at `(x, multipliers)`; multipliers default to zero.
    #[pyo3(signature = (x, multipliers = None, tol_active = DEFAULT_TOL_ACTIVE))]
    fn kkt<'py>(
        &self,
        py: Python<'py>,
        x: Vec<f64>,
        multipliers: Option<Vec<f64>>,
        tol_active: f64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let lam = multipliers.unwrap_or_else(|| vec![0.0; self.inner.m()]);
        let r = seqconvex::kkt_residual(&self.inner, &x, &lam, tol_active).map_err(err)?;
        to_py(py, &r)
    }

    /// Best feasible point of a uniform grid, or `None`.
    fn brute_force(&self, lo: Vec<f64>, hi: Vec<f64>, step: f64) -> PyResult<Option<(Vec<f64>, f64)>> {
        seqconvex::brute_force_minimize(&self.inner, &lo, &hi, step).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Problem(name={:?}, dim={}, m={})", self.inner.name, self.inner.dim(), self.inner.m())
    }
}

/// Per-iteration record of a solver run.
#[pyclass(name = "Trace", module = "seqconvex", frozen)]
struct PyTrace {
    inner: SolverTrace,
}

#[pymethods]
impl PyTrace {
    #[getter]
    fn method(&self) -> &'static str {
        self.inner.method.as_str()
    }

    #[getter]
    fn termination<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.termination)
    }

    #[getter]
    fn final_point(&self) -> Option<Vec<f64>> {
        self.inner.final_point().map(<[f64]>::to_vec)
    }

    #[getter]
    fn final_objective(&self) -> Option<f64> {
        self.inner.final_objective()
    }

    #[getter]
    fn final_residual(&self) -> Option<f64> {
        self.inner.final_residual()
    }

    #[getter]
    fn outer_iterations(&self) -> usize {
        self.inner.outer_iterations()
    }

    #[getter]
    fn inner_iterations(&self) -> usize {
        self.inner.total_inner_iterations()
    }

    #[getter]
    fn objectives(&self) -> Vec<f64> {
        self.inner.records.iter().map(|r| r.objective).collect()
    }

    #[getter]
    fn points(&self) -> Vec<Vec<f64>> {
        self.inner.records.iter().map(|r| r.x.clone()).collect()
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.inner.warnings.clone()
    }

    /// All records as a list of dicts.
    fn records<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.records)
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    fn rejections_csv(&self) -> String {
        self.inner.rejections_csv()
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    /// Dual-gap partial sum and divergence flag.
    fn dual_gap<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &seqconvex::dual_gap_monitor(&self.inner))
    }

    fn __len__(&self) -> usize {
        self.inner.records.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Trace(method={:?}, problem={:?}, records={})",
            self.inner.method.as_str(),
            self.inner.problem,
            self.inner.records.len()
        )
    }
}

fn start(problem: &PyProblem, x0: Option<Vec<f64>>) -> Vec<f64> {
    x0.unwrap_or_else(|| problem.x0.clone())
}

/// Exact method; `options` mirrors the `exact` section of a config.
#[pyfunction]
#[pyo3(signature = (problem, x0 = None, options = None))]
fn solve_exact(
    py: Python<'_>,
    problem: &PyProblem,
    x0: Option<Vec<f64>>,
    options: Option<&Bound<'_, PyAny>>,
) -> PyResult<PyTrace> {
    let opts: ExactOptions = parse(options)?;
    let x0 = start(problem, x0);
    let inner = py.detach(|| seqconvex::run_exact(&problem.inner, &x0, &opts)).map_err(err)?;
    Ok(PyTrace { inner })
}

/// Variant method with nonmonotone acceptance and curvature backtracking.
#[pyfunction]
#[pyo3(signature = (problem, x0 = None, options = None))]
fn solve_variant(
    py: Python<'_>,
    problem: &PyProblem,
    x0: Option<Vec<f64>>,
    options: Option<&Bound<'_, PyAny>>,
) -> PyResult<PyTrace> {
    let opts: VariantOptions = parse(options)?;
    let x0 = start(problem, x0);
    let inner = py.detach(|| seqconvex::run_variant(&problem.inner, &x0, &opts)).map_err(err)?;
    Ok(PyTrace { inner })
}

/// Inexact method with a tolerance schedule.
#[pyfunction]
#[pyo3(signature = (problem, x0 = None, options = None))]
fn solve_inexact(
    py: Python<'_>,
    problem: &PyProblem,
    x0: Option<Vec<f64>>,
    options: Option<&Bound<'_, PyAny>>,
) -> PyResult<PyTrace> {
    let opts: InexactOptions = parse(options)?;
    let x0 = start(problem, x0);
    let inner = py.detach(|| seqconvex::run_inexact(&problem.inner, &x0, &opts)).map_err(err)?;
    Ok(PyTrace { inner })
}

/// Run an experiment config; returns `(summary, trace)`.
#[pyfunction]
fn run_experiment<'py>(py: Python<'py>, config: &Bound<'py, PyAny>) -> PyResult<(Bound<'py, PyAny>, PyTrace)> {
    let cfg = ExperimentConfig::from_json(&json_text(config)?).map_err(err)?;
    let rep = py.detach(|| harness::run_experiment(&cfg)).map_err(err)?;
    Ok((to_py(py, &rep.summary)?, PyTrace { inner: rep.trace }))
}

/// Run several configs on one problem; returns the comparison rows.
#[pyfunction]
fn compare_methods<'py>(py: Python<'py>, configs: Vec<Bound<'py, PyAny>>) -> PyResult<Bound<'py, PyAny>> {
    let cfgs = configs
        .iter()
        .map(|c| ExperimentConfig::from_json(&json_text(c)?).map_err(err))
        .collect::<PyResult<Vec<_>>>()?;
    let rep = py.detach(|| harness::compare_methods(&cfgs)).map_err(err)?;
    to_py(py, &rep)
}

#[pyfunction]
fn list_instances() -> Vec<String> {
    harness::instance_names()
}

/// `h(t)` of a penalty given as a dict such as `{"kind": "scad", "lambda": 1.0, "a": 3.7}`.
#[pyfunction]
fn penalty_value(spec: &Bound<'_, PyAny>, t: f64) -> PyResult<f64> {
    let spec: PenaltySpec =
        serde_json::from_str(&json_text(spec)?).map_err(|e| SeqconvexError::new_err(format!("penalty: {e}")))?;
    seqconvex::penalty_value(&spec, t).map_err(err)
}

/// Inner-loop bound of the variant method.
#[pyfunction]
#[pyo3(signature = (l_f, c, max_l_g, l_min, tau))]
fn theorem_bound(l_f: f64, c: f64, max_l_g: Option<f64>, l_min: f64, tau: f64) -> usize {
    seqconvex::theorem_bound(l_f, c, max_l_g, l_min, tau)
}

#[pymodule]
fn seqconvex_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SeqconvexError", m.py().get_type::<SeqconvexError>())?;
    m.add("DEFAULT_SEED", DEFAULT_SEED)?;
    m.add_class::<PyProblem>()?;
    m.add_class::<PyTrace>()?;
    m.add_function(wrap_pyfunction!(solve_exact, m)?)?;
    m.add_function(wrap_pyfunction!(solve_variant, m)?)?;
    m.add_function(wrap_pyfunction!(solve_inexact, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(compare_methods, m)?)?;
    m.add_function(wrap_pyfunction!(list_instances, m)?)?;
    m.add_function(wrap_pyfunction!(penalty_value, m)?)?;
    m.add_function(wrap_pyfunction!(theorem_bound, m)?)?;
    Ok(())
}
