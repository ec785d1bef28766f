//! Python bindings: models, shooting problems, the Newton drivers, the
//! direction solvers and the bound formulas.

use std::path::PathBuf;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use sparsectl::bounds::{self, ConvergenceReport, ProblemConstants};
use sparsectl::cli::run_config;
use sparsectl::config::ProblemConfig;
use sparsectl::dynamics::{
    self as dyn_, DuffingModel, LinearModel, PendulumModel, SystemModel, VanDerPolModel,
};
use sparsectl::lsolve::{self, DirectionNorm, DirectionResult, DirectionSubproblem};
use sparsectl::newton::{self, SolveResult, SolverConfig, StepPolicy};
use sparsectl::shooting::ShootingProblem;
use sparsectl::Error;

fn to_py(err: Error) -> PyErr {
    match err {
        Error::InvalidInput(_) | Error::Domain(_) | Error::Config(_) | Error::Json(_) => {
            PyValueError::new_err(err.to_string())
        }
        _ => PyRuntimeError::new_err(err.to_string()),
    }
}

/// Row-major nested lists to a matrix.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err("expected a non-empty rectangular list of rows"));
    }
    Ok(DMatrix::from_row_iterator(rows.len(), ncols, rows.iter().flatten().copied()))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn vector(xs: Vec<f64>) -> DVector<f64> {
    DVector::from_vec(xs)
}

/// A discrete-time system model.
#[pyclass(name = "SystemModel", module = "pysparsectl", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PySystemModel {
    inner: Arc<dyn SystemModel>,
}

#[pymethods]
impl PySystemModel {
    #[staticmethod]
    fn pendulum(alpha: f64, beta: f64, h_step: f64) -> PyResult<Self> {
        let model = PendulumModel::new(alpha, beta, h_step).map_err(to_py)?;
        Ok(Self { inner: Arc::new(model) })
    }

    #[staticmethod]
    #[pyo3(name = "linear")]
    fn linear_model(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> PyResult<Self> {
        let model = LinearModel::new(matrix_from_rows(&a)?, matrix_from_rows(&b)?).map_err(to_py)?;
        Ok(Self { inner: Arc::new(model) })
    }

    #[staticmethod]
    fn van_der_pol(mu: f64, h_step: f64) -> PyResult<Self> {
        Ok(Self { inner: Arc::new(VanDerPolModel::new(mu, h_step).map_err(to_py)?) })
    }

    #[staticmethod]
    fn duffing(delta: f64, alpha: f64, beta: f64, h_step: f64) -> PyResult<Self> {
        let model = DuffingModel::new(delta, alpha, beta, h_step).map_err(to_py)?;
        Ok(Self { inner: Arc::new(model) })
    }

    #[getter]
    fn state_dim(&self) -> usize {
        self.inner.state_dim()
    }

    #[getter]
    fn control_dim(&self) -> usize {
        self.inner.control_dim()
    }

    #[pyo3(signature = (x, u, j = 0))]
    fn step(&self, x: Vec<f64>, u: Vec<f64>, j: usize) -> PyResult<Vec<f64>> {
        let next = self.inner.checked_step(j, &vector(x), &vector(u)).map_err(to_py)?;
        Ok(next.as_slice().to_vec())
    }

    /// `(jac_x, jac_u)` at `(j, x, u)`.
    #[pyo3(signature = (x, u, j = 0))]
    fn jacobians(&self, x: Vec<f64>, u: Vec<f64>, j: usize) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let (x, u) = (vector(x), vector(u));
        // validates dimensions
        self.inner.checked_step(j, &x, &u).map_err(to_py)?;
        Ok((
            matrix_to_rows(&self.inner.jac_x(j, &x, &u)),
            matrix_to_rows(&self.inner.jac_u(j, &x, &u)),
        ))
    }

    #[pyo3(signature = (x, u, j = 0, fd_step = dyn_::DEFAULT_FD_STEP))]
    fn finite_diff_jacobians(
        &self,
        x: Vec<f64>,
        u: Vec<f64>,
        j: usize,
        fd_step: f64,
    ) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let (jx, ju) = dyn_::finite_diff_jacobians(self.inner.as_ref(), j, &vector(x), &vector(u), fd_step)
            .map_err(to_py)?;
        Ok((matrix_to_rows(&jx), matrix_to_rows(&ju)))
    }

    /// States `x[0..=N]` for the controls `u[0..N]`.
    fn rollout(&self, x0: Vec<f64>, controls: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let controls: Vec<_> = controls.into_iter().map(vector).collect();
        let traj = dyn_::rollout(self.inner.as_ref(), &vector(x0), &controls).map_err(to_py)?;
        Ok(traj.iter().map(|x| x.as_slice().to_vec()).collect())
    }
}

/// Steer `model` from `x0` to `target` in `horizon` steps.
#[pyclass(name = "ShootingProblem", module = "pysparsectl", frozen)]
pub struct PyShootingProblem {
    inner: ShootingProblem,
}

#[pymethods]
impl PyShootingProblem {
    #[new]
    fn new(model: &PySystemModel, x0: Vec<f64>, target: Vec<f64>, horizon: usize) -> PyResult<Self> {
        let inner = ShootingProblem::new(model.inner.clone(), vector(x0), vector(target), horizon)
            .map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Loads the problem section of a JSON config file.
    #[staticmethod]
    #[pyo3(signature = (path, overrides = Vec::new()))]
    fn from_config(path: PathBuf, overrides: Vec<String>) -> PyResult<Self> {
        let cfg = ProblemConfig::load(&path, &overrides).map_err(to_py)?;
        Ok(Self { inner: cfg.problem().map_err(to_py)? })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn state_dim(&self) -> usize {
        self.inner.state_dim()
    }

    fn residual(&self, u: Vec<f64>) -> PyResult<Vec<f64>> {
        let r = self.inner.residual(&vector(u)).map_err(to_py)?;
        Ok(r.entries.as_slice().to_vec())
    }

    /// `(residual, jacobian rows)`.
    fn jacobian(&self, u: Vec<f64>) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
        let (r, jac) = self.inner.jacobian(&vector(u)).map_err(to_py)?;
        Ok((r.entries.as_slice().to_vec(), matrix_to_rows(&jac.matrix)))
    }

    fn trajectory(&self, u: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let traj = self.inner.trajectory(&vector(u)).map_err(to_py)?;
        Ok(traj.iter().map(|x| x.as_slice().to_vec()).collect())
    }
}

/// Outcome of a Newton solve.
#[pyclass(name = "SolveResult", module = "pysparsectl", frozen)]
pub struct PySolveResult {
    inner: SolveResult,
}

#[pymethods]
impl PySolveResult {
    #[getter]
    fn u(&self) -> Vec<f64> {
        self.inner.u_final.as_slice().to_vec()
    }

    #[getter]
    fn status(&self) -> String {
        status_name(&self.inner)
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged()
    }

    #[getter]
    fn residual_inf(&self) -> f64 {
        self.inner.residual_inf
    }

    #[getter]
    fn u_l1_norm(&self) -> f64 {
        self.inner.u_l1_norm
    }

    #[getter]
    fn u_nnz(&self) -> usize {
        self.inner.u_nnz
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations()
    }

    #[getter]
    fn support(&self) -> Vec<usize> {
        lsolve::support(&self.inner.u_final)
    }

    /// One dict per accepted step.
    fn history<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.inner
            .history
            .iter()
            .map(|rec| {
                let d = PyDict::new(py);
                d.set_item("k", rec.k)?;
                d.set_item("p_k", rec.p_k)?;
                d.set_item("gamma", rec.gamma)?;
                d.set_item("step_l1_norm", rec.step_l1_norm)?;
                d.set_item("direction_support", rec.direction_support.clone())?;
                d.set_item("nnz_u", rec.nnz_u)?;
                d.set_item("beta_k", rec.beta_k)?;
                d.set_item("backtracks", rec.backtracks)?;
                Ok(d)
            })
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "SolveResult(status={}, residual_inf={:e}, u_l1_norm={}, u_nnz={}, iterations={})",
            status_name(&self.inner),
            self.inner.residual_inf,
            self.inner.u_l1_norm,
            self.inner.u_nnz,
            self.inner.iterations()
        )
    }
}

fn status_name(res: &SolveResult) -> String {
    match res.status {
        newton::SolveStatus::Converged => "converged",
        newton::SolveStatus::MaxIterations => "max_iterations",
        newton::SolveStatus::Stalled => "stalled",
        newton::SolveStatus::SingularLinearization => "singular_linearization",
    }
    .to_string()
}

fn parse_norm(name: &str) -> PyResult<DirectionNorm> {
    match name {
        "l1" => Ok(DirectionNorm::L1),
        "l2" => Ok(DirectionNorm::L2),
        other => Err(PyValueError::new_err(format!("unknown direction norm `{other}`"))),
    }
}

/// Builds a solver configuration from the keyword arguments shared by
/// `solve` and `refine_support`.
#[allow(clippy::too_many_arguments)]
pub fn solver_config(
    algorithm: &str,
    direction_norm: &str,
    eps: f64,
    max_iterations: usize,
    max_backtracks: usize,
    beta0: Option<f64>,
    shrink: f64,
    mu: Option<f64>,
    l_const: Option<f64>,
) -> PyResult<SolverConfig> {
    let required = |v: Option<f64>, name: &str| {
        v.ok_or_else(|| PyValueError::new_err(format!("{name} is required for `{algorithm}`")))
    };
    let policy = match algorithm {
        "pure" => StepPolicy::Pure,
        "fixed_mu_l" => StepPolicy::FixedMuL { mu: required(mu, "mu")?, l_const: required(l_const, "L_const")? },
        "fixed_l" => StepPolicy::FixedL { l_const: required(l_const, "L_const")? },
        "adaptive" => StepPolicy::Adaptive { beta0, shrink },
        other => return Err(PyValueError::new_err(format!("unknown algorithm `{other}`"))),
    };
    let cfg = SolverConfig {
        policy,
        direction_norm: parse_norm(direction_norm)?,
        eps,
        max_iterations,
        max_backtracks,
        u0: None,
    };
    cfg.validate().map_err(to_py)?;
    Ok(cfg)
}

#[pyfunction]
#[pyo3(signature = (
    problem, algorithm = "adaptive", direction_norm = "l1", eps = 1e-9, max_iterations = 100,
    max_backtracks = 60, beta0 = None, shrink = 0.5, mu = None, L_const = None, u0 = None
))]
#[allow(non_snake_case, clippy::too_many_arguments)]
fn solve(
    problem: &PyShootingProblem,
    algorithm: &str,
    direction_norm: &str,
    eps: f64,
    max_iterations: usize,
    max_backtracks: usize,
    beta0: Option<f64>,
    shrink: f64,
    mu: Option<f64>,
    L_const: Option<f64>,
    u0: Option<Vec<f64>>,
) -> PyResult<PySolveResult> {
    let mut cfg = solver_config(
        algorithm, direction_norm, eps, max_iterations, max_backtracks, beta0, shrink, mu, L_const,
    )?;
    cfg.u0 = u0.map(vector);
    let inner = newton::solve(&problem.inner, &cfg).map_err(to_py)?;
    Ok(PySolveResult { inner })
}

#[pyfunction]
#[pyo3(signature = (
    problem, probe_steps = 1, refine_eps = 1e-9, algorithm = "pure", eps = 1e-9,
    max_iterations = 100, max_backtracks = 60, shrink = 0.5
))]
#[allow(clippy::too_many_arguments)]
fn refine_support(
    problem: &PyShootingProblem,
    probe_steps: usize,
    refine_eps: f64,
    algorithm: &str,
    eps: f64,
    max_iterations: usize,
    max_backtracks: usize,
    shrink: f64,
) -> PyResult<PySolveResult> {
    let cfg = solver_config(algorithm, "l1", eps, max_iterations, max_backtracks, None, shrink, None, None)?;
    let inner = newton::refine_support(&problem.inner, &cfg, probe_steps, refine_eps).map_err(to_py)?;
    Ok(PySolveResult { inner })
}

/// Runs a JSON config file as the `solve` command would.
#[pyfunction]
#[pyo3(signature = (path, overrides = Vec::new()))]
fn solve_config_file(py: Python<'_>, path: PathBuf, overrides: Vec<String>) -> PyResult<Bound<'_, PyDict>> {
    let cfg = ProblemConfig::load(&path, &overrides).map_err(to_py)?;
    let run = run_config(&cfg).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("summary_line", run.summary_line())?;
    d.set_item("residual_inf", run.summary.residual_inf)?;
    d.set_item("u_l1_norm", run.summary.u_l1_norm)?;
    d.set_item("u_nnz", run.summary.u_nnz)?;
    d.set_item("iterations", run.summary.iterations)?;
    d.set_item("control", run.control_table)?;
    d.set_item("trajectory", run.trajectory_table)?;
    Ok(d)
}

fn direction_dict<'py>(py: Python<'py>, res: &DirectionResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("w", res.w.as_slice().to_vec())?;
    d.set_item("objective", res.objective)?;
    d.set_item("support", res.support.clone())?;
    d.set_item("status", if res.is_optimal() { "optimal" } else { "infeasible" })?;
    d.set_item("infeasibility", res.infeasibility)?;
    Ok(d)
}

fn subproblem(a: Vec<Vec<f64>>, r: Vec<f64>) -> PyResult<DirectionSubproblem> {
    DirectionSubproblem::new(matrix_from_rows(&a)?, vector(r)).map_err(to_py)
}

/// Vertex solution of `min ||w||_1 s.t. A w = r`.
#[pyfunction]
fn min_l1_direction(py: Python<'_>, a: Vec<Vec<f64>>, r: Vec<f64>) -> PyResult<Bound<'_, PyDict>> {
    let res = lsolve::min_l1_direction(&subproblem(a, r)?).map_err(to_py)?;
    direction_dict(py, &res)
}

/// Minimum-Euclidean-norm solution of `A w = r`.
#[pyfunction]
fn min_l2_direction(py: Python<'_>, a: Vec<Vec<f64>>, r: Vec<f64>) -> PyResult<Bound<'_, PyDict>> {
    let res = lsolve::min_l2_direction(&subproblem(a, r)?).map_err(to_py)?;
    direction_dict(py, &res)
}

#[pyfunction]
fn h0_series(delta: f64) -> PyResult<f64> {
    bounds::h0_series(delta).map_err(to_py)
}

#[pyfunction]
fn h_tail(j: u32, delta: f64) -> PyResult<f64> {
    bounds::h_tail(j, delta).map_err(to_py)
}

#[pyfunction]
#[allow(non_snake_case)]
fn k_max_bound(mu: f64, L_const: f64, s: f64) -> PyResult<u64> {
    bounds::k_max_bound(mu, L_const, s).map_err(to_py)
}

#[pyfunction]
#[allow(non_snake_case)]
fn k_eps_bound(mu: f64, L_const: f64, s: f64, eps: f64) -> PyResult<u64> {
    bounds::k_eps_bound(mu, L_const, s, eps).map_err(to_py)
}

#[pyfunction]
#[allow(non_snake_case)]
fn distance_estimate(k: u64, mu: f64, L_const: f64, s: f64) -> PyResult<f64> {
    bounds::distance_estimate(k, mu, L_const, s).map_err(to_py)
}

fn report_dict<'py>(py: Python<'py>, rep: &ConvergenceReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("condition_holds", rep.condition_holds)?;
    d.set_item("h_ratio", rep.h_ratio)?;
    d.set_item("radius_bound", rep.radius_bound)?;
    d.set_item("u_star_distance_bound", rep.u_star_distance_bound)?;
    d.set_item("diagnostic", rep.diagnostic.clone())?;
    Ok(d)
}

#[pyfunction]
#[allow(non_snake_case)]
fn kantorovich_check(py: Python<'_>, mu0: f64, L_const: f64, s: f64, rho: f64) -> PyResult<Bound<'_, PyDict>> {
    let c = ProblemConstants { mu0, mu: mu0, l_const: L_const, rho, s };
    report_dict(py, &bounds::kantorovich_check(&c).map_err(to_py)?)
}

#[pyfunction]
#[allow(non_snake_case)]
fn mysovskikh_check(py: Python<'_>, mu: f64, L_const: f64, s: f64, rho: f64) -> PyResult<Bound<'_, PyDict>> {
    let c = ProblemConstants { mu0: mu, mu, l_const: L_const, rho, s };
    report_dict(py, &bounds::mysovskikh_check(&c).map_err(to_py)?)
}

#[pymodule]
fn pysparsectl(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySystemModel>()?;
    m.add_class::<PyShootingProblem>()?;
    m.add_class::<PySolveResult>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(refine_support, m)?)?;
    m.add_function(wrap_pyfunction!(solve_config_file, m)?)?;
    m.add_function(wrap_pyfunction!(min_l1_direction, m)?)?;
    m.add_function(wrap_pyfunction!(min_l2_direction, m)?)?;
    m.add_function(wrap_pyfunction!(h0_series, m)?)?;
    m.add_function(wrap_pyfunction!(h_tail, m)?)?;
    m.add_function(wrap_pyfunction!(k_max_bound, m)?)?;
    m.add_function(wrap_pyfunction!(k_eps_bound, m)?)?;
    m.add_function(wrap_pyfunction!(distance_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(kantorovich_check, m)?)?;
    m.add_function(wrap_pyfunction!(mysovskikh_check, m)?)?;
    Ok(())
}
