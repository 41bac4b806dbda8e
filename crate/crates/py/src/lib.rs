//! Python bindings: problems, the particle system, single paths, and the
//! config-driven convergence and assumption runs.

use std::sync::Arc;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use tamed_euler::analysis::{envelope_max as envelope, particle_generator_exponent};
use tamed_euler::cli::run_checks;
use tamed_euler::config::{ProblemConfig, RunConfig};
use tamed_euler::harness::run_coupled_experiment;
use tamed_euler::sde::{LinearDrift, PolynomialDrift};
use tamed_euler::{
    build_problem, simulate_path, tamed_drift, Error, LyapunovKind, NoiseSource, ParticleSystemSpec, SdeProblem,
    TamingPolicy,
};

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        Error::Usage(_) | Error::DomainBoundary { .. } => PyValueError::new_err(err.to_string()),
        _ => PyRuntimeError::new_err(err.to_string()),
    }
}

fn json_to_py<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

/// An SDE with a Lyapunov function, ready for the tamed scheme.
#[pyclass(name = "Problem", module = "tamed_euler_py", frozen)]
struct PyProblem {
    inner: SdeProblem,
}

#[pymethods]
impl PyProblem {
    /// Builds a problem from a TOML `[problem]` table body (with `kind = ...`).
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let config: ProblemConfig = toml::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(PyProblem { inner: config.build().map_err(to_py)? })
    }

    #[staticmethod]
    #[pyo3(signature = (particle_count, alpha, sigma=1.0, spacing=1.0, horizon=1.0))]
    fn particles(particle_count: usize, alpha: f64, sigma: f64, spacing: f64, horizon: f64) -> PyResult<Self> {
        let spec = ParticleSystemSpec::equispaced(particle_count, alpha, sigma, spacing);
        Ok(PyProblem { inner: build_problem(&spec, horizon).map_err(to_py)? })
    }

    #[staticmethod]
    #[pyo3(signature = (initial_state, lyapunov_constant=1.0, noise_intensity=1.0, horizon=1.0))]
    fn polynomial(initial_state: Vec<f64>, lyapunov_constant: f64, noise_intensity: f64, horizon: f64) -> PyResult<Self> {
        let model = PolynomialDrift::new(initial_state.len(), lyapunov_constant);
        let inner = SdeProblem::new(Arc::new(model), noise_intensity, initial_state, horizon).map_err(to_py)?;
        Ok(PyProblem { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (initial_state, rate=1.0, noise_intensity=1.0, horizon=1.0))]
    fn linear(initial_state: Vec<f64>, rate: f64, noise_intensity: f64, horizon: f64) -> PyResult<Self> {
        let model = LinearDrift::new(initial_state.len(), rate, 1.0);
        let inner = SdeProblem::new(Arc::new(model), noise_intensity, initial_state, horizon).map_err(to_py)?;
        Ok(PyProblem { inner })
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.inner.horizon()
    }

    #[getter]
    fn noise_intensity(&self) -> f64 {
        self.inner.noise_intensity()
    }

    #[getter]
    fn initial_state(&self) -> Vec<f64> {
        self.inner.initial_state().to_vec()
    }

    fn in_domain(&self, x: Vec<f64>) -> bool {
        self.inner.in_domain(&x)
    }

    fn drift(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.drift_at(&x).map_err(to_py)
    }

    fn lyapunov(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.lyapunov_at(&x).map_err(to_py)
    }

    /// Returns `(drift, tamed)` as the scheme with `step_count` steps per unit time sees it.
    fn tamed_drift(&self, x: Vec<f64>, step_count: u64) -> PyResult<(Vec<f64>, bool)> {
        let policy = TamingPolicy::new(step_count).map_err(to_py)?;
        tamed_drift(&self.inner, &policy, &x).map_err(to_py)
    }

    /// One scheme path; returns a dict with `times`, `states`, `tamed`,
    /// `first_taming_time`.
    #[pyo3(signature = (step_count, seed=0, path_index=0))]
    fn simulate<'py>(&self, py: Python<'py>, step_count: u64, seed: u64, path_index: u64) -> PyResult<Bound<'py, PyDict>> {
        let policy = TamingPolicy::new(step_count).map_err(to_py)?;
        let noise = NoiseSource::new(seed).path(
            path_index,
            step_count,
            self.inner.grid_steps(step_count),
            self.inner.dimension(),
        );
        let record = py.detach(|| simulate_path(&self.inner, &policy, &noise)).map_err(to_py)?;
        let out = PyDict::new(py);
        out.set_item("times", record.times)?;
        out.set_item("states", record.states)?;
        out.set_item("tamed", record.tamed_flags)?;
        out.set_item("first_taming_time", record.first_taming_time)?;
        Ok(out)
    }

    fn __repr__(&self) -> String {
        format!(
            "Problem(dimension={}, noise_intensity={}, horizon={})",
            self.inner.dimension(),
            self.inner.noise_intensity(),
            self.inner.horizon()
        )
    }
}

/// Runs the coupled convergence experiment described by a full run config
/// and returns the summary as a dict.
#[pyfunction]
#[pyo3(signature = (config_toml, overrides=Vec::new()))]
fn converge<'py>(py: Python<'py>, config_toml: &str, overrides: Vec<String>) -> PyResult<Bound<'py, PyAny>> {
    let config = RunConfig::from_toml_str(config_toml, &overrides).map_err(to_py)?;
    let summary = py
        .detach(|| -> tamed_euler::Result<String> {
            let problem = config.problem.build()?;
            Ok(run_coupled_experiment(&problem, &config.plan)?.summary_json())
        })
        .map_err(to_py)?;
    json_to_py(py, &summary)
}

/// Runs the assumption checks of a run config; returns one dict per condition.
#[pyfunction]
#[pyo3(signature = (config_toml, overrides=Vec::new()))]
fn check<'py>(py: Python<'py>, config_toml: &str, overrides: Vec<String>) -> PyResult<Bound<'py, PyAny>> {
    let config = RunConfig::from_toml_str(config_toml, &overrides).map_err(to_py)?;
    let reports = py.detach(|| run_checks(&config)).map_err(to_py)?;
    let text = serde_json::to_string(&reports).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    json_to_py(py, &text)
}

/// Exponent `q` of the generator bound for the particle Lyapunov function.
#[pyfunction]
#[pyo3(signature = (p, alpha, hat=false))]
fn generator_exponent(p: f64, alpha: f64, hat: bool) -> PyResult<f64> {
    let kind = if hat { LyapunovKind::Hat } else { LyapunovKind::Primary };
    particle_generator_exponent(p, alpha, kind).map_err(to_py)
}

/// `max_{t>0} (−a t^{−p} + b t^{−q})`.
#[pyfunction]
fn envelope_max(a: f64, b: f64, p: f64, q: f64) -> PyResult<f64> {
    envelope(a, b, p, q).map_err(to_py)
}

#[pymodule]
fn tamed_euler_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProblem>()?;
    m.add_function(wrap_pyfunction!(converge, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(generator_exponent, m)?)?;
    m.add_function(wrap_pyfunction!(envelope_max, m)?)?;
    Ok(())
}
