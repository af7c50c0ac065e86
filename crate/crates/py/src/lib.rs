//! Python bindings: noise laws, maps, analytic checks and ensembles.
//!
//! Structured results cross the boundary as JSON and come back as plain
//! dicts and lists.

use noisectl::control::{check_stabilize_k, check_stabilize_zero};
use noisectl::distributions::stabilization_threshold;
use noisectl::{verify, Error, ExperimentConfig, MapSpec, NoiseFamily, NoiseSpec};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;
use serde::Serialize;

fn to_py_err(e: Error) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

/// Serializes `value` and hands it to `json.loads`.
fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_json<T: serde::de::DeserializeOwned>(text: &str) -> PyResult<T> {
    serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pyclass(name = "NoiseSpec", module = "noisectl", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyNoiseSpec(NoiseSpec);

#[pymethods]
impl PyNoiseSpec {
    #[staticmethod]
    fn polynomial(s: u32) -> PyResult<Self> {
        Self::checked(NoiseSpec::PolynomialSymmetric { s })
    }

    #[staticmethod]
    fn discrete(l: u32) -> PyResult<Self> {
        Self::checked(NoiseSpec::DiscreteUniform { l })
    }

    #[staticmethod]
    fn piecewise(l: u32, delta: f64) -> PyResult<Self> {
        Self::checked(NoiseSpec::PiecewiseUniform { l, delta })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Self::checked(from_json(text)?)
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.0).expect("noise serializes")
    }

    fn density(&self, x: f64) -> f64 {
        self.0.density(x)
    }

    fn cdf(&self, x: f64) -> f64 {
        self.0.cdf(x)
    }

    /// Inverse-transform sample for `u` in `[0, 1)`.
    fn sample(&self, u: f64) -> f64 {
        self.0.sample(u)
    }

    fn log_gain_eta(&self, sigma: f64) -> PyResult<f64> {
        self.0.log_gain_eta(sigma).map_err(to_py_err)
    }

    fn inverse_power_expectation(&self, f: f64, sigma: f64, alpha: f64) -> PyResult<f64> {
        self.0.inverse_power_expectation(f, sigma, alpha).map_err(to_py_err)
    }

    fn __repr__(&self) -> String {
        format!("NoiseSpec({:?})", self.0)
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.0 == other.0
    }
}

impl PyNoiseSpec {
    fn checked(spec: NoiseSpec) -> PyResult<Self> {
        spec.validate().map_err(to_py_err)?;
        Ok(PyNoiseSpec(spec))
    }
}

#[pyclass(name = "MapSpec", module = "noisectl", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyMapSpec(MapSpec);

#[pymethods]
impl PyMapSpec {
    #[staticmethod]
    fn ricker(r: f64) -> PyResult<Self> {
        Self::checked(MapSpec::Ricker { r })
    }

    #[staticmethod]
    fn logistic(r: f64) -> PyResult<Self> {
        Self::checked(MapSpec::Logistic { r })
    }

    #[staticmethod]
    fn modified_beverton_holt() -> Self {
        PyMapSpec(MapSpec::ModifiedBevertonHolt)
    }

    #[staticmethod]
    fn piecewise_bh() -> Self {
        PyMapSpec(MapSpec::PiecewiseBh)
    }

    #[staticmethod]
    fn linear(a: f64) -> PyResult<Self> {
        Self::checked(MapSpec::Linear { a })
    }

    /// The rate seen by `u = x - k` around the equilibrium `k`.
    fn shifted(&self, k: f64) -> PyResult<Self> {
        MapSpec::shifted(self.0.clone(), k).map(PyMapSpec).map_err(to_py_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Self::checked(from_json(text)?)
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.0).expect("map serializes")
    }

    fn f(&self, x: f64) -> f64 {
        self.0.f(x)
    }

    fn full(&self, x: f64) -> f64 {
        self.0.full(x)
    }

    fn derivative(&self, x: f64) -> f64 {
        self.0.derivative(x)
    }

    fn default_interval(&self) -> (f64, f64) {
        self.0.default_interval()
    }

    fn bound_h(&self, lo: f64, hi: f64) -> PyResult<f64> {
        self.0.bound_h(lo, hi).map_err(to_py_err)
    }

    fn shifted_bound<'py>(&self, py: Python<'py>, k: f64) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.0.shifted_bound(k).map_err(to_py_err)?)
    }

    /// `[{"x", "slope", "stable"}, ...]` on `[lo, hi]`.
    fn fixed_points<'py>(&self, py: Python<'py>, lo: f64, hi: f64) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.0.fixed_points(lo, hi))
    }

    fn __repr__(&self) -> String {
        format!("MapSpec({:?})", self.0)
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.0 == other.0
    }
}

impl PyMapSpec {
    fn checked(map: MapSpec) -> PyResult<Self> {
        map.validate().map_err(to_py_err)?;
        Ok(PyMapSpec(map))
    }
}

/// A full experiment, built from the same JSON the CLI reads.
#[pyclass(name = "Experiment", module = "noisectl")]
pub struct PyExperiment(ExperimentConfig);

#[pymethods]
impl PyExperiment {
    #[new]
    fn new(config_json: &str) -> PyResult<Self> {
        let cfg = ExperimentConfig::from_json(config_json).map_err(to_py_err)?;
        cfg.validate().map_err(to_py_err)?;
        Ok(PyExperiment(cfg))
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    #[getter]
    fn n_runs(&self) -> usize {
        self.0.n_runs
    }

    #[setter]
    fn set_n_runs(&mut self, v: usize) {
        self.0.n_runs = v;
    }

    #[getter]
    fn n_steps(&self) -> usize {
        self.0.n_steps
    }

    #[setter]
    fn set_n_steps(&mut self, v: usize) {
        self.0.n_steps = v;
    }

    #[getter]
    fn master_seed(&self) -> u64 {
        self.0.master_seed
    }

    #[setter]
    fn set_master_seed(&mut self, v: u64) {
        self.0.master_seed = v;
    }

    #[getter]
    fn threads(&self) -> usize {
        self.0.threads
    }

    #[setter]
    fn set_threads(&mut self, v: usize) {
        self.0.threads = v;
    }

    fn threshold_report(&self) -> Vec<(String, String)> {
        self.0.threshold_report()
    }

    /// Runs the ensemble; returns `{"summary": {...}, "trajectories": [...]}`.
    /// Trajectory values are only included with `keep_values=True`.
    #[pyo3(signature = (keep_values = false))]
    fn run<'py>(&self, py: Python<'py>, keep_values: bool) -> PyResult<Bound<'py, PyAny>> {
        let cfg = self.0.clone();
        let ens = py.detach(move || cfg.run(keep_values)).map_err(to_py_err)?;
        #[derive(Serialize)]
        struct Out<'a> {
            summary: &'a noisectl::EnsembleSummary,
            trajectories: &'a [noisectl::Trajectory],
        }
        to_py(py, &Out { summary: &ens.summary, trajectories: &ens.trajectories })
    }

    fn __repr__(&self) -> String {
        format!("Experiment({:?}, {:?}, {:?})", self.0.map, self.0.noise, self.0.scheme)
    }
}

/// Analytic check of `ln H < η` for stabilizing zero.
#[pyfunction]
#[pyo3(signature = (map, noise, sigma, interval = None))]
fn stabilize_zero_report<'py>(
    py: Python<'py>,
    map: &PyMapSpec,
    noise: &PyNoiseSpec,
    sigma: f64,
    interval: Option<(f64, f64)>,
) -> PyResult<Bound<'py, PyAny>> {
    let interval = interval.unwrap_or_else(|| map.0.default_interval());
    to_py(py, &check_stabilize_zero(&map.0, interval, &noise.0, sigma).map_err(to_py_err)?)
}

/// Analytic check of `ln ℋ < η` for stabilizing the equilibrium `k`.
#[pyfunction]
fn stabilize_k_report<'py>(
    py: Python<'py>,
    map: &PyMapSpec,
    k: f64,
    noise: &PyNoiseSpec,
    sigma: f64,
) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &check_stabilize_k(&map.0, k, &noise.0, sigma).map_err(to_py_err)?)
}

/// Stabilizing noise parameters for a bound `h`. `family` is "polynomial",
/// "discrete" or "piecewise"; the last two need `l`.
#[pyfunction]
#[pyo3(signature = (family, h, l = None))]
fn threshold<'py>(py: Python<'py>, family: &str, h: f64, l: Option<u32>) -> PyResult<Bound<'py, PyAny>> {
    let need_l = || l.ok_or_else(|| PyValueError::new_err(format!("{family} noise needs l")));
    let family = match family {
        "polynomial" => NoiseFamily::PolynomialSymmetric,
        "discrete" => NoiseFamily::DiscreteUniform { l: need_l()? },
        "piecewise" => NoiseFamily::PiecewiseUniform { l: need_l()? },
        other => return Err(PyValueError::new_err(format!("unknown noise family {other:?}"))),
    };
    to_py(py, &stabilization_threshold(family, h).map_err(to_py_err)?)
}

/// Runs the acceptance checks; one dict per criterion.
#[pyfunction]
#[pyo3(signature = (threads = 0))]
fn run_verify<'py>(py: Python<'py>, threads: usize) -> PyResult<Bound<'py, PyAny>> {
    let outcomes = py.detach(move || verify::run_all(threads));
    to_py(py, &outcomes)
}

#[pymodule]
#[pyo3(name = "noisectl")]
fn noisectl_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNoiseSpec>()?;
    m.add_class::<PyMapSpec>()?;
    m.add_class::<PyExperiment>()?;
    m.add_function(wrap_pyfunction!(stabilize_zero_report, m)?)?;
    m.add_function(wrap_pyfunction!(stabilize_k_report, m)?)?;
    m.add_function(wrap_pyfunction!(threshold, m)?)?;
    m.add_function(wrap_pyfunction!(run_verify, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
