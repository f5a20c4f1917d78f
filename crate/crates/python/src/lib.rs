//! Python bindings for `gridfilter`.

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use gridfilter::filter;
use gridfilter::grid::Grid;
use gridfilter::harness::{self, ExperimentConfig};
use gridfilter::models::{self, InitialLaw, MeanFn, NarModel, ObservationModel, ScalarMap, TruncGaussNar};
use gridfilter::particle::{self, BootstrapFilter};
use gridfilter::rng::StreamKey;
use gridfilter::transition::{self, BeliefVector, TransitionMatrix};

fn to_py(e: gridfilter::Error) -> PyErr {
    match e.exit_code() {
        4 => PyOSError::new_err(e.to_string()),
        3 => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for gridfilter::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

#[pyclass(name = "Grid", module = "gridfilter_py", frozen)]
struct PyGrid(Grid);

#[pymethods]
impl PyGrid {
    /// Uniform grid on `[a, b]^dim` with `levels` cells per axis.
    #[new]
    #[pyo3(signature = (a, b, levels, dim = 1))]
    fn new(a: f64, b: f64, levels: usize, dim: usize) -> PyResult<Self> {
        Grid::uniform(a, b, dim, levels).py().map(Self)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn center(&self, l: usize) -> PyResult<Vec<f64>> {
        if l >= self.0.len() {
            return Err(PyValueError::new_err(format!("cell {l} out of range")));
        }
        Ok(self.0.center(l).to_vec())
    }

    fn centers(&self) -> Vec<Vec<f64>> {
        self.0.centers().map(<[f64]>::to_vec).collect()
    }

    fn quantize(&self, x: Vec<f64>) -> PyResult<usize> {
        self.0.quantize(&x).py()
    }

    fn cell_bounds(&self, l: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
        self.0.cell_bounds(l).py()
    }

    fn max_quantization_error(&self) -> f64 {
        self.0.max_quantization_error()
    }

    fn __repr__(&self) -> String {
        let ax = self.0.axes()[0];
        format!(
            "Grid({}, {}, levels={}, dim={})",
            ax.lower,
            ax.upper,
            ax.levels,
            self.0.dim()
        )
    }
}

#[pyclass(name = "TruncGaussNar", module = "gridfilter_py", frozen)]
struct PyNar(TruncGaussNar);

#[pymethods]
impl PyNar {
    /// `h` is one of `tanh` (`bound * tanh(scale * x)`), `linear`
    /// (`scale * x` clipped to `[-bound, bound]`) or `constant` (`h = bound`).
    #[new]
    #[pyo3(signature = (h = "tanh", scale = 1.3, bound = 1.0, alpha = 1.0, sigma = 0.3))]
    fn new(h: &str, scale: f64, bound: f64, alpha: f64, sigma: f64) -> PyResult<Self> {
        let map = match h {
            "tanh" => ScalarMap::Tanh {
                amplitude: bound,
                scale,
            },
            "linear" => ScalarMap::ClippedLinear { slope: scale, bound },
            "constant" => ScalarMap::Constant(bound),
            _ => return Err(PyValueError::new_err(format!("unknown h `{h}`"))),
        };
        TruncGaussNar::new(map, alpha, sigma).py().map(Self)
    }

    #[staticmethod]
    fn reference() -> Self {
        Self(TruncGaussNar::reference())
    }

    fn h(&self, x: f64) -> f64 {
        self.0.h(x)
    }

    fn fw_density(&self, w: f64) -> f64 {
        self.0.fw_density(w)
    }

    fn kernel_density(&self, y: f64, x: f64) -> f64 {
        self.0.kernel_density(y, x)
    }

    #[getter]
    fn half_width(&self) -> f64 {
        self.0.half_width()
    }

    /// Grid of `levels` cells spanning the state support.
    fn grid(&self, levels: usize) -> PyResult<PyGrid> {
        let b = self.0.half_width();
        Grid::uniform(-b, b, 1, levels).py().map(PyGrid)
    }

    fn closed_form_transition(&self, grid: &PyGrid) -> PyResult<PyTransition> {
        transition::nar_closed_form_transition(&self.0, &grid.0)
            .py()
            .map(PyTransition)
    }

    /// Drift bound on the Type II regularity deficit at `x`.
    fn crt2_bound(&self, grid: &PyGrid, x: f64) -> PyResult<f64> {
        gridfilter::regularity::nar_crt2_bound(&self.0, &grid.0, x).py()
    }
}

#[pyclass(name = "TransitionMatrix", module = "gridfilter_py", frozen)]
struct PyTransition(TransitionMatrix);

#[pymethods]
impl PyTransition {
    /// `rows[i][j] = P(next = i | current = j)`; columns must sum to 1.
    #[staticmethod]
    fn from_rows(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        TransitionMatrix::from_rows(&rows, 1e-10).py().map(Self)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        TransitionMatrix::load(&path).py().map(Self)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(&path).py()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn get(&self, i: usize, j: usize) -> PyResult<f64> {
        if i >= self.0.len() || j >= self.0.len() {
            return Err(PyValueError::new_err("index out of range"));
        }
        Ok(self.0.get(i, j))
    }

    fn to_rows(&self) -> Vec<Vec<f64>> {
        let n = self.0.len();
        (0..n).map(|i| (0..n).map(|j| self.0.get(i, j)).collect()).collect()
    }

    fn column_sums(&self) -> Vec<f64> {
        self.0.column_sums()
    }

    #[pyo3(signature = (v, rho = 1))]
    fn apply(&self, v: Vec<f64>, rho: usize) -> PyResult<Vec<f64>> {
        if v.len() != self.0.len() {
            return Err(PyValueError::new_err("length mismatch"));
        }
        Ok(self.0.apply_power(&v, rho))
    }
}

#[pyclass(name = "ObservationModel", module = "gridfilter_py", frozen)]
struct PyObservation(ObservationModel);

#[pymethods]
impl PyObservation {
    /// `y ~ N(g(x) 1_N, variance I)` with `g` either `identity` or `cubic`.
    #[new]
    #[pyo3(signature = (obs_dim, mean = "cubic", variance = 2.0))]
    fn new(obs_dim: usize, mean: &str, variance: f64) -> PyResult<Self> {
        let mean = MeanFn::from_name(mean).ok_or_else(|| PyValueError::new_err(format!("unknown mean `{mean}`")))?;
        ObservationModel::isotropic(obs_dim, mean, variance).py().map(Self)
    }

    #[getter]
    fn obs_dim(&self) -> usize {
        self.0.obs_dim()
    }

    fn log_likelihood(&self, x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
        self.0.log_likelihood(0, &x, &y).py()
    }
}

/// Runs the grid filter and returns `(estimates, covariance diagonals)`,
/// one entry per observation. `init` defaults to the uniform belief.
#[pyfunction]
#[pyo3(signature = (p, grid, obs, observations, init = None))]
fn run_filter(
    p: &PyTransition,
    grid: &PyGrid,
    obs: &PyObservation,
    observations: Vec<Vec<f64>>,
    init: Option<Vec<f64>>,
) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let init = match init {
        Some(v) => BeliefVector::new(v).py()?,
        None => BeliefVector::uniform(grid.0.len()),
    };
    let out = filter::run_filter(&p.0, &grid.0, &obs.0, &observations, &init).py()?;
    Ok(out.into_iter().map(|o| (o.estimate, o.covariance_diagonal)).unzip())
}

/// Simulates `(states, observations)` of the autoregression from a uniform
/// initial state: `states[0]` is `X_{-1}`.
#[pyfunction]
fn simulate(nar: &PyNar, obs: &PyObservation, horizon: usize, seed: u64) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let model = NarModel::new(nar.0.clone(), InitialLaw::Uniform).py()?;
    let tr = models::simulate_trajectory(&model, &obs.0, horizon, &StreamKey::new(seed)).py()?;
    Ok((tr.states.into_iter().map(|s| s[0]).collect(), tr.observations))
}

/// Bootstrap particle filter posterior means, one per observation.
#[pyfunction]
#[pyo3(signature = (nar, obs, observations, particles = 5000, seed = 0))]
fn particle_filter(
    nar: &PyNar,
    obs: &PyObservation,
    observations: Vec<Vec<f64>>,
    particles: usize,
    seed: u64,
) -> PyResult<Vec<f64>> {
    let model = NarModel::new(nar.0.clone(), InitialLaw::Uniform).py()?;
    let pf = BootstrapFilter::new(&model, &obs.0, particles, &StreamKey::new(seed)).py()?;
    Ok(pf.run(&observations).py()?.into_iter().map(|m| m[0]).collect())
}

/// Ancestor indices from systematic resampling with offset `u` in `[0, 1)`.
#[pyfunction]
fn systematic_resample(weights: Vec<f64>, u: f64, n: usize) -> PyResult<Vec<usize>> {
    particle::systematic_resample(&weights, u, n).py()
}

fn config(text: &str, overrides: Vec<String>) -> PyResult<ExperimentConfig> {
    let mut cfg = ExperimentConfig::parse(text).py()?;
    for o in overrides {
        cfg.apply_override(&o).py()?;
    }
    Ok(cfg)
}

/// Error-versus-resolution sweep; returns `(N, L_S, trial, worst_abs_error)` rows.
#[pyfunction]
#[pyo3(signature = (config_text = "", overrides = Vec::new()))]
fn error_sweep(py: Python<'_>, config_text: &str, overrides: Vec<String>) -> PyResult<Vec<(usize, usize, usize, f64)>> {
    let cfg = config(config_text, overrides)?;
    let rows = py.detach(|| harness::run_error_sweep(&cfg)).py()?;
    Ok(rows
        .into_iter()
        .map(|r| (r.obs_dim, r.levels, r.trial, r.worst_abs_error))
        .collect())
}

/// Quantization bound checks; returns `(check, L_S, measured, bound, pass)` rows.
#[pyfunction]
#[pyo3(signature = (config_text = "", overrides = Vec::new()))]
fn bound_checks(
    py: Python<'_>,
    config_text: &str,
    overrides: Vec<String>,
) -> PyResult<Vec<(String, usize, f64, f64, bool)>> {
    let cfg = config(config_text, overrides)?;
    let rows = py.detach(|| harness::run_bound_checks(&cfg)).py()?;
    Ok(rows
        .into_iter()
        .map(|r| (r.check.to_string(), r.levels, r.measured, r.bound, r.pass))
        .collect())
}

#[pymodule]
fn gridfilter_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyNar>()?;
    m.add_class::<PyTransition>()?;
    m.add_class::<PyObservation>()?;
    m.add_function(wrap_pyfunction!(run_filter, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(particle_filter, m)?)?;
    m.add_function(wrap_pyfunction!(systematic_resample, m)?)?;
    m.add_function(wrap_pyfunction!(error_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(bound_checks, m)?)?;
    Ok(())
}
