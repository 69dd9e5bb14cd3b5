//! Python bindings.

use std::path::PathBuf;

use num_complex::Complex64 as C64;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;

use ::monorec::error::Error;
use ::monorec::forward::{self, Sign};
use ::monorec::harness::{self, ExperimentConfig};
use ::monorec::io::{self, Provenance};
use ::monorec::numerics::CircleGrid;
use ::monorec::potentials::{self, PotentialSpec};
use ::monorec::recover;
use ::monorec::rhp;

create_exception!(monorec, NumericalError, PyException);

fn err(e: Error) -> PyErr {
    if e.is_io() {
        PyOSError::new_err(e.to_string())
    } else if e.is_numerical() {
        NumericalError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn sign(s: &str) -> PyResult<Sign> {
    match s {
        "+" | "plus" => Ok(Sign::Plus),
        "-" | "minus" => Ok(Sign::Minus),
        _ => Err(PyValueError::new_err(format!("sign must be '+' or '-', got {s:?}"))),
    }
}

fn json_value(py: Python<'_>, v: &serde_json::Value) -> PyResult<Py<PyAny>> {
    let json = PyModule::import(py, "json")?;
    Ok(json.call_method1("loads", (v.to_string(),))?.unbind())
}

fn provenance(stage: &str) -> Provenance {
    Provenance { stage: stage.into(), config_hash: None, extra: serde_json::Value::Null }
}

/// Matrix potential sampled on a square grid.
#[pyclass(name = "Potential", module = "monorec", skip_from_py_object)]
#[derive(Clone)]
struct Potential(potentials::MatrixField);

#[pymethods]
impl Potential {
    /// Builds a fixture from its JSON spec, e.g.
    /// `{"kind": "smooth_compact", "amplitude": 1, "channels": 2, ...}`.
    #[staticmethod]
    fn fixture(spec: &str) -> PyResult<Self> {
        let spec: PotentialSpec = serde_json::from_str(spec).map_err(|e| PyValueError::new_err(e.to_string()))?;
        potentials::make_test_potential(&spec).map(Self).map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        io::load(&path).map(Self).map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        io::save(&self.0, &path, &provenance("potential")).map(|_| ()).map_err(err)
    }

    #[getter]
    fn channels(&self) -> usize {
        self.0.channels()
    }

    #[getter]
    fn nx(&self) -> usize {
        self.0.nx()
    }

    #[getter]
    fn half_width(&self) -> f64 {
        self.0.half_width()
    }

    /// `(nx, nx, n, n)`.
    #[getter]
    fn shape(&self) -> (usize, usize, usize, usize) {
        let (m, n) = (self.0.nx(), self.0.channels());
        (m, m, n, n)
    }

    /// Flat values in `shape` order.
    fn values(&self) -> Vec<C64> {
        self.0.values().to_vec()
    }

    fn max_norm(&self) -> f64 {
        self.0.max_norm()
    }
}

/// Kernel on the torus `T_N × T_N` (scattering amplitude or `h±`).
#[pyclass(name = "TorusKernel", module = "monorec", skip_from_py_object)]
#[derive(Clone)]
struct TorusKernel(forward::TorusKernel);

#[pymethods]
impl TorusKernel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        io::load(&path).map(Self).map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        io::save(&self.0, &path, &provenance("kernel")).map(|_| ()).map_err(err)
    }

    #[getter]
    fn energy(&self) -> f64 {
        self.0.energy()
    }

    #[getter]
    fn size(&self) -> usize {
        self.0.size()
    }

    #[getter]
    fn channels(&self) -> usize {
        self.0.channels()
    }

    /// `(N, N, n, n)`.
    #[getter]
    fn shape(&self) -> (usize, usize, usize, usize) {
        let (m, n) = (self.0.size(), self.0.channels());
        (m, m, n, n)
    }

    fn values(&self) -> Vec<C64> {
        self.0.values().to_vec()
    }

    fn l2_norm(&self) -> f64 {
        self.0.l2_norm()
    }

    fn max_norm(&self) -> f64 {
        self.0.max_norm()
    }
}

/// `V_appr` on a window of grid points.
#[pyclass(name = "Reconstruction", module = "monorec")]
struct Reconstruction(rhp::ReconstructionField);

#[pymethods]
impl Reconstruction {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        io::load(&path).map(Self).map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        io::save(&self.0, &path, &provenance("rhp")).map(|_| ()).map_err(err)
    }

    #[getter]
    fn source(&self) -> String {
        self.0.source.clone()
    }

    fn points(&self) -> Vec<(f64, f64)> {
        self.0.points().into_iter().map(|[a, b]| (a, b)).collect()
    }

    /// One row-major `n×n` list per point.
    fn values(&self) -> Vec<Vec<C64>> {
        let n = self.0.channels;
        self.0.values().iter().map(|m| (0..n * n).map(|k| m[(k / n, k % n)]).collect()).collect()
    }

    fn max_error(&self, truth: &Potential) -> PyResult<f64> {
        self.0.max_error(&truth.0).map_err(err)
    }

    fn relative_l2_error(&self, truth: &Potential) -> PyResult<f64> {
        self.0.relative_l2_error(&truth.0).map_err(err)
    }
}

/// Scattering amplitude on the `N`-point circle grid.
#[pyfunction]
fn scattering_amplitude(py: Python<'_>, v: &Potential, energy: f64, circle_grid: usize) -> PyResult<TorusKernel> {
    let grid = CircleGrid::new(circle_grid).map_err(err)?;
    py.detach(|| forward::scattering_amplitude(&v.0, energy, grid, Default::default())).map(TorusKernel).map_err(err)
}

/// `h±` evaluated directly from the potential.
#[pyfunction]
fn h_direct(py: Python<'_>, v: &Potential, energy: f64, sign_: &str, circle_grid: usize) -> PyResult<TorusKernel> {
    let (s, grid) = (sign(sign_)?, CircleGrid::new(circle_grid).map_err(err)?);
    py.detach(|| forward::h_pm_direct(&v.0, energy, s, grid, Default::default())).map(TorusKernel).map_err(err)
}

/// `h±` from the scattering amplitude.
#[pyfunction]
fn algo2_h(py: Python<'_>, f: &TorusKernel, sign_: &str) -> PyResult<TorusKernel> {
    let s = sign(sign_)?;
    py.detach(|| recover::algo2_h(&f.0, s)).map(TorusKernel).map_err(err)
}

/// `V_appr` from `h±` on every `stride`-th grid point of `like` within
/// `radius` of the origin.
#[pyfunction]
#[pyo3(signature = (h_plus, h_minus, like, stride = 4, radius = 1.25))]
fn reconstruct(py: Python<'_>, h_plus: &TorusKernel, h_minus: &TorusKernel, like: &Potential, stride: usize, radius: f64) -> PyResult<Reconstruction> {
    let w = rhp::Window::for_field(&like.0, stride, radius).map_err(err)?;
    py.detach(|| rhp::reconstruct(&h_plus.0, &h_minus.0, &w, "algo2")).map(Reconstruction).map_err(err)
}

/// Runs the configured experiment; returns one row per energy.
#[pyfunction]
#[pyo3(signature = (config = "{}", out = None))]
fn run_pipeline(py: Python<'_>, config: &str, out: Option<PathBuf>) -> PyResult<Py<PyAny>> {
    let cfg = ExperimentConfig::from_json(config).map_err(err)?;
    let runs = py.detach(|| harness::run_pipeline(&cfg, out.as_deref())).map_err(err)?;
    let rows: Vec<_> = runs.iter().map(|r| &r.row).collect();
    json_value(py, &serde_json::to_value(rows).map_err(|e| err(e.into()))?)
}

/// Config with every default filled in, as a dict.
#[pyfunction]
#[pyo3(signature = (config = "{}"))]
fn materialize_config(py: Python<'_>, config: &str) -> PyResult<Py<PyAny>> {
    let cfg = ExperimentConfig::from_json(config).map_err(err)?;
    json_value(py, &serde_json::from_str(&cfg.materialized()).map_err(|e| err(e.into()))?)
}

#[pyfunction]
#[pyo3(signature = (config = "{}"))]
fn config_hash(config: &str) -> PyResult<String> {
    ExperimentConfig::from_json(config).map(|c| c.hash()).map_err(err)
}

/// Header and shape of any container file.
#[pyfunction]
fn inspect(py: Python<'_>, path: PathBuf) -> PyResult<Py<PyAny>> {
    let c = io::load_any(&path).map_err(err)?;
    json_value(py, &c.describe())
}

#[pymodule]
fn monorec(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add_class::<Potential>()?;
    m.add_class::<TorusKernel>()?;
    m.add_class::<Reconstruction>()?;
    m.add_function(wrap_pyfunction!(scattering_amplitude, m)?)?;
    m.add_function(wrap_pyfunction!(h_direct, m)?)?;
    m.add_function(wrap_pyfunction!(algo2_h, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add_function(wrap_pyfunction!(materialize_config, m)?)?;
    m.add_function(wrap_pyfunction!(config_hash, m)?)?;
    m.add_function(wrap_pyfunction!(inspect, m)?)?;
    Ok(())
}
