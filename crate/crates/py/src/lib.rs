//! Python bindings: field construction and queries, prediction, and
//! closed-loop scenario runs.

use std::collections::HashMap;

use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use fovtrack::field::{self, FovParams, ScalarField3};
use fovtrack::prediction::{fit_prediction, ObservationBuffer};
use fovtrack::sim::{self, Scenario};
use fovtrack::Vec3;

fn err(e: fovtrack::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Pyramid depth that puts the field maximum at the observation distance.
#[pyfunction]
fn fov_depth(alpha_deg: f64, beta_deg: f64, distance: f64) -> PyResult<f64> {
    Ok(FovParams::from_degrees(alpha_deg, beta_deg, distance).map_err(err)?.depth)
}

/// Precomputed field-of-view distance field.
#[pyclass(frozen)]
struct FovField {
    inner: ScalarField3,
}

#[pymethods]
impl FovField {
    #[new]
    #[pyo3(signature = (alpha_deg = 69.4, beta_deg = 42.5, distance = 2.5, resolution = 0.05))]
    fn new(alpha_deg: f64, beta_deg: f64, distance: f64, resolution: f64) -> PyResult<Self> {
        let fov = FovParams::from_degrees(alpha_deg, beta_deg, distance).map_err(err)?;
        Ok(Self {
            inner: field::build_fov_esdf(&fov, resolution).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let inner = field::load_field(path).map_err(err)?;
        if inner.fov().is_none() {
            return Err(PyValueError::new_err("not a field-of-view field"));
        }
        Ok(Self { inner })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        field::save_field(&self.inner, path).map_err(err)
    }

    #[getter]
    fn depth(&self) -> f64 {
        self.inner.fov().expect("checked on construction").depth
    }

    #[getter]
    fn max_value(&self) -> f64 {
        self.inner.max_value()
    }

    #[getter]
    fn shape(&self) -> (usize, usize, usize) {
        let d = self.inner.spec().dims;
        (d[0], d[1], d[2])
    }

    /// Interpolated value and stored gradient at a body-frame point.
    fn query(&self, x: f64, y: f64, z: f64) -> (f64, (f64, f64, f64)) {
        let s = self.inner.query(&Vec3::new(x, y, z));
        (s.value, (s.gradient.x, s.gradient.y, s.gradient.z))
    }

    /// Values at many points; accepts any sequence of 3-sequences, e.g. an
    /// `(n, 3)` numpy array.
    fn values(&self, points: Vec<[f64; 3]>) -> Vec<f64> {
        points.iter().map(|p| self.inner.query(&Vec3::from(*p)).value).collect()
    }
}

/// Fits the prediction curve to evenly spaced observations (oldest first)
/// and evaluates it at `times`, seconds after the newest observation.
#[pyfunction]
fn predict(observations: Vec<[f64; 3]>, interval: f64, times: Vec<f64>) -> PyResult<Vec<[f64; 3]>> {
    let positions = observations.into_iter().map(Vec3::from).collect();
    let buffer = ObservationBuffer::new(interval, positions, 0.0).map_err(err)?;
    let curve = fit_prediction(&buffer).map_err(err)?;
    Ok(times
        .into_iter()
        .map(|t| {
            let p = curve.eval(t);
            [p.x, p.y, p.z]
        })
        .collect())
}

#[pyfunction]
fn builtin_scenarios() -> Vec<&'static str> {
    sim::builtin_names().to_vec()
}

/// Built-in scenario as scenario-file text.
#[pyfunction]
fn builtin_scenario(name: &str) -> PyResult<String> {
    sim::builtin(name)
        .map(|s| s.to_toml())
        .ok_or_else(|| PyKeyError::new_err(format!("no built-in scenario `{name}`")))
}

/// Runs a scenario given as scenario-file text. Returns a dict with
/// `metrics` (dict) and `trace` (dict of equal-length column lists).
#[pyfunction]
#[pyo3(signature = (scenario, seed = None, weights = None))]
fn simulate<'py>(
    py: Python<'py>,
    scenario: &str,
    seed: Option<u64>,
    weights: Option<HashMap<String, f64>>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut s = Scenario::from_toml(scenario).map_err(err)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    for (k, v) in weights.unwrap_or_default() {
        if !s.planner.weights.set(&k, v) {
            return Err(PyKeyError::new_err(format!("unknown weight `{k}`")));
        }
    }
    let (trace, m) = py
        .detach(|| {
            let (fov, robot) = sim::scenario_fields(&s)?;
            sim::run_scenario(&s, &s.planner, fov, robot)
        })
        .map_err(err)?;

    let metrics = PyDict::new(py);
    metrics.set_item("ticks", m.ticks)?;
    metrics.set_item("td_mean", m.tracking_distance.mean)?;
    metrics.set_item("td_std", m.tracking_distance.std)?;
    metrics.set_item("ae_mean", m.angle_error.mean)?;
    metrics.set_item("ae_std", m.angle_error.std)?;
    metrics.set_item("occlusion_rate", m.occlusion_rate)?;
    metrics.set_item("failure_rate", m.failure_rate)?;
    metrics.set_item("optimize_ms", m.optimize_ms.mean)?;
    metrics.set_item("planner_failures", m.planner_failures)?;

    let rows = &trace.rows;
    let col = |f: &dyn Fn(&sim::TraceRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    let t = PyDict::new(py);
    t.set_item("t", col(&|r| r.time))?;
    t.set_item("px", col(&|r| r.position.x))?;
    t.set_item("py", col(&|r| r.position.y))?;
    t.set_item("pz", col(&|r| r.position.z))?;
    t.set_item("yaw", col(&|r| r.yaw))?;
    t.set_item("tx", col(&|r| r.target.x))?;
    t.set_item("ty", col(&|r| r.target.y))?;
    t.set_item("tz", col(&|r| r.target.z))?;
    t.set_item("detected", rows.iter().map(|r| r.detected).collect::<Vec<_>>())?;
    t.set_item("occluded", rows.iter().map(|r| r.occluded).collect::<Vec<_>>())?;
    t.set_item("in_fov", rows.iter().map(|r| r.in_fov).collect::<Vec<_>>())?;

    let out = PyDict::new(py);
    out.set_item("metrics", metrics)?;
    out.set_item("trace", t)?;
    Ok(out)
}

#[pymodule]
fn pyfovtrack(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<FovField>()?;
    m.add_function(wrap_pyfunction!(fov_depth, m)?)?;
    m.add_function(wrap_pyfunction!(predict, m)?)?;
    m.add_function(wrap_pyfunction!(builtin_scenarios, m)?)?;
    m.add_function(wrap_pyfunction!(builtin_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
