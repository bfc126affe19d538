//! Python bindings: `import tunneldeduce`.

use std::collections::{BTreeMap, HashMap};

use chrono::NaiveDate;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use tunnel_deduce::pipeline::{self, sections, SynthOptions};
use tunnel_deduce::{
    evaluation, CellIndex, Error, ObservationMatrix, ShiftPolicy, TrainConfig, TunnelGrid,
};

fn py_err(e: Error) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn parse_date(s: &str) -> PyResult<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map_err(|e| PyValueError::new_err(format!("bad date `{s}`: {e}")))
}

fn cells(pairs: Vec<(usize, usize)>) -> Vec<CellIndex> {
    pairs
        .into_iter()
        .map(|(m, n)| CellIndex::new(m, n))
        .collect()
}

/// Clockwise angle of part `n` (1-based) from the crown, radians.
#[pyfunction]
fn cell_angle(parts: usize, n: usize) -> PyResult<f64> {
    TunnelGrid::new(1, parts, 1.0)
        .and_then(|g| g.cell_angle(n))
        .map_err(py_err)
}

/// Part mirrored about the vertical axis.
#[pyfunction]
fn mirror(parts: usize, n: usize) -> PyResult<usize> {
    TunnelGrid::new(1, parts, 1.0)
        .and_then(|g| g.mirror(n))
        .map_err(py_err)
}

/// Validated section configuration.
#[pyclass(name = "SectionConfig", module = "tunneldeduce", skip_from_py_object)]
#[derive(Clone)]
struct PySectionConfig {
    inner: pipeline::SectionConfig,
}

#[pymethods]
impl PySectionConfig {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        pipeline::load_config(path)
            .map(|inner| Self { inner })
            .map_err(py_err)
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        pipeline::SectionConfig::from_toml_str(text)
            .map(|inner| Self { inner })
            .map_err(py_err)
    }

    /// One of the bundled S2, S4 or S9 layouts.
    #[staticmethod]
    fn builtin(section: &str) -> PyResult<Self> {
        sections::builtin_config(section)
            .map(|inner| Self { inner })
            .map_err(py_err)
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml_string().map_err(py_err)
    }

    #[getter]
    fn section_id(&self) -> String {
        self.inner.section_id.clone()
    }

    #[getter]
    fn layers(&self) -> usize {
        self.inner.grid.layers()
    }

    #[getter]
    fn parts(&self) -> usize {
        self.inner.grid.parts()
    }

    /// `(sensor_id, layer, part)` triples.
    #[getter]
    fn sensors(&self) -> Vec<(String, usize, usize)> {
        self.inner
            .layout
            .entries
            .iter()
            .map(|e| (e.sensor_id.clone(), e.cell.layer, e.cell.part))
            .collect()
    }

    /// Radial and tangential resultants per part and the adjacency weights.
    fn load_field(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let f = pipeline::load_field(&self.inner).map_err(py_err)?;
        let mut out = HashMap::new();
        out.insert("radial", f.radial);
        out.insert("tangential", f.tangential);
        out.insert("q_weights", f.q_weights);
        Ok(out.into_pyobject(py)?.into_any().unbind())
    }

    fn __repr__(&self) -> String {
        format!(
            "SectionConfig(section_id={:?}, grid={}x{}, sensors={})",
            self.inner.section_id,
            self.inner.grid.layers(),
            self.inner.grid.parts(),
            self.inner.layout.len()
        )
    }
}

/// Deduced full-section field for one day.
#[pyclass(name = "DeductionResult", module = "tunneldeduce", skip_from_py_object)]
struct PyDeductionResult {
    inner: pipeline::DeductionResult,
}

#[pymethods]
impl PyDeductionResult {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        pipeline::DeductionResult::from_json(text)
            .map(|inner| Self { inner })
            .map_err(py_err)
    }

    #[getter]
    fn dense(&self) -> Vec<Vec<f64>> {
        self.inner.dense.clone()
    }

    #[getter]
    fn date(&self) -> String {
        self.inner.date.to_string()
    }

    #[getter]
    fn max_cell(&self) -> (usize, usize) {
        (self.inner.max_cell.layer, self.inner.max_cell.part)
    }

    #[getter]
    fn max_value(&self) -> f64 {
        self.inner.max_value
    }

    #[getter]
    fn loss(&self) -> f64 {
        self.inner.loss.total
    }

    /// `(layer, part) -> reading` of the cells used for training.
    #[getter]
    fn observed(&self) -> BTreeMap<(usize, usize), f64> {
        self.inner
            .observed
            .iter()
            .map(|o| ((o.cell.layer, o.cell.part), o.value))
            .collect()
    }

    fn value(&self, layer: usize, part: usize) -> PyResult<f64> {
        let cell = CellIndex::new(layer, part);
        if layer == 0 || part == 0 || layer > self.inner.layers() || part > self.inner.parts() {
            return Err(PyValueError::new_err(format!(
                "cell {cell} outside the grid"
            )));
        }
        Ok(self.inner.value(cell))
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn to_svg(&self) -> String {
        pipeline::render_svg(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "DeductionResult(section_id={:?}, date={}, max={:.3} at {})",
            self.inner.section_id, self.inner.date, self.inner.max_value, self.inner.max_cell
        )
    }
}

/// Deduces the whole section from one day of readings (`sensor_id -> kN`).
#[pyfunction]
fn deduce(
    config: &PySectionConfig,
    date: &str,
    readings: BTreeMap<String, f64>,
) -> PyResult<PyDeductionResult> {
    pipeline::deduce_current(&config.inner, parse_date(date)?, &readings)
        .map(|inner| PyDeductionResult { inner })
        .map_err(py_err)
}

/// Synthetic readings for the config's layout: `{date: {sensor_id: value}}`.
#[pyfunction]
#[pyo3(signature = (config, days=60, noise=0.0, dropout=0.0, seed=0))]
fn synthesize(
    config: &PySectionConfig,
    days: usize,
    noise: f64,
    dropout: f64,
    seed: u64,
) -> PyResult<BTreeMap<String, BTreeMap<String, f64>>> {
    let opts = SynthOptions {
        days,
        noise,
        dropout,
        seed,
        ..SynthOptions::default()
    };
    let (_, readings) =
        pipeline::synthesize(&config.inner.grid, &config.inner.layout, &opts).map_err(py_err)?;
    Ok(readings
        .days
        .into_iter()
        .map(|(d, day)| (d.to_string(), day))
        .collect())
}

/// Trains non-negative factors on `observed` (`(layer, part) -> value`) and
/// returns `(dense, report)` where `dense` is the reconstructed field.
#[pyfunction]
#[pyo3(signature = (
    layers, parts, observed, q,
    rank=2, lambda1=0.1, lambda2=0.1, learning_rate=0.01,
    max_epochs=5000, patience=50, seed=0, shift=true,
))]
#[allow(clippy::too_many_arguments)]
fn factorize(
    py: Python<'_>,
    layers: usize,
    parts: usize,
    observed: BTreeMap<(usize, usize), f64>,
    q: Vec<f64>,
    rank: usize,
    lambda1: f64,
    lambda2: f64,
    learning_rate: f64,
    max_epochs: usize,
    patience: usize,
    seed: u64,
    shift: bool,
) -> PyResult<(Vec<Vec<f64>>, Py<PyAny>)> {
    let grid = TunnelGrid::new(layers, parts, 1.0).map_err(py_err)?;
    let x = ObservationMatrix::from_cells(
        grid,
        observed
            .into_iter()
            .map(|((m, n), v)| (CellIndex::new(m, n), v)),
    )
    .map_err(py_err)?;
    let cfg = TrainConfig {
        rank,
        lambda1,
        lambda2,
        learning_rate,
        max_epochs,
        patience,
        seed,
        shift: if shift {
            ShiftPolicy::Auto
        } else {
            ShiftPolicy::Off
        },
        ..TrainConfig::default()
    };
    let (f, report) = py
        .detach(|| tunnel_deduce::factorize(&x, &q, &cfg))
        .map_err(py_err)?;
    let dense = tunnel_deduce::reconstruct(&f, report.offset)
        .rows()
        .into_iter()
        .map(|r| r.to_vec())
        .collect();
    let mut info: HashMap<&str, f64> = HashMap::new();
    info.insert("epochs_run", report.epochs_run as f64);
    info.insert("best_epoch", report.best_epoch as f64);
    info.insert("offset", report.offset);
    info.insert("loss", report.loss.total);
    if let Some(v) = report.best_val_rmse {
        info.insert("best_val_rmse", v);
    }
    Ok((dense, info.into_pyobject(py)?.into_any().unbind()))
}

/// RMSE, MAE and Pearson correlation (`None` for a constant series).
#[pyfunction]
fn metrics(py: Python<'_>, truth: Vec<f64>, pred: Vec<f64>) -> PyResult<Py<PyAny>> {
    let m = evaluation::metrics(&truth, &pred).map_err(py_err)?;
    let out: HashMap<&str, Option<f64>> = HashMap::from([
        ("rmse", Some(m.rmse)),
        ("mae", Some(m.mae)),
        ("pcc", m.pcc),
        ("n", Some(m.n as f64)),
    ]);
    Ok(out.into_pyobject(py)?.into_any().unbind())
}

/// Splits `(layer, part)` cells into `k` seeded folds.
#[pyfunction]
fn kfold_split(
    cells_: Vec<(usize, usize)>,
    k: usize,
    seed: u64,
) -> PyResult<Vec<Vec<(usize, usize)>>> {
    let folds = evaluation::kfold_split(&cells(cells_), k, seed).map_err(py_err)?;
    Ok(folds
        .into_iter()
        .map(|f| f.into_iter().map(|c| (c.layer, c.part)).collect())
        .collect())
}

#[pymodule]
fn tunneldeduce(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySectionConfig>()?;
    m.add_class::<PyDeductionResult>()?;
    m.add_function(wrap_pyfunction!(cell_angle, m)?)?;
    m.add_function(wrap_pyfunction!(mirror, m)?)?;
    m.add_function(wrap_pyfunction!(deduce, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    m.add_function(wrap_pyfunction!(factorize, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_function(wrap_pyfunction!(kfold_split, m)?)?;
    Ok(())
}
