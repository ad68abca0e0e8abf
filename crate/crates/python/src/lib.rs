//! Python bindings. Sequences and matrices cross the boundary as lists of
//! rows (`list[list[float]]`); numpy users can pass `arr.tolist()`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use biesn::dataset::{self, Dataset, Split, SyntheticSpec};
use biesn::model_io;
use biesn::pipeline::{self, Direction, PipelineConfig, TrainOptions, TrainedModel};
use biesn::readout::ReadoutModel;
use biesn::{AggregationMode, ErrorKind, ReservoirConfig, ReservoirWeights};
use ndarray::Array2;
use pyo3::exceptions::{PyArithmeticError, PyFileNotFoundError, PyOSError, PyValueError};
use pyo3::prelude::*;

type Rows<T> = Vec<Vec<T>>;

fn to_py(e: biesn::Error) -> PyErr {
    let msg = e.to_string();
    match (&e, e.kind()) {
        (biesn::Error::MissingFile(_), _) => PyFileNotFoundError::new_err(msg),
        (_, ErrorKind::Io) => PyOSError::new_err(msg),
        (_, ErrorKind::Numerical) => PyArithmeticError::new_err(msg),
        (_, ErrorKind::Validation) => PyValueError::new_err(msg),
    }
}

/// Rows to a dense matrix; ragged input is rejected.
pub fn matrix<T: Copy>(rows: Vec<Vec<T>>, what: &str) -> Result<Array2<T>, String> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if let Some((i, row)) = rows.iter().enumerate().find(|(_, row)| row.len() != c) {
        return Err(format!("{what}: row {i} has {} values, expected {c}", row.len()));
    }
    Array2::from_shape_vec((r, c), rows.into_iter().flatten().collect()).map_err(|e| e.to_string())
}

fn matrix_py<T: Copy>(rows: Vec<Vec<T>>, what: &str) -> PyResult<Array2<T>> {
    matrix(rows, what).map_err(PyValueError::new_err)
}

pub fn rows<T: Copy>(a: &Array2<T>) -> Vec<Vec<T>> {
    a.outer_iter().map(|r| r.to_vec()).collect()
}

fn parse<T: std::str::FromStr>(value: &str) -> PyResult<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| PyValueError::new_err(e.to_string()))
}

#[pyclass(name = "ReservoirConfig", get_all, set_all, from_py_object)]
#[derive(Clone)]
struct PyReservoirConfig {
    n_units: usize,
    spectral_radius: f64,
    input_scaling: f64,
    leak_rate: f64,
    density: f64,
    bias_scale: f64,
    noise_level: f64,
    washout: usize,
    seed: u64,
}

impl PyReservoirConfig {
    fn core(&self) -> ReservoirConfig {
        ReservoirConfig {
            n_units: self.n_units,
            spectral_radius: self.spectral_radius,
            input_scaling: self.input_scaling,
            leak_rate: self.leak_rate,
            density: self.density,
            bias_scale: self.bias_scale,
            noise_level: self.noise_level,
            washout: self.washout,
            seed: self.seed,
        }
    }
}

#[pymethods]
impl PyReservoirConfig {
    #[new]
    #[pyo3(signature = (n_units=100, spectral_radius=0.9, input_scaling=0.5, leak_rate=0.3, density=0.1, bias_scale=0.0, noise_level=0.0, washout=0, seed=42))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        n_units: usize,
        spectral_radius: f64,
        input_scaling: f64,
        leak_rate: f64,
        density: f64,
        bias_scale: f64,
        noise_level: f64,
        washout: usize,
        seed: u64,
    ) -> Self {
        Self {
            n_units,
            spectral_radius,
            input_scaling,
            leak_rate,
            density,
            bias_scale,
            noise_level,
            washout,
            seed,
        }
    }

    fn validate(&self) -> PyResult<()> {
        self.core().validate().map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.core())
    }
}

/// A fixed random reservoir for one input width.
#[pyclass(name = "Reservoir")]
struct PyReservoir {
    config: ReservoirConfig,
    weights: ReservoirWeights,
}

#[pymethods]
impl PyReservoir {
    #[new]
    fn new(config: &PyReservoirConfig, input_dim: usize) -> PyResult<Self> {
        let config = config.core();
        let weights = ReservoirWeights::init(&config, input_dim).map_err(to_py)?;
        Ok(Self { config, weights })
    }

    #[getter]
    fn n_units(&self) -> usize {
        self.weights.n_units()
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.weights.input_dim()
    }

    /// Spectral radius of the rescaled recurrent matrix.
    #[getter]
    fn spectral_radius(&self) -> f64 {
        self.weights.achieved_spectral_radius()
    }

    /// States after each frame, one row per frame.
    fn run_forward(&self, sequence: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let seq = matrix_py(sequence, "sequence")?;
        let s = biesn::run_forward(&self.weights, seq.view(), &self.config, None).map_err(to_py)?;
        Ok(rows(&s.states))
    }

    /// `(forward, backward)`, both aligned so row t belongs to frame t.
    fn run_bidirectional(&self, sequence: Vec<Vec<f64>>) -> PyResult<(Rows<f64>, Rows<f64>)> {
        let seq = matrix_py(sequence, "sequence")?;
        let bi = biesn::run_bidirectional(&self.weights, None, seq.view(), &self.config, None).map_err(to_py)?;
        Ok((rows(&bi.forward.states), rows(&bi.backward.states)))
    }

    #[pyo3(signature = (sequence, aggregation="final"))]
    fn features(&self, sequence: Vec<Vec<f64>>, aggregation: &str) -> PyResult<Vec<f64>> {
        let mode: AggregationMode = parse(aggregation)?;
        let seq = matrix_py(sequence, "sequence")?;
        let bi = biesn::run_bidirectional(&self.weights, None, seq.view(), &self.config, None).map_err(to_py)?;
        Ok(biesn::aggregate(&bi, mode, self.config.washout).to_vec())
    }
}

#[pyfunction]
fn spectral_radius(matrix: Vec<Vec<f64>>) -> PyResult<f64> {
    let m = matrix_py(matrix, "matrix")?;
    biesn::estimate_spectral_radius(m.view()).map_err(to_py)
}

#[pyclass(name = "Readout")]
struct PyReadout(ReadoutModel);

#[pymethods]
impl PyReadout {
    #[getter]
    fn classes(&self) -> Vec<String> {
        self.0.classes.clone()
    }

    #[getter]
    fn n_features(&self) -> usize {
        self.0.n_features()
    }

    /// `n_classes x (n_features + 1)`, intercept in the last column.
    #[getter]
    fn weights(&self) -> Vec<Vec<f64>> {
        rows(&self.0.w_out)
    }

    fn scores(&self, features: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let x = matrix_py(features, "features")?;
        Ok(rows(&self.0.scores(x.view()).map_err(to_py)?))
    }

    fn predict(&self, features: Vec<Vec<f64>>) -> PyResult<Vec<String>> {
        let x = matrix_py(features, "features")?;
        let idx = self.0.predict(x.view()).map_err(to_py)?;
        Ok(idx.into_iter().map(|i| self.0.classes[i].clone()).collect())
    }
}

#[pyfunction]
#[pyo3(signature = (features, labels, lambda_=1e-3))]
fn fit_ridge(features: Vec<Vec<f64>>, labels: Vec<String>, lambda_: f64) -> PyResult<PyReadout> {
    let x = matrix_py(features, "features")?;
    biesn::fit_ridge(x.view(), &labels, lambda_).map(PyReadout).map_err(to_py)
}

/// Frames of a KPS1 file; missing values come back as NaN.
#[pyfunction]
fn read_kps(path: PathBuf) -> PyResult<Vec<Vec<f32>>> {
    Ok(rows(&dataset::read_sample(&path).map_err(to_py)?))
}

#[pyfunction]
fn write_kps(path: PathBuf, frames: Vec<Vec<f32>>) -> PyResult<()> {
    let f = matrix_py(frames, "frames")?;
    dataset::write_sample(&path, f.view()).map_err(to_py)
}

#[pyclass(name = "Dataset")]
struct PyDataset(Dataset);

fn split_of(name: &str) -> PyResult<Split> {
    name.parse()
        .map_err(|_| PyValueError::new_err(format!("unknown split `{name}` (train, val, test)")))
}

#[pymethods]
impl PyDataset {
    #[getter]
    fn classes(&self) -> Vec<String> {
        self.0.classes.clone()
    }

    #[getter]
    fn feature_dim(&self) -> usize {
        self.0.feature_dim
    }

    #[getter]
    fn skipped(&self) -> Vec<String> {
        self.0.skipped.clone()
    }

    fn split_sizes(&self) -> BTreeMap<String, usize> {
        Split::ALL
            .iter()
            .map(|s| (s.as_str().to_owned(), self.0.split(*s).len()))
            .collect()
    }

    /// `(frames, label, sample_id)` for each sample of a split.
    fn samples(&self, split: &str) -> PyResult<Vec<(Rows<f32>, String, String)>> {
        Ok(self
            .0
            .split(split_of(split)?)
            .iter()
            .map(|s| (rows(&s.frames), s.label.clone(), s.sample_id.clone()))
            .collect())
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyfunction]
fn load_dataset(manifest: PathBuf) -> PyResult<PyDataset> {
    dataset::load_dataset(&manifest).map(PyDataset).map_err(to_py)
}

/// Writes a synthetic dataset under `out_dir` and returns the manifest path.
#[pyfunction]
#[pyo3(signature = (out_dir, n_classes=9, prefix_motifs=3, samples_per_class=60, min_len=40, max_len=60, feature_dim=8, motif_length=10, noise_std=0.05, filler_std=0.3, seed=7))]
#[allow(clippy::too_many_arguments)]
fn generate_synthetic(
    out_dir: PathBuf,
    n_classes: usize,
    prefix_motifs: usize,
    samples_per_class: usize,
    min_len: usize,
    max_len: usize,
    feature_dim: usize,
    motif_length: usize,
    noise_std: f64,
    filler_std: f64,
    seed: u64,
) -> PyResult<PathBuf> {
    let spec = SyntheticSpec {
        n_classes,
        prefix_motifs,
        samples_per_class,
        min_len,
        max_len,
        feature_dim,
        motif_length,
        noise_std,
        filler_std,
        seed,
    };
    let ds = dataset::generate_synthetic(&spec).map_err(to_py)?;
    dataset::write_dataset(&ds, &out_dir).map_err(to_py)
}

#[pyclass(name = "EvalReport", get_all)]
struct PyEvalReport {
    accuracy: f64,
    per_class_accuracy: BTreeMap<String, f64>,
    confusion: Vec<Vec<u64>>,
    n_samples: usize,
    seed: u64,
}

#[pymethods]
impl PyEvalReport {
    fn __repr__(&self) -> String {
        format!("EvalReport(accuracy={:.4}, n_samples={})", self.accuracy, self.n_samples)
    }
}

#[pyclass(name = "Model")]
struct PyModel(TrainedModel);

#[pymethods]
impl PyModel {
    #[getter]
    fn classes(&self) -> Vec<String> {
        self.0.readout.classes.clone()
    }

    #[getter]
    fn feature_width(&self) -> usize {
        self.0.pipeline.feature_width()
    }

    #[getter]
    fn lambda_(&self) -> f64 {
        self.0.readout.lambda
    }

    #[pyo3(signature = (dataset, split="test"))]
    fn evaluate(&self, py: Python<'_>, dataset: &PyDataset, split: &str) -> PyResult<PyEvalReport> {
        let samples = dataset.0.split(split_of(split)?);
        let r = py.detach(|| self.0.evaluate(samples)).map_err(to_py)?;
        Ok(PyEvalReport {
            accuracy: r.accuracy,
            per_class_accuracy: r.per_class_accuracy,
            confusion: r.confusion,
            n_samples: r.n_samples,
            seed: r.seed,
        })
    }

    #[pyo3(signature = (dataset, split="test"))]
    fn predict(&self, py: Python<'_>, dataset: &PyDataset, split: &str) -> PyResult<Vec<String>> {
        let samples = dataset.0.split(split_of(split)?);
        py.detach(|| self.0.predict(samples)).map_err(to_py)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        model_io::save_model(&self.0, &path).map_err(to_py)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        model_io::load_model(&path).map(PyModel).map_err(to_py)
    }
}

/// Fits the readout on the train split. `units` is the total width.
#[pyfunction]
#[pyo3(signature = (dataset, units=200, direction="bi", aggregation="final", leak_rate=0.3, spectral_radius=0.9, input_scaling=0.5, density=0.1, bias_scale=0.0, noise_level=0.0, washout=0, seed=42, lambda_=1e-3, lambda_grid=None, shared_weights=true, wrist_center=false))]
#[allow(clippy::too_many_arguments)]
fn train(
    py: Python<'_>,
    dataset: &PyDataset,
    units: usize,
    direction: &str,
    aggregation: &str,
    leak_rate: f64,
    spectral_radius: f64,
    input_scaling: f64,
    density: f64,
    bias_scale: f64,
    noise_level: f64,
    washout: usize,
    seed: u64,
    lambda_: f64,
    lambda_grid: Option<Vec<f64>>,
    shared_weights: bool,
    wrist_center: bool,
) -> PyResult<PyModel> {
    let cfg = PipelineConfig {
        reservoir: ReservoirConfig {
            n_units: units,
            spectral_radius,
            input_scaling,
            leak_rate,
            density,
            bias_scale,
            noise_level,
            washout,
            seed,
        },
        direction: parse::<Direction>(direction)?,
        aggregation: parse::<AggregationMode>(aggregation)?,
        shared_weights,
        wrist_center,
    };
    let opts = TrainOptions {
        lambda: lambda_,
        lambda_grid,
    };
    let out = py
        .detach(|| pipeline::train(&dataset.0, &cfg, &opts))
        .map_err(to_py)?;
    Ok(PyModel(out.model))
}

#[pymodule]
#[pyo3(name = "biesn")]
fn biesn_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyReservoirConfig>()?;
    m.add_class::<PyReservoir>()?;
    m.add_class::<PyReadout>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyEvalReport>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(spectral_radius, m)?)?;
    m.add_function(wrap_pyfunction!(fit_ridge, m)?)?;
    m.add_function(wrap_pyfunction!(read_kps, m)?)?;
    m.add_function(wrap_pyfunction!(write_kps, m)?)?;
    m.add_function(wrap_pyfunction!(load_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    Ok(())
}
