//! Python module `iin`.
//!
//! Matrices cross the boundary as lists of rows (`[timestamps][sensors]`),
//! with `nan` for cells that are not observed. Configs and reports travel as
//! JSON strings.

use iin_core::eval::{self, score, sweep_missing_rates};
use iin_core::imputer::{run_cascade_from, ImputationRun, TrainConfig};
use iin_core::ingest::{load_csv, load_truth, save_csv, save_truth, simulate_missing, CsvSchema, MissingSpec};
use iin_core::init::{initialize, InitializerKind};
use iin_core::nn::Checkpoint;
use iin_core::numfmt::to_json_string;
use iin_core::synth::{generate, SynthSpec};
use iin_core::{classify_blocks, Error, ErrorCategory, SensorDataset, TimeFormat};
use pyo3::exceptions::{PyIndexError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: Error) -> PyErr {
    match e.category() {
        ErrorCategory::Config => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn rows(m: &ndarray::Array2<f64>) -> Vec<Vec<f64>> {
    m.outer_iter().map(|r| r.to_vec()).collect()
}

fn config_from(json: Option<&str>) -> PyResult<TrainConfig> {
    let config: TrainConfig = match json {
        Some(text) => serde_json::from_str(text).map_err(|e| PyValueError::new_err(format!("invalid config: {e}")))?,
        None => TrainConfig::default(),
    };
    config.validate().map_err(py_err)?;
    Ok(config)
}

fn kind_from(init: &str) -> PyResult<InitializerKind> {
    init.parse().map_err(py_err)
}

fn json<T: serde::Serialize>(value: &T) -> PyResult<String> {
    to_json_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// A multi-sensor series with its missingness mask and held-out truth.
#[pyclass(name = "Dataset", frozen)]
struct PyDataset {
    inner: SensorDataset,
}

#[pymethods]
impl PyDataset {
    #[new]
    #[pyo3(signature = (sensor_ids, timestamps, values))]
    fn new(sensor_ids: Vec<String>, timestamps: Vec<f64>, values: Vec<Vec<f64>>) -> PyResult<Self> {
        let cols = sensor_ids.len();
        if values.iter().any(|r| r.len() != cols) {
            return Err(PyValueError::new_err("every row needs one value per sensor"));
        }
        let flat: Vec<f64> = values.into_iter().flatten().collect();
        let matrix = ndarray::Array2::from_shape_vec((timestamps.len(), cols), flat)
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        let inner = SensorDataset::from_matrix(sensor_ids, timestamps, TimeFormat::Real, matrix, "value")
            .map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (path, truth = None))]
    fn from_csv(path: &str, truth: Option<&str>) -> PyResult<Self> {
        let mut inner = load_csv(path, &CsvSchema::default()).map_err(py_err)?;
        if let Some(t) = truth {
            load_truth(&mut inner, t).map_err(py_err)?;
        }
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (sensors = 3, steps = 2000, seed = 1, noise_std = 0.1))]
    fn synthetic(sensors: usize, steps: usize, seed: u64, noise_std: f64) -> PyResult<Self> {
        let spec = SynthSpec {
            sensors,
            steps,
            seed,
            noise_std,
            ..SynthSpec::default()
        };
        Ok(Self {
            inner: generate(&spec).map_err(py_err)?,
        })
    }

    /// Copy with `floor(rate * observed)` observed cells held out.
    fn simulate_missing(&self, rate: f64, seed: u64) -> PyResult<Self> {
        let inner = simulate_missing(&self.inner, &MissingSpec::random_rate(rate, seed)).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[pyo3(signature = (path, truth = None))]
    fn to_csv(&self, path: &str, truth: Option<&str>) -> PyResult<()> {
        save_csv(&self.inner, path, None).map_err(py_err)?;
        if let Some(t) = truth {
            save_truth(&self.inner, t).map_err(py_err)?;
        }
        Ok(())
    }

    #[getter]
    fn sensor_ids(&self) -> Vec<String> {
        self.inner.sensor_ids().to_vec()
    }

    #[getter]
    fn timestamps(&self) -> Vec<f64> {
        self.inner.timestamps().to_vec()
    }

    #[getter]
    fn values(&self) -> Vec<Vec<f64>> {
        rows(self.inner.values())
    }

    #[getter]
    fn held_out(&self) -> usize {
        self.inner.ground_truth().len()
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.inner.num_timestamps(), self.inner.num_sensors())
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset({} timestamps x {} sensors, {} held out)",
            self.inner.num_timestamps(),
            self.inner.num_sensors(),
            self.inner.ground_truth().len()
        )
    }
}

/// Output of [`impute`]: every round's dense series and trained models.
#[pyclass(name = "Imputation", frozen)]
struct PyImputation {
    run: ImputationRun,
}

#[pymethods]
impl PyImputation {
    #[getter]
    fn rounds(&self) -> usize {
        self.run.rounds.len()
    }

    #[getter]
    fn validation_mae(&self) -> Vec<f64> {
        self.run.validation_mae()
    }

    /// Dense series `T_i`; `T_0` is the initializer's output.
    fn series(&self, i: usize) -> PyResult<Vec<Vec<f64>>> {
        self.run
            .series
            .get(i)
            .map(rows)
            .ok_or_else(|| PyIndexError::new_err(format!("no series T_{i}")))
    }

    fn final_series(&self) -> Vec<Vec<f64>> {
        rows(self.run.final_series())
    }

    /// Scores against the held-out truth of `dataset`; returns report JSON.
    #[pyo3(signature = (dataset, block_len = 11))]
    fn report(&self, dataset: &PyDataset, block_len: usize) -> PyResult<String> {
        let r = score(&self.run, &dataset.inner, &classify_blocks(&dataset.inner, block_len)).map_err(py_err)?;
        json(&r)
    }

    #[pyo3(signature = (i = 0))]
    fn checkpoint(&self, i: usize) -> PyResult<String> {
        let model = self
            .run
            .models
            .get(i)
            .ok_or_else(|| PyIndexError::new_err(format!("no model {i}")))?;
        let hyper = serde_json::to_value(&self.run.config).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        Checkpoint::from_model(model, hyper).to_json().map_err(py_err)
    }
}

/// Fills every gap of `dataset` and refines the estimates with the cascade.
#[pyfunction]
#[pyo3(signature = (dataset, init = "nearest", config = None))]
fn impute(py: Python<'_>, dataset: &PyDataset, init: &str, config: Option<&str>) -> PyResult<PyImputation> {
    let config = config_from(config)?;
    let kind = kind_from(init)?;
    let ds = &dataset.inner;
    let run = py
        .detach(|| initialize(ds, &kind).and_then(|t0| run_cascade_from(ds, &config, t0, kind.label())))
        .map_err(py_err)?;
    Ok(PyImputation { run })
}

/// Runs a fresh holdout and cascade per rate; returns a JSON list of reports.
#[pyfunction]
#[pyo3(signature = (dataset, rates, init = "nearest", config = None, block_len = 11))]
fn sweep(
    py: Python<'_>,
    dataset: &PyDataset,
    rates: Vec<f64>,
    init: &str,
    config: Option<&str>,
    block_len: usize,
) -> PyResult<String> {
    let config = config_from(config)?;
    let kind = kind_from(init)?;
    let ds = &dataset.inner;
    let reports = py
        .detach(|| sweep_missing_rates(ds, &rates, &config, &kind, block_len))
        .map_err(py_err)?;
    json(&reports)
}

#[pyfunction]
fn default_config() -> PyResult<String> {
    json(&TrainConfig::default())
}

#[pyfunction]
fn mae(truth: Vec<f64>, estimate: Vec<f64>) -> PyResult<f64> {
    eval::mae(&truth, &estimate).map_err(py_err)
}

#[pyfunction]
fn mre(truth: Vec<f64>, estimate: Vec<f64>) -> PyResult<f64> {
    eval::mre(&truth, &estimate).map_err(py_err)
}

#[pymodule]
fn iin(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyImputation>()?;
    m.add_function(wrap_pyfunction!(impute, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(mae, m)?)?;
    m.add_function(wrap_pyfunction!(mre, m)?)?;
    Ok(())
}
