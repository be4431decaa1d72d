//! Python bindings: `neuro01.fit`, `neuro01.Model`, `neuro01.oracle_min_sse`,
//! `neuro01.verify`.

use ndarray::Array2;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use neuro01_core::bagging::fit_bagged;
use neuro01_core::boosting::{train_round_robin, TrainConfig};
use neuro01_core::data::fingerprint;
use neuro01_core::model_file::{Model as CoreModel, ModelFile};
use neuro01_core::network::Architecture;
use neuro01_core::oracle::oracle_min_sse as core_oracle;
use neuro01_core::rng::RandomStream;
use neuro01_core::tuning::ArchitectureId;
use neuro01_core::verify::{run_suite, Suite};
use neuro01_core::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Array2<f64>> {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != p) {
        return Err(PyValueError::new_err("rows have differing lengths"));
    }
    Array2::from_shape_vec((n, p), rows.into_iter().flatten().collect())
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

/// A trained boosted or bagged model.
#[pyclass(module = "neuro01")]
struct Model {
    inner: CoreModel,
    feature_names: Vec<String>,
    target_name: String,
    fingerprint: String,
}

#[pymethods]
impl Model {
    /// Predictions for a list of rows.
    fn predict(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        self.inner.predict_batch(matrix(x)?.view()).map_err(py_err)
    }

    #[getter]
    fn kind(&self) -> &'static str {
        match self.inner {
            CoreModel::Boosted(_) => "boosted",
            CoreModel::Bagged(_) => "bagged",
        }
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.feature_names.clone()
    }

    fn save(&self, path: &str) -> PyResult<()> {
        ModelFile::new(
            &self.inner,
            self.feature_names.clone(),
            self.target_name.clone(),
            self.fingerprint.clone(),
        )
        .and_then(|f| f.save(path))
        .map_err(py_err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let file = ModelFile::load(path).map_err(py_err)?;
        Ok(Self {
            inner: file.to_model().map_err(py_err)?,
            feature_names: file.feature_names,
            target_name: file.target_name,
            fingerprint: file.meta.fingerprint,
        })
    }

    fn __repr__(&self) -> String {
        format!("Model(kind={:?}, inputs={})", self.kind(), self.feature_names.len())
    }
}

/// Trains a boosted network; `bags > 0` adds bootstrap bagging on top.
#[pyfunction]
#[pyo3(signature = (
    x, y, *, architecture = "D", stages = 10, gamma = 0.5, k = 10, w0 = 2,
    stochastic_ratio = 0.9, stabilizer = 0.01, rounds = 120, bags = 0,
    fine_tune_rounds = 10, seed = 0
))]
#[allow(clippy::too_many_arguments)]
fn fit(
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    architecture: &str,
    stages: usize,
    gamma: f64,
    k: usize,
    w0: usize,
    stochastic_ratio: f64,
    stabilizer: f64,
    rounds: usize,
    bags: usize,
    fine_tune_rounds: usize,
    seed: u64,
) -> PyResult<Model> {
    let x = matrix(x)?;
    let arch: ArchitectureId = architecture.parse().map_err(py_err)?;
    let cfg = TrainConfig {
        widths: arch.widths().to_vec(),
        w0,
        n_stages: stages,
        gamma,
        k,
        stochastic_ratio,
        stabilizer,
        seed,
    };
    let mut rng = RandomStream::new(seed);
    let base = train_round_robin(x.view(), &y, &cfg, rounds, None, &mut rng).map_err(py_err)?;
    let inner = if bags == 0 {
        CoreModel::Boosted(base)
    } else {
        let bag_seed = rng.next_seed();
        CoreModel::Bagged(
            fit_bagged(&base, x.view(), &y, &cfg, bags, fine_tune_rounds, bag_seed).map_err(py_err)?,
        )
    };
    Ok(Model {
        inner,
        feature_names: (1..=x.ncols()).map(|j| format!("x{j}")).collect(),
        target_name: "y".into(),
        fingerprint: fingerprint(x.view(), &y),
    })
}

/// Exact minimum SSE over all labelings the architecture reaches on `x`.
/// Returns `(min_sse, witness)`.
#[pyfunction]
#[pyo3(signature = (x, y, widths, w0 = 2))]
fn oracle_min_sse(
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    widths: Vec<usize>,
    w0: usize,
) -> PyResult<(f64, Vec<bool>)> {
    let x = matrix(x)?;
    let arch = Architecture::new(widths, x.ncols(), w0).map_err(py_err)?;
    let res = core_oracle(x.view(), &y, &arch).map_err(py_err)?;
    Ok((res.min_sse, res.witness))
}

/// Runs a self-check suite; returns `(name, passed, detail)` tuples.
#[pyfunction]
#[pyo3(signature = (suite, seed = 0))]
fn verify(suite: &str, seed: u64) -> PyResult<Vec<(String, bool, String)>> {
    let suite: Suite = suite.parse().map_err(py_err)?;
    let report = run_suite(suite, seed).map_err(py_err)?;
    Ok(report.checks.into_iter().map(|c| (c.name, c.passed, c.detail)).collect())
}

#[pymodule]
fn neuro01(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_min_sse, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
