//! Python bindings. Structured results cross the boundary as JSON and come
//! out as plain dicts and lists.

use std::sync::Arc;

use driftcheck_core::claims::{self, Claim, Label};
use driftcheck_core::diffusion::{self, EngineConfig};
use driftcheck_core::embedder;
use driftcheck_core::eval::{self, ThresholdRule, Variant};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyList;
use serde::Serialize;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(runtime_err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn from_py<T: serde::de::DeserializeOwned>(py: Python<'_>, obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = py.import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(value_err)
}

fn threshold(value: Option<f64>) -> ThresholdRule {
    value.map_or(ThresholdRule::OracleBest, ThresholdRule::Fixed)
}

/// Feature-hashed unit embedding of `text`.
#[pyfunction]
#[pyo3(signature = (text, dim = embedder::DEFAULT_DIM))]
fn embed(text: &str, dim: usize) -> PyResult<Vec<f64>> {
    Ok(embedder::embed(text, dim).map_err(value_err)?.values().to_vec())
}

#[pyfunction]
fn cosine(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    if a.len() != b.len() {
        return Err(value_err(format!("dimension mismatch: {} vs {}", a.len(), b.len())));
    }
    Ok(embedder::cosine(&a, &b))
}

/// An ordered set of claims.
#[pyclass(name = "ClaimSet", module = "driftcheck", frozen)]
struct PyClaimSet {
    inner: claims::ClaimSet,
}

#[pymethods]
impl PyClaimSet {
    /// Build from `[{"id", "text", "label"?}]`; label is SUPPORTS or REFUTES.
    #[new]
    fn new(py: Python<'_>, claims: &Bound<'_, PyAny>) -> PyResult<Self> {
        let claims: Vec<Claim> = from_py(py, claims)?;
        let inner = claims::ClaimSet::new(claims, claims::ClaimSource::Synthetic).map_err(value_err)?;
        Ok(Self { inner })
    }

    /// Load a FEVER-style JSONL file, optionally keeping `max_per_label` per class.
    #[staticmethod]
    #[pyo3(signature = (path, max_per_label = None, seed = 0))]
    fn load(path: &str, max_per_label: Option<usize>, seed: u64) -> PyResult<Self> {
        let inner = claims::load_fever_jsonl(path, max_per_label, seed).map_err(value_err)?;
        Ok(Self { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        let c = self.inner.counts();
        format!("ClaimSet({} claims: {} supported, {} refuted)", self.inner.len(), c.supported, c.refuted)
    }

    fn texts(&self) -> Vec<String> {
        self.inner.iter().map(|c| c.text.clone()).collect()
    }

    fn ids(&self) -> Vec<String> {
        self.inner.iter().map(|c| c.id.clone()).collect()
    }

    /// `True` for supported, `False` for refuted, `None` when unlabeled.
    fn labels(&self) -> Vec<Option<bool>> {
        self.inner.iter().map(|c| c.label.map(Label::is_supported)).collect()
    }

    fn to_list(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.claims())
    }

    fn to_jsonl(&self) -> String {
        self.inner.to_jsonl_string()
    }
}

/// Synthetic world: a truth corpus and a balanced labeled test set.
#[pyfunction]
#[pyo3(signature = (n_entities = 50, n_relations = 5, n_objects = 4, corpus_fraction = 0.8, seed = 42, template = claims::DEFAULT_TEMPLATE))]
fn generate_world(
    n_entities: usize,
    n_relations: usize,
    n_objects: usize,
    corpus_fraction: f64,
    seed: u64,
    template: &str,
) -> PyResult<(PyClaimSet, PyClaimSet)> {
    let config = claims::WorldConfig {
        n_entities,
        n_relations,
        n_objects_per_relation: n_objects,
        template: template.to_string(),
        corpus_fraction,
        seed,
    };
    let w = claims::generate_world(&config).map_err(value_err)?;
    Ok((PyClaimSet { inner: w.truth_corpus }, PyClaimSet { inner: w.test_set }))
}

/// Diffusion stress-test engine over a truth corpus.
///
/// `config` is a dict in the shape of `Engine.config`; missing keys keep
/// their defaults.
#[pyclass(name = "Engine", module = "driftcheck", frozen)]
struct PyEngine {
    inner: Arc<diffusion::StressEngine>,
}

#[pymethods]
impl PyEngine {
    #[new]
    #[pyo3(signature = (corpus, config = None, workers = None))]
    fn new(py: Python<'_>, corpus: &PyClaimSet, config: Option<&Bound<'_, PyAny>>, workers: Option<usize>) -> PyResult<Self> {
        let config: EngineConfig = match config {
            Some(c) => from_py(py, c)?,
            None => EngineConfig::default(),
        };
        config.validate().map_err(value_err)?;
        let corpus = corpus.inner.clone();
        let mut engine = py.detach(|| diffusion::StressEngine::new(corpus, config)).map_err(runtime_err)?;
        if let Some(n) = workers {
            engine = engine.with_workers(n.max(1));
        }
        Ok(Self { inner: Arc::new(engine) })
    }

    #[getter]
    fn config(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, self.inner.config())
    }

    /// Same engine with a different stress seed.
    fn with_seed(&self, seed: u64) -> Self {
        Self {
            inner: Arc::new(self.inner.with_seed(seed)),
        }
    }

    /// Stress-test one claim; returns a result dict.
    #[pyo3(signature = (text, id = "claim", label = None))]
    fn stress_test(&self, py: Python<'_>, text: &str, id: &str, label: Option<bool>) -> PyResult<Py<PyAny>> {
        let label = label.map(|l| if l { Label::Supported } else { Label::Refuted });
        let claim = Claim::new(id, text, label).map_err(value_err)?;
        let engine = self.inner.clone();
        let r = py.detach(move || engine.stress_test(&claim)).map_err(runtime_err)?;
        to_py(py, &r)
    }

    fn run_batch(&self, py: Python<'_>, claims: &PyClaimSet) -> PyResult<Py<PyAny>> {
        let engine = self.inner.clone();
        let set = claims.inner.clone();
        let results = py.detach(move || engine.run_batch(set.claims())).map_err(runtime_err)?;
        to_py(py, &results)
    }

    /// Compare every method over `seeds`; `threshold=None` uses the best cut.
    #[pyo3(signature = (dataset, seeds = vec![0], threshold = None))]
    fn evaluate(&self, py: Python<'_>, dataset: &PyClaimSet, seeds: Vec<u64>, threshold: Option<f64>) -> PyResult<Py<PyAny>> {
        let engine = self.inner.clone();
        let set = dataset.inner.clone();
        let rule = self::threshold(threshold);
        let report = py.detach(move || eval::evaluate(&engine, &set, &seeds, rule)).map_err(runtime_err)?;
        to_py(py, &report)
    }

    fn sweep_timestep(&self, py: Python<'_>, dataset: &PyClaimSet, values: Vec<usize>) -> PyResult<Py<PyAny>> {
        let engine = self.inner.clone();
        let set = dataset.inner.clone();
        let rows = py.detach(move || eval::sweep_timestep(&engine, &values, &set)).map_err(runtime_err)?;
        to_py(py, &rows)
    }

    /// Variant names: hybrid, mse_only, disc_only, fixed_t_star_N.
    #[pyo3(signature = (dataset, variants = None, threshold = None))]
    fn ablate(
        &self,
        py: Python<'_>,
        dataset: &PyClaimSet,
        variants: Option<Vec<String>>,
        threshold: Option<f64>,
    ) -> PyResult<Py<PyAny>> {
        let variants: Vec<Variant> = match variants {
            Some(v) => v.iter().map(|s| s.parse().map_err(value_err)).collect::<PyResult<_>>()?,
            None => Variant::defaults(),
        };
        let engine = self.inner.clone();
        let set = dataset.inner.clone();
        let rule = self::threshold(threshold);
        let report = py
            .detach(move || eval::run_ablation(&engine, &set, &variants, rule))
            .map_err(runtime_err)?;
        to_py(py, &report)
    }
}

/// Hybrid AUROC per lambda, recomputed from `run_batch` results.
#[pyfunction]
fn sweep_lambda(py: Python<'_>, results: &Bound<'_, PyList>, values: Vec<f64>) -> PyResult<Py<PyAny>> {
    let results: Vec<diffusion::StressTestResult> = from_py(py, results.as_any())?;
    to_py(py, &eval::sweep_lambda(&values, &results).map_err(value_err)?)
}

/// Labels are `True` for supported claims; scores are truth scores.
#[pyfunction]
fn auroc(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<f64> {
    let set = eval::ScoredSet::new("python", scores, labels).map_err(value_err)?;
    eval::auroc(&set).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (scores, labels, threshold = None))]
fn accuracy(scores: Vec<f64>, labels: Vec<bool>, threshold: Option<f64>) -> PyResult<f64> {
    let set = eval::ScoredSet::new("python", scores, labels).map_err(value_err)?;
    eval::accuracy(&set, self::threshold(threshold)).map_err(value_err)
}

/// Two-sided paired t-test; returns `(t, p)`.
#[pyfunction]
fn paired_t_test(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, f64)> {
    let t = eval::paired_t_test(&a, &b).map_err(value_err)?;
    Ok((t.t, t.p))
}

#[pymodule]
fn driftcheck(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyClaimSet>()?;
    m.add_class::<PyEngine>()?;
    m.add_function(wrap_pyfunction!(embed, m)?)?;
    m.add_function(wrap_pyfunction!(cosine, m)?)?;
    m.add_function(wrap_pyfunction!(generate_world, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_lambda, m)?)?;
    m.add_function(wrap_pyfunction!(auroc, m)?)?;
    m.add_function(wrap_pyfunction!(accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(paired_t_test, m)?)?;
    Ok(())
}
