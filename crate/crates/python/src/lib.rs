//! Python bindings: text processing, lexicon counts, the t-test, fold
//! assignment and the classifiers.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use bpsignal::analysis;
use bpsignal::eval;
use bpsignal::lexicon::{self, Lexicon};
use bpsignal::matrix::{FeatureMatrix, SparseVector};
use bpsignal::ml::{self, Hyperparams, SavedModel};
use bpsignal::textproc::{self, TfidfModel, TfidfParams};
use bpsignal::{Error, ErrorKind};

fn py_err(e: Error) -> PyErr {
    match e.kind() {
        ErrorKind::Internal => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Lowercased word tokens.
#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    textproc::tokenize(text).iter().map(str::to_string).collect()
}

#[pyfunction]
fn porter_stem(word: &str) -> String {
    textproc::porter_stem(word)
}

#[pyclass(name = "Lexicon", frozen)]
struct PyLexicon {
    inner: Lexicon,
}

#[pymethods]
impl PyLexicon {
    /// Parses LIWC `.dic` text.
    #[staticmethod]
    fn from_dic(text: &str) -> PyResult<Self> {
        lexicon::parse_dic(text).map(|inner| Self { inner }).map_err(py_err)
    }

    /// The bundled demo dictionary.
    #[staticmethod]
    fn demo() -> Self {
        Self { inner: Lexicon::demo() }
    }

    fn category_names(&self) -> Vec<String> {
        self.inner.category_names().map(str::to_string).collect()
    }

    /// Categories matched by a single token.
    fn match_token(&self, token: &str) -> Vec<String> {
        self.inner
            .match_token(token)
            .iter()
            .filter_map(|&id| self.inner.category_name(id))
            .map(str::to_string)
            .collect()
    }

    /// `(category, count)` pairs in declaration order.
    fn counts(&self, text: &str) -> Vec<(String, usize)> {
        let counts = self.inner.count(&textproc::tokenize(text));
        self.category_names().into_iter().zip(counts).collect()
    }

    /// `(category, percent of tokens)` pairs in declaration order.
    fn percentages(&self, text: &str) -> PyResult<Vec<(String, f64)>> {
        let p = lexicon::profile(&self.inner, &textproc::tokenize(text), &[]).map_err(py_err)?;
        Ok(p.percent.into_iter().collect())
    }
}

#[pyclass(name = "TfidfModel", frozen)]
struct PyTfidf {
    inner: TfidfModel,
}

#[pymethods]
impl PyTfidf {
    /// Fits on raw document texts.
    #[staticmethod]
    #[pyo3(signature = (docs, min_df = 1, max_features = None))]
    fn fit(docs: Vec<String>, min_df: usize, max_features: Option<usize>) -> PyResult<Self> {
        let streams: Vec<_> = docs.iter().map(|d| textproc::tokenize(d)).collect();
        textproc::fit_tfidf(&streams, TfidfParams { min_df, max_features })
            .map(|inner| Self { inner })
            .map_err(py_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        serde_json::from_str(text)
            .map(|inner| Self { inner })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    fn terms(&self) -> Vec<String> {
        self.inner.terms().to_vec()
    }

    fn idf(&self) -> Vec<f64> {
        self.inner.idf().to_vec()
    }

    /// L2-normalized `(term, weight)` pairs for the nonzero columns.
    fn transform(&self, text: &str) -> Vec<(String, f64)> {
        let terms = self.inner.terms();
        self.inner
            .transform(&textproc::tokenize(text))
            .iter()
            .map(|(i, v)| (terms[i].clone(), v))
            .collect()
    }
}

#[pyclass(name = "TTest", frozen, get_all)]
struct PyTTest {
    t: f64,
    df: f64,
    p: f64,
    mean_a: f64,
    mean_b: f64,
}

/// Welch's two-sample t-test.
#[pyfunction]
fn welch_ttest(a: Vec<f64>, b: Vec<f64>) -> PyResult<PyTTest> {
    let r = analysis::welch_ttest(&a, &b).map_err(py_err)?;
    Ok(PyTTest {
        t: r.t,
        df: r.df,
        p: r.p,
        mean_a: r.mean_a,
        mean_b: r.mean_b,
    })
}

/// Test-row indices of each fold.
#[pyfunction]
fn stratified_kfold(labels: Vec<u8>, k: usize, seed: u64) -> PyResult<Vec<Vec<usize>>> {
    eval::stratified_kfold(&labels, k, seed).map_err(py_err)
}

/// `(accuracy, f1)` with bipolar (1) as the positive class.
#[pyfunction]
fn metrics(truth: Vec<u8>, predicted: Vec<u8>) -> PyResult<(f64, f64)> {
    let m = ml::metrics(&truth, &predicted).map_err(py_err)?;
    Ok((m.accuracy, m.f1))
}

fn dense_matrix(rows: &[Vec<f64>], labels: Vec<u8>, names: Vec<String>) -> PyResult<FeatureMatrix> {
    FeatureMatrix::new(
        names,
        (0..rows.len()).map(|i| format!("row{i}")).collect(),
        labels,
        rows.iter().map(|r| SparseVector::from_dense(r)).collect(),
    )
    .map_err(py_err)
}

#[pyclass(name = "Model", frozen)]
struct PyModel {
    inner: SavedModel,
}

impl PyModel {
    fn matrix(&self, rows: &[Vec<f64>]) -> PyResult<FeatureMatrix> {
        dense_matrix(rows, vec![0; rows.len()], self.inner.feature_names.clone())
    }
}

#[pymethods]
impl PyModel {
    /// Trains on dense rows. `params` is a hyperparameter JSON object such
    /// as `{"model": "logreg", "c": 1.0}`.
    #[staticmethod]
    fn train(rows: Vec<Vec<f64>>, labels: Vec<u8>, params: &str, seed: u64) -> PyResult<Self> {
        let hp: Hyperparams = serde_json::from_str(params).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let width = rows.first().map_or(0, Vec::len);
        let data = dense_matrix(&rows, labels, (0..width).map(|j| format!("x{j}")).collect())?;
        SavedModel::train(&data, hp, seed).map(|inner| Self { inner }).map_err(py_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        serde_json::from_str(text)
            .map(|inner| Self { inner })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    fn predict(&self, rows: Vec<Vec<f64>>) -> PyResult<Vec<u8>> {
        self.inner.predict(&self.matrix(&rows)?).map_err(py_err)
    }

    fn scores(&self, rows: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        self.inner.model.scores(&self.matrix(&rows)?).map_err(py_err)
    }
}

#[pymodule]
fn bpsignal_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(porter_stem, m)?)?;
    m.add_function(wrap_pyfunction!(welch_ttest, m)?)?;
    m.add_function(wrap_pyfunction!(stratified_kfold, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_class::<PyLexicon>()?;
    m.add_class::<PyTfidf>()?;
    m.add_class::<PyTTest>()?;
    m.add_class::<PyModel>()?;
    Ok(())
}
