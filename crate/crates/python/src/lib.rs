//! Python bindings for `hqlab`.

use hqlab::cli::{run_solve, run_verify, verify_config_from_value, SolveOutcome};
use hqlab::config::{self, SolveConfig};
use hqlab::lab::{theoretical_c1, theoretical_c2, verify_or_vacuous, Constraint, SampleSpec};
use hqlab::symmetric;
use hqlab::{build_index_table, HqError, HqOperator, OperatorConfig, Spectrum};
use nalgebra::DMatrix;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(hqlab_py, HqlabError, PyException);
create_exception!(hqlab_py, NonConvergenceError, HqlabError);

fn to_py(e: HqError) -> PyErr {
    match e {
        HqError::NonConvergence { .. } | HqError::SingularSystem(_) => {
            NonConvergenceError::new_err(e.to_string())
        }
        _ => HqlabError::new_err(e.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("matrix must be square"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn json_to_py<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn py_to_json(py: Python<'_>, obj: &Bound<'_, PyAny>) -> PyResult<String> {
    if let Ok(s) = obj.extract::<String>() {
        return Ok(s);
    }
    py.import("json")?.call_method1("dumps", (obj,))?.extract()
}

/// `(n, p, k, l)` with `N = C(n, p)`.
#[pyclass(name = "OperatorConfig", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyOperatorConfig {
    inner: OperatorConfig,
}

#[pymethods]
impl PyOperatorConfig {
    #[new]
    fn new(n: usize, p: usize, k: usize, l: usize) -> PyResult<Self> {
        let inner = OperatorConfig::new(n, p, k, l).map_err(to_py)?;
        Ok(PyOperatorConfig { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn p(&self) -> usize {
        self.inner.p
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k
    }

    #[getter]
    fn l(&self) -> usize {
        self.inner.l
    }

    #[getter]
    fn big_n(&self) -> usize {
        self.inner.big_n()
    }

    fn __repr__(&self) -> String {
        format!("OperatorConfig({})", self.inner)
    }
}

/// The quotient operator for one configuration.
#[pyclass(name = "HqOperator", frozen)]
struct PyHqOperator {
    inner: HqOperator,
}

#[pymethods]
impl PyHqOperator {
    #[new]
    fn new(n: usize, p: usize, k: usize, l: usize) -> PyResult<Self> {
        let cfg = OperatorConfig::new(n, p, k, l).map_err(to_py)?;
        let inner = HqOperator::new(cfg).map_err(to_py)?;
        Ok(PyHqOperator { inner })
    }

    #[getter]
    fn config(&self) -> PyOperatorConfig {
        PyOperatorConfig {
            inner: self.inner.config(),
        }
    }

    /// Dict with `f`, `ftilde`, `eigenvalues`, `big_lambda`, `admissible`.
    fn evaluate<'py>(&self, py: Python<'py>, a: Vec<Vec<f64>>) -> PyResult<Bound<'py, PyDict>> {
        let point = self.inner.evaluate(&matrix(a)?).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("f", point.f_value)?;
        d.set_item("ftilde", point.ftilde_value)?;
        d.set_item("eigenvalues", point.spectrum().to_vec())?;
        d.set_item("big_lambda", point.big_lambda.clone())?;
        d.set_item("admissible", point.admissible)?;
        Ok(d)
    }

    fn admissible(&self, a: Vec<Vec<f64>>) -> PyResult<bool> {
        Ok(self.inner.admissible(&matrix(a)?).map_err(to_py)?.admissible)
    }

    /// `(F, Ft)` from eigenvalues.
    fn values(&self, lam: Vec<f64>) -> PyResult<(f64, f64)> {
        self.inner.values_from_spectrum(&lam).map_err(to_py)
    }

    fn big_lambda(&self, lam: Vec<f64>) -> Vec<f64> {
        self.inner.big_lambda(&lam)
    }

    /// `(F^{ij}, Ft^{ij})`.
    #[pyo3(signature = (a, via_derivation = false))]
    fn gradient(&self, a: Vec<Vec<f64>>, via_derivation: bool) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let a = matrix(a)?;
        let g = if via_derivation {
            self.inner.gradient_via_derivation(&a)
        } else {
            self.inner.gradient(&a)
        }
        .map_err(to_py)?;
        Ok((rows(&g.f), rows(&g.ftilde)))
    }

    /// `d^2 Ft(A)[B, B]`.
    fn hessian_form(&self, a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> PyResult<f64> {
        self.inner.hessian_form(&matrix(a)?, &matrix(b)?).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("HqOperator({})", self.inner.config())
    }
}

/// Elementary symmetric polynomial `sigma_m(v)`.
#[pyfunction]
fn sigma(m: i64, v: Vec<f64>) -> f64 {
    symmetric::sigma(m, &v)
}

/// All `p`-fold sums of `lam` in multi-index order.
#[pyfunction]
fn lambda_of(lam: Vec<f64>, p: usize) -> PyResult<Vec<f64>> {
    let table = build_index_table(p, lam.len()).map_err(to_py)?;
    let spec = Spectrum::new(lam).map_err(to_py)?;
    Ok(hqlab::lambda_of(&spec, &table).map_err(to_py)?.values().to_vec())
}

/// The `N x N` derivation matrix of a symmetric `a`.
#[pyfunction]
fn derivation_matrix(a: Vec<Vec<f64>>, p: usize) -> PyResult<Vec<Vec<f64>>> {
    let a = matrix(a)?;
    let table = build_index_table(p, a.nrows()).map_err(to_py)?;
    let w = hqlab::derivation_matrix(&a, &table).map_err(to_py)?;
    Ok(rows(w.matrix()))
}

#[pyfunction]
fn constant_c1(cfg: &PyOperatorConfig) -> PyResult<f64> {
    theoretical_c1(&cfg.inner).map_err(to_py)
}

#[pyfunction]
fn constant_c2(cfg: &PyOperatorConfig, delta: f64, eps: f64) -> PyResult<f64> {
    theoretical_c2(&cfg.inner, delta, eps).map_err(to_py)
}

/// Sample one lemma (`"f11"` or `"l2"`) and return the report as a dict.
#[pyfunction]
#[pyo3(signature = (cfg, lemma, count, seed, delta = None, eps = None))]
fn verify_lemma<'py>(
    py: Python<'py>,
    cfg: &PyOperatorConfig,
    lemma: &str,
    count: usize,
    seed: u64,
    delta: Option<f64>,
    eps: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let constraint = match (lemma, delta, eps) {
        ("f11", None, None) => Constraint::FirstNegative,
        ("l2", Some(delta), Some(eps)) => Constraint::Pinched { delta, eps },
        ("f11", _, _) => return Err(PyValueError::new_err("f11 takes no delta or eps")),
        ("l2", _, _) => return Err(PyValueError::new_err("l2 needs delta and eps")),
        _ => return Err(PyValueError::new_err(format!("unknown lemma {lemma:?}"))),
    };
    let spec = SampleSpec::new(cfg.inner, constraint, count, seed);
    let report = py
        .detach(|| verify_or_vacuous(lemma, &spec, 1.0))
        .map_err(to_py)?;
    json_to_py(py, &serde_json::to_string(&report).map_err(|e| HqlabError::new_err(e.to_string()))?)
}

/// Run a verify config (JSON text or dict); returns the list of reports.
#[pyfunction]
fn verify<'py>(py: Python<'py>, config: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let text = py_to_json(py, config)?;
    let value: serde_json::Value = config::parse(&text, "verify config").map_err(to_py)?;
    let cfg = verify_config_from_value(value).map_err(to_py)?;
    cfg.validate().map_err(to_py)?;
    let reports = py.detach(|| run_verify(&cfg)).map_err(to_py)?;
    json_to_py(py, &serde_json::to_string(&reports).map_err(|e| HqlabError::new_err(e.to_string()))?)
}

/// Run a solve config (JSON text or dict). Returns a dict with `summary`
/// (or `continuation`), `r` and `u`.
#[pyfunction]
fn solve<'py>(py: Python<'py>, config: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyDict>> {
    let text = py_to_json(py, config)?;
    let cfg: SolveConfig = config::parse(&text, "solve config").map_err(to_py)?;
    let outcome = py.detach(|| run_solve(&cfg)).map_err(to_py)?;
    let err = |e: serde_json::Error| HqlabError::new_err(e.to_string());
    let d = PyDict::new(py);
    let field = match outcome {
        SolveOutcome::Single(summary, field) => {
            d.set_item("summary", json_to_py(py, &serde_json::to_string(&summary).map_err(err)?)?)?;
            Some(field)
        }
        SolveOutcome::Continuation(res) => {
            let body = serde_json::json!({
                "steps": res.steps,
                "constant_c": res.constant_c,
                "failure": res.failure,
            });
            d.set_item("continuation", json_to_py(py, &body.to_string())?)?;
            res.v
        }
    };
    if let Some(f) = field {
        let coords: Vec<_> = (0..f.values.len()).map(|i| f.grid.coord(i)).collect();
        d.set_item("r", coords.iter().map(|c| c.r).collect::<Vec<_>>())?;
        d.set_item("theta", coords.iter().map(|c| c.theta).collect::<Vec<_>>())?;
        d.set_item("u", f.values)?;
    }
    Ok(d)
}

#[pymodule]
fn hqlab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("HqlabError", m.py().get_type::<HqlabError>())?;
    m.add("NonConvergenceError", m.py().get_type::<NonConvergenceError>())?;
    m.add_class::<PyOperatorConfig>()?;
    m.add_class::<PyHqOperator>()?;
    m.add_function(wrap_pyfunction!(sigma, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_of, m)?)?;
    m.add_function(wrap_pyfunction!(derivation_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(constant_c1, m)?)?;
    m.add_function(wrap_pyfunction!(constant_c2, m)?)?;
    m.add_function(wrap_pyfunction!(verify_lemma, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    Ok(())
}
