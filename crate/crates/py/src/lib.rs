use flatstruct::catalog::{self, Depth, VerifyOptions};
use flatstruct::exprio::{parse_pvf, serialize_pvf};
use flatstruct::flatcore::{self, build_saito_matrices, check_extended_wdvv, frobenius_check};
use flatstruct::logvf::discriminant;
use flatstruct::ring::format_rational;
use pyo3::exceptions::{PyKeyError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde_json::Value;

fn to_py(py: Python<'_>, v: &Value) -> PyResult<Py<PyAny>> {
    Ok(match v {
        Value::Null => py.None(),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any().unbind(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any().unbind(),
            None => n
                .as_f64()
                .unwrap_or(f64::NAN)
                .into_pyobject(py)?
                .into_any()
                .unbind(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any().unbind(),
        Value::Array(xs) => {
            let list = PyList::empty(py);
            for x in xs {
                list.append(to_py(py, x)?)?;
            }
            list.into_any().unbind()
        }
        Value::Object(map) => {
            let d = PyDict::new(py);
            for (k, x) in map {
                d.set_item(k, to_py(py, x)?)?;
            }
            d.into_any().unbind()
        }
    })
}

fn depth(s: &str) -> PyResult<Depth> {
    match s {
        "symbolic" => Ok(Depth::Symbolic),
        "numeric" => Ok(Depth::Numeric),
        "full" => Ok(Depth::Full),
        _ => Err(PyValueError::new_err(format!(
            "depth must be symbolic, numeric or full, not {s:?}"
        ))),
    }
}

fn catalog_err(e: catalog::CatalogError) -> PyErr {
    match e {
        catalog::CatalogError::UnknownId(id) => PyKeyError::new_err(id),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// A potential vector field `g = (g_1, …, g_n)` with exact coefficients.
#[pyclass(name = "PotentialVF", module = "flatstruct", frozen)]
struct PyPotentialVF {
    inner: flatcore::PotentialVF,
}

#[pymethods]
impl PyPotentialVF {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = parse_pvf(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(PyPotentialVF { inner })
    }

    #[staticmethod]
    fn from_catalog(id: &str) -> PyResult<Self> {
        let inner = catalog::catalog_get(id)
            .and_then(|e| e.potential())
            .map_err(catalog_err)?;
        Ok(PyPotentialVF { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn weights(&self) -> Vec<String> {
        self.inner.weights().iter().map(format_rational).collect()
    }

    #[getter]
    fn g(&self) -> Vec<String> {
        self.inner.g.iter().map(|x| x.to_expr_string()).collect()
    }

    fn to_json(&self) -> String {
        serialize_pvf(&self.inner).to_json()
    }

    /// Exact extended-WDVV check.
    fn check_wdvv(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let rep = check_extended_wdvv(&self.inner);
        let v = serde_json::json!({
            "solution": rep.is_solution(),
            "unit": rep.unit_ok,
            "homogeneity": rep.homogeneity_ok,
            "saito_relations": rep.saito_relations_ok,
            "flat_normalization": rep.flat_normalization_ok,
            "failing_commutators": rep.failing_commutators(),
        });
        to_py(py, &v)
    }

    /// `h = det(−T)` as an expression string.
    fn discriminant(&self) -> PyResult<String> {
        let m = build_saito_matrices(&self.inner);
        let d = discriminant(&m).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        Ok(d.h.to_expr_string())
    }

    /// Prepotential `F`, when one exists without rescaling ambiguity.
    fn prepotential(&self) -> PyResult<Option<String>> {
        let f = frobenius_check(&self.inner).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        Ok(f.map(|p| p.f.to_expr_string()))
    }

    /// Symbolic, numeric or full verification along `path` (defaults to a
    /// catalog path only for catalog entries, so it is required here).
    #[allow(clippy::too_many_arguments)]
    #[pyo3(signature = (t1, t2, t3=0.0, samples=41, depth="numeric", entry=(1, 2)))]
    fn verify(
        &self,
        py: Python<'_>,
        t1: f64,
        t2: (f64, f64),
        t3: f64,
        samples: usize,
        depth: &str,
        entry: (usize, usize),
    ) -> PyResult<Py<PyAny>> {
        let path = catalog::PathSpec {
            t1,
            t2: [t2.0, t2.1],
            t3,
            samples,
            max_step: (t2.1 - t2.0).abs() / (samples.max(2) - 1) as f64,
            z_seed: None,
        };
        let opts = VerifyOptions {
            depth: self::depth(depth)?,
            entry,
            ..VerifyOptions::default()
        };
        let rep = py.detach(|| catalog::verify_pvf(&self.inner, &path, &opts));
        to_py(
            py,
            &serde_json::to_value(&rep).map_err(|e| PyRuntimeError::new_err(e.to_string()))?,
        )
    }

    fn __repr__(&self) -> String {
        format!("PotentialVF({:?}, n={})", self.inner.name, self.inner.n())
    }
}

#[pyfunction]
fn catalog_list() -> Vec<&'static str> {
    catalog::catalog_list()
}

/// Verify a catalog entry; returns the report as a dict.
#[pyfunction]
#[pyo3(signature = (id, depth="full"))]
fn catalog_verify(py: Python<'_>, id: &str, depth: &str) -> PyResult<Py<PyAny>> {
    let d = self::depth(depth)?;
    let rep = py
        .detach(|| catalog::catalog_verify(id, d))
        .map_err(catalog_err)?;
    to_py(
        py,
        &serde_json::to_value(&rep).map_err(|e| PyRuntimeError::new_err(e.to_string()))?,
    )
}

/// Run the command-line interface in-process: `(exit_code, report)`.
#[pyfunction]
fn run_cli(py: Python<'_>, args: Vec<String>) -> PyResult<(i32, Py<PyAny>)> {
    let out =
        py.detach(|| flatstruct::cli::run(std::iter::once("flatstruct".to_string()).chain(args)));
    Ok((out.code, to_py(py, &out.report)?))
}

#[pymodule(name = "flatstruct")]
fn flatstruct_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPotentialVF>()?;
    m.add_function(wrap_pyfunction!(catalog_list, m)?)?;
    m.add_function(wrap_pyfunction!(catalog_verify, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}
