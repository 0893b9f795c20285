//! Python bindings. Boxes are sequences of `(lo, hi)` pairs; safe sets may
//! use `None` for an unconstrained dimension. Certificates and reports come
//! back as plain dicts.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyAny;

use topoverify as tv;
use tv::{Engine, IBox, Interval, Method, SafeSet, VerifyConfig};

fn to_py(e: tv::Error) -> PyErr {
    match e {
        tv::Error::Io(e) => PyIOError::new_err(e.to_string()),
        tv::Error::GaveUp(_) => PyRuntimeError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn ibox(bounds: Vec<(f64, f64)>) -> PyResult<IBox> {
    IBox::from_bounds(&bounds).map_err(to_py)
}

fn safe_set(dims: Vec<Option<(f64, f64)>>) -> PyResult<SafeSet> {
    let dims = dims
        .into_iter()
        .map(|d| d.map(|(lo, hi)| Interval::new(lo, hi)).transpose())
        .collect::<tv::Result<Vec<_>>>()
        .map_err(to_py)?;
    SafeSet::new(dims).map_err(to_py)
}

fn bounds(b: &IBox) -> Vec<(f64, f64)> {
    b.dims().iter().map(|d| (d.lo, d.hi)).collect()
}

fn engine(name: &str) -> PyResult<Engine> {
    match name {
        "ibp" => Ok(Engine::Ibp),
        "zono" | "zonotope" => Ok(Engine::Zonotope),
        _ => Err(PyValueError::new_err(format!("unknown engine `{name}`"))),
    }
}

fn method(name: &str) -> PyResult<Option<Method>> {
    Ok(Some(match name {
        "auto" => return Ok(None),
        "boundary" => Method::Boundary,
        "entire" => Method::Entire,
        "subset" => Method::Subset,
        "openmap" => Method::OpenMap,
        _ => return Err(PyValueError::new_err(format!("unknown method `{name}`"))),
    }))
}

/// Serializable value to a Python dict/list via the `json` module.
fn to_dict<'py>(py: Python<'py>, v: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(name = "Network", module = "topoverify", frozen)]
struct PyNetwork {
    inner: tv::Network,
}

#[pymethods]
impl PyNetwork {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyNetwork {
            inner: tv::Network::from_json(text).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyNetwork {
            inner: tv::Network::load(path).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn identity(dim: usize) -> Self {
        PyNetwork {
            inner: tv::Network::identity(dim),
        }
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(path).map_err(to_py)
    }

    fn forward(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.forward(&x).map_err(to_py)
    }

    /// Layers `start..=stop` as a new network.
    fn slice(&self, start: usize, stop: usize) -> PyResult<Self> {
        Ok(PyNetwork {
            inner: self.inner.slice(start, stop).map_err(to_py)?,
        })
    }

    #[getter]
    fn widths(&self) -> Vec<usize> {
        self.inner.widths()
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    #[getter]
    fn output_dim(&self) -> usize {
        self.inner.output_dim()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        let w: Vec<String> = self.inner.widths().iter().map(usize::to_string).collect();
        format!("Network({})", w.join("-"))
    }
}

#[pyfunction]
fn ibp(py: Python<'_>, net: &PyNetwork, x: Vec<(f64, f64)>) -> PyResult<Vec<(f64, f64)>> {
    let x = ibox(x)?;
    let h = py
        .detach(|| tv::ibp_output(&net.inner, &x))
        .map_err(to_py)?;
    Ok(bounds(&h))
}

#[pyfunction]
fn zono(py: Python<'_>, net: &PyNetwork, x: Vec<(f64, f64)>) -> PyResult<Vec<(f64, f64)>> {
    let x = ibox(x)?;
    let (h, _) = py
        .detach(|| tv::zono_forward(&net.inner, &x))
        .map_err(to_py)?;
    Ok(bounds(&h))
}

/// Union hull over a `grid`-per-dimension partition of the box.
#[pyfunction]
#[pyo3(signature = (net, x, grid = 1, engine = "ibp"))]
fn reach(
    py: Python<'_>,
    net: &PyNetwork,
    x: Vec<(f64, f64)>,
    grid: usize,
    engine: &str,
) -> PyResult<Vec<(f64, f64)>> {
    let (x, e) = (ibox(x)?, self::engine(engine)?);
    let h = py
        .detach(|| tv::reach(&net.inner, e, &tv::partition_box(&x, grid)))
        .map_err(to_py)?;
    Ok(bounds(&h))
}

#[pyfunction]
fn check_homeomorphism<'py>(
    py: Python<'py>,
    net: &PyNetwork,
    x: Vec<(f64, f64)>,
) -> PyResult<Bound<'py, PyAny>> {
    let x = ibox(x)?;
    let cert = py
        .detach(|| tv::check_homeomorphism(&net.inner, &x))
        .map_err(to_py)?;
    to_dict(py, &cert)
}

#[pyfunction]
#[pyo3(signature = (net, tol = tv::topology::DEFAULT_RANK_TOL))]
fn check_open_map<'py>(py: Python<'py>, net: &PyNetwork, tol: f64) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &tv::check_open_map(&net.inner, tol))
}

#[pyfunction]
#[pyo3(signature = (net, tol = tv::topology::DEFAULT_RANK_TOL))]
fn find_open_suffix(net: &PyNetwork, tol: f64) -> usize {
    tv::find_open_suffix(&net.inner, tol)
}

#[pyfunction]
#[pyo3(signature = (net, x, safe, method = "auto", engine = "ibp", rounds = 8, grid = 10))]
#[allow(clippy::too_many_arguments)]
fn verify<'py>(
    py: Python<'py>,
    net: &PyNetwork,
    x: Vec<(f64, f64)>,
    safe: Vec<Option<(f64, f64)>>,
    method: &str,
    engine: &str,
    rounds: usize,
    grid: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let (x, s, m) = (ibox(x)?, safe_set(safe)?, self::method(method)?);
    let cfg = VerifyConfig {
        engine: self::engine(engine)?,
        max_rounds: rounds,
        homeo_grid: grid,
        ..Default::default()
    };
    let report = py
        .detach(|| match m {
            Some(m) => tv::verify::verify_with(m, &net.inner, &x, &s, &cfg),
            None => tv::verify_auto(&net.inner, &x, &s, &cfg),
        })
        .map_err(to_py)?;
    to_dict(py, &report)
}

/// Entire-set versus boundary hull widths without partitioning.
#[pyfunction]
#[pyo3(signature = (net, x, safe = None, engine = "ibp"))]
fn compare<'py>(
    py: Python<'py>,
    net: &PyNetwork,
    x: Vec<(f64, f64)>,
    safe: Option<Vec<Option<(f64, f64)>>>,
    engine: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let x = ibox(x)?;
    let s = match safe {
        Some(s) => safe_set(s)?,
        None => safe_set(vec![Some((f64::MIN, f64::MAX)); net.inner.output_dim()])?,
    };
    let cfg = VerifyConfig {
        engine: self::engine(engine)?,
        ..Default::default()
    };
    let cmp = py
        .detach(|| tv::compare(&net.inner, &x, &s, &cfg))
        .map_err(to_py)?;
    to_dict(py, &cmp)
}

/// Monte-Carlo sample: dict with `hull`, `inputs`, `outputs`, `seed`, `rng`.
#[pyfunction]
#[pyo3(signature = (net, x, n = 10_000, seed = 0))]
fn mc_reach<'py>(
    py: Python<'py>,
    net: &PyNetwork,
    x: Vec<(f64, f64)>,
    n: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let x = ibox(x)?;
    let cloud = py
        .detach(|| tv::mc_reach(&net.inner, &x, n, seed))
        .map_err(to_py)?;
    to_dict(py, &cloud)
}

#[pyfunction]
#[pyo3(signature = (net, x, safe, n = 100_000, seed = 0))]
fn falsify(
    py: Python<'_>,
    net: &PyNetwork,
    x: Vec<(f64, f64)>,
    safe: Vec<Option<(f64, f64)>>,
    n: usize,
    seed: u64,
) -> PyResult<Option<Vec<f64>>> {
    let (x, s) = (ibox(x)?, safe_set(safe)?);
    py.detach(|| tv::falsify(&net.inner, &x, &s, n, seed))
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (widths, activation = "sigmoid", output_activation = "identity", seed = 0))]
fn gen_net(
    widths: Vec<usize>,
    activation: &str,
    output_activation: &str,
    seed: u64,
) -> PyResult<PyNetwork> {
    let hidden = tv::Activation::from_name(activation, None).map_err(to_py)?;
    let output = tv::Activation::from_name(output_activation, None).map_err(to_py)?;
    let doc = tv::cli::gen_net(&widths, hidden, output, seed).map_err(to_py)?;
    Ok(PyNetwork {
        inner: tv::load_network(&doc).map_err(to_py)?,
    })
}

#[pymodule]
#[pyo3(name = "topoverify")]
fn topoverify_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNetwork>()?;
    m.add_function(wrap_pyfunction!(ibp, m)?)?;
    m.add_function(wrap_pyfunction!(zono, m)?)?;
    m.add_function(wrap_pyfunction!(reach, m)?)?;
    m.add_function(wrap_pyfunction!(check_homeomorphism, m)?)?;
    m.add_function(wrap_pyfunction!(check_open_map, m)?)?;
    m.add_function(wrap_pyfunction!(find_open_suffix, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(mc_reach, m)?)?;
    m.add_function(wrap_pyfunction!(falsify, m)?)?;
    m.add_function(wrap_pyfunction!(gen_net, m)?)?;
    Ok(())
}
