//! Python bindings: `import gsp`.

use gsp_core::bounds::{self, BoundParams};
use gsp_core::persistence::{self, EstimateOptions, MethodChoice};
use gsp_core::sampler::{self, PathGrid};
use gsp_core::spectral::MeasureSpec;
use gsp_core::{catalog, chebyshev, Domain, RngSpec, SpectralMeasure};
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

fn err(e: gsp_core::Error) -> PyErr {
    if e.is_inapplicable() {
        PyArithmeticError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

/// Round-trip through JSON into plain Python objects.
fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_domain(s: Option<&str>, default: Domain) -> PyResult<Domain> {
    match s {
        None => Ok(default),
        Some("integer" | "integer_time" | "Z") => Ok(Domain::IntegerTime),
        Some("continuous" | "continuous_time" | "R") => Ok(Domain::ContinuousTime),
        Some(other) => Err(PyValueError::new_err(format!("unknown domain {other:?}"))),
    }
}

fn parse_method(s: &str) -> PyResult<MethodChoice> {
    Ok(match s {
        "auto" => MethodChoice::Auto,
        "exact" => MethodChoice::Exact,
        "orthant" => MethodChoice::Orthant,
        "path" => MethodChoice::Path,
        other => return Err(PyValueError::new_err(format!("unknown method {other:?}"))),
    })
}

/// A spectral measure on ℤ or ℝ.
#[pyclass(name = "Measure", module = "gsp", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyMeasure {
    inner: SpectralMeasure,
}

#[pymethods]
impl PyMeasure {
    /// Catalog entry: `iid`, `sinc`, `uniform`, `gap`, `mixed`, `power`, `exp_well`.
    #[staticmethod]
    #[pyo3(signature = (name, domain=None, alpha=None, a=None))]
    fn catalog(name: &str, domain: Option<&str>, alpha: Option<f64>, a: Option<f64>) -> PyResult<Self> {
        let d = parse_domain(domain, Domain::IntegerTime)?;
        let need = |v: Option<f64>, what: &str| v.ok_or_else(|| PyValueError::new_err(format!("{name} needs {what}")));
        let inner = match name {
            "iid" => catalog::iid(),
            "sinc" => catalog::sinc(),
            "uniform" => catalog::uniform(d),
            "gap" => catalog::gap(d),
            "mixed" => catalog::mixed(d),
            "power" => catalog::power(need(alpha, "alpha")?, d).map_err(err)?,
            "exp_well" => catalog::exp_well(need(a, "a")?, d).map_err(err)?,
            other => return Err(PyValueError::new_err(format!("unknown catalog measure {other:?}"))),
        };
        Ok(PyMeasure { inner })
    }

    /// Parse a JSON declaration.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let spec: MeasureSpec = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(PyMeasure {
            inner: SpectralMeasure::from_spec(&spec).map_err(err)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner.to_spec()).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn digest(&self) -> String {
        self.inner.digest()
    }

    #[getter]
    fn domain(&self) -> &'static str {
        match self.inner.domain() {
            Domain::IntegerTime => "integer_time",
            Domain::ContinuousTime => "continuous_time",
        }
    }

    fn total_mass(&self) -> f64 {
        self.inner.total_mass()
    }

    fn covariance(&self, t: f64) -> f64 {
        self.inner.covariance(t)
    }

    /// `∫|λ|^δ dρ`, or `None` when it diverges.
    fn moment(&self, delta: f64) -> Option<f64> {
        self.inner.moment(delta).finite()
    }

    fn sigma_sq(&self, n: f64) -> f64 {
        self.inner.sigma_sq(n)
    }

    fn k_of_n(&self, n: f64) -> u32 {
        bounds::k_of_n(&self.inner, n)
    }

    fn __repr__(&self) -> String {
        format!("Measure(domain={}, digest={})", self.domain(), self.inner.digest())
    }
}

/// Persistence estimate as a dict with `log_p`, `se_log`, `method`, ...
#[pyfunction]
#[pyo3(signature = (measure, n, h=None, method="auto", n_samples=100_000, seed=0))]
fn estimate<'py>(
    py: Python<'py>,
    measure: &PyMeasure,
    n: f64,
    h: Option<f64>,
    method: &str,
    n_samples: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let opts = EstimateOptions {
        method: parse_method(method)?,
        ..EstimateOptions::with_samples(n_samples)
    };
    let rng = RngSpec::new(seed);
    let rho = &measure.inner;
    let est = py
        .detach(|| match rho.domain() {
            Domain::IntegerTime => {
                if n.fract() != 0.0 || n < 0.0 {
                    return Err(PyValueError::new_err(format!("N = {n} must be a nonnegative integer")));
                }
                persistence::persistence_integer_with(rho, n as usize, &opts, &rng).map_err(err)
            }
            Domain::ContinuousTime => {
                let h = h.ok_or_else(|| PyValueError::new_err("continuous time needs a grid step h"))?;
                persistence::persistence_continuous_with(rho, n, h, &opts, &rng).map_err(err)
            }
        })?;
    to_py(py, &est)
}

/// One estimate per `N`; failed points carry an `error` entry.
#[pyfunction]
#[pyo3(signature = (measure, ns, h=None, method="auto", n_samples=20_000, seed=0))]
fn curve<'py>(
    py: Python<'py>,
    measure: &PyMeasure,
    ns: Vec<f64>,
    h: Option<f64>,
    method: &str,
    n_samples: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let opts = EstimateOptions {
        method: parse_method(method)?,
        ..EstimateOptions::with_samples(n_samples)
    };
    let rng = RngSpec::new(seed);
    let rho = &measure.inner;
    let pts = py.detach(|| persistence::persistence_curve(rho, &ns, h, &opts, &rng)).map_err(err)?;
    to_py(py, &pts)
}

/// Sample paths on `start + step·i`, one list per path.
#[pyfunction]
#[pyo3(signature = (measure, count, n_paths=1, step=None, start=0.0, method="circulant", seed=0))]
fn sample(
    py: Python<'_>,
    measure: &PyMeasure,
    count: usize,
    n_paths: usize,
    step: Option<f64>,
    start: f64,
    method: &str,
    seed: u64,
) -> PyResult<Vec<Vec<f64>>> {
    let rho = &measure.inner;
    let grid = match rho.domain() {
        Domain::IntegerTime => PathGrid::integer(start.round() as i64, count),
        Domain::ContinuousTime => PathGrid::continuous(start, step.unwrap_or(1.0), count).map_err(err)?,
    };
    let rng = RngSpec::new(seed);
    let paths = py
        .detach(|| match method {
            "circulant" => sampler::sample_circulant(rho, &grid, n_paths, &rng).map_err(err),
            "exact" => sampler::sample_exact(rho, &grid, n_paths, &rng).map_err(err),
            "spectral" => sampler::sample_spectral(rho, &grid, 256, n_paths, &rng).map(|s| s.paths).map_err(err),
            other => Err(PyValueError::new_err(format!("unknown sampler {other:?}"))),
        })?;
    Ok(paths.into_iter().map(|p| p.values).collect())
}

/// Optimized lower bound on `log P(N)`.
#[pyfunction]
#[pyo3(signature = (measure, n, beta=None, ell0=None))]
fn lower_bound<'py>(py: Python<'py>, measure: &PyMeasure, n: f64, beta: Option<f64>, ell0: Option<f64>) -> PyResult<Bound<'py, PyAny>> {
    let params = BoundParams {
        beta,
        ell0,
        ..BoundParams::default()
    };
    let r = bounds::optimize_lower(&measure.inner, n, &params).map_err(err)?;
    to_py(py, &r)
}

/// Optimized upper bound on `log P(N)`; raises `ArithmeticError` when no
/// absolutely continuous floor applies.
#[pyfunction]
#[pyo3(signature = (measure, n, k=None))]
fn upper_bound<'py>(py: Python<'py>, measure: &PyMeasure, n: f64, k: Option<u32>) -> PyResult<Bound<'py, PyAny>> {
    let params = BoundParams {
        k,
        ..BoundParams::default()
    };
    let r = bounds::optimize_upper(&measure.inner, n, &params).map_err(err)?;
    to_py(py, &r)
}

#[pyfunction]
fn chebyshev_extrema(k: usize) -> PyResult<Vec<f64>> {
    Ok(chebyshev::extrema(k).map_err(err)?.nodes)
}

/// Leading divided difference of `values` on `nodes`.
#[pyfunction]
fn divided_difference(nodes: Vec<f64>, values: Vec<f64>) -> PyResult<f64> {
    Ok(chebyshev::divided_difference_on(&nodes, &values).map_err(err)?.leading)
}

/// `max_j |P(x_j)|` over the extrema of a monic polynomial (ascending coefficients).
#[pyfunction]
fn min_norm_check<'py>(py: Python<'py>, coeffs: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
    let r = chebyshev::min_norm_check(&coeffs).map_err(err)?;
    to_py(py, &r)
}

#[pymodule]
fn gsp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMeasure>()?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(curve, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(upper_bound, m)?)?;
    m.add_function(wrap_pyfunction!(chebyshev_extrema, m)?)?;
    m.add_function(wrap_pyfunction!(divided_difference, m)?)?;
    m.add_function(wrap_pyfunction!(min_norm_check, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
