//! Python module `jl_phase`.
//!
//! Domain and parse errors raise `ValueError`, numeric non-convergence
//! raises `ArithmeticError`, and file errors raise `OSError`.

use jl_core::{bounds, cert, phase, rng, sphere, tail, transform, Error};
use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Domain(_) | Error::Parse { .. } => PyValueError::new_err(e.to_string()),
        Error::Numeric(_) => PyArithmeticError::new_err(e.to_string()),
        Error::Io(_) => PyOSError::new_err(e.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for jl_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn params(k: usize, d: usize) -> PyResult<sphere::SplitParams> {
    sphere::SplitParams::new(k, d).py()
}

#[pyclass(name = "TailProbabilities", frozen, get_all)]
struct PyTail {
    above: f64,
    below: f64,
    method: String,
    abs_error_estimate: f64,
}

#[pymethods]
impl PyTail {
    fn __repr__(&self) -> String {
        format!(
            "TailProbabilities(above={}, below={}, method='{}')",
            self.above, self.below, self.method
        )
    }
}

/// Exact tails `P[s > s0(1+eps)]`, `P[s < s0(1-eps)]`.
/// `method` is `closed`, `quadrature` or `monte_carlo`.
#[pyfunction]
#[pyo3(signature = (k, d, eps, method = "closed", n = 100_000, seed = 0))]
fn tail_probabilities(k: usize, d: usize, eps: f64, method: &str, n: u64, seed: u64) -> PyResult<PyTail> {
    let q = tail::TailQuery::new(params(k, d)?, eps).py()?;
    let t = match method {
        "closed" => tail::tail_probabilities(&q),
        "quadrature" => tail::tail_probabilities_quadrature(&q),
        "monte_carlo" => tail::tail_probabilities_monte_carlo(&q, n, seed),
        other => return Err(PyValueError::new_err(format!("unknown method '{other}'"))),
    }
    .py()?;
    Ok(PyTail {
        above: t.above,
        below: t.below,
        method: method.to_owned(),
        abs_error_estimate: t.abs_error_estimate,
    })
}

#[pyfunction]
fn cdf(k: usize, d: usize, t: f64) -> PyResult<f64> {
    tail::cdf(params(k, d)?, t).py()
}

#[pyfunction]
fn log_sphere_area(d: usize) -> PyResult<f64> {
    sphere::log_sphere_area(d).py()
}

#[pyfunction]
fn log_b(k: usize, d: usize) -> PyResult<f64> {
    Ok(sphere::log_b(params(k, d)?))
}

/// `n` seeded uniform points on the unit sphere in `R^d`.
#[pyfunction]
#[pyo3(signature = (d, n, seed = 0))]
fn sample_sphere(d: usize, n: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    let mut r = rng::substream(seed, 0);
    (0..n)
        .map(|_| sphere::sample_uniform_sphere(d, &mut r).map(|x| x.into_coords()))
        .collect::<jl_core::Result<_>>()
        .py()
}

/// `(s, u, v)` for a unit vector `x` split after `k` coordinates.
#[pyfunction]
fn split(x: Vec<f64>, k: usize) -> PyResult<(f64, Vec<f64>, Vec<f64>)> {
    let d = x.len();
    let sp = sphere::split(&sphere::UnitVector::new(x).py()?, params(k, d)?).py()?;
    Ok((sp.s(), sp.u().coords().to_vec(), sp.v().coords().to_vec()))
}

#[pyclass(name = "BoundReport", frozen)]
struct PyBoundReport(bounds::BoundReport);

#[pymethods]
impl PyBoundReport {
    #[getter]
    fn exact_above(&self) -> f64 {
        self.0.exact_above
    }
    #[getter]
    fn exact_below(&self) -> f64 {
        self.0.exact_below
    }
    #[getter]
    fn assumptions_hold(&self) -> bool {
        self.0.assumptions.holds()
    }
    #[getter]
    fn parity_ok(&self) -> bool {
        self.0.assumptions.parity_ok
    }
    #[getter]
    fn violations(&self) -> Vec<String> {
        self.0.assumptions.violations()
    }
    fn has_violation(&self) -> bool {
        self.0.has_violation()
    }
    #[staticmethod]
    fn csv_header() -> &'static str {
        bounds::BoundReport::CSV_HEADER
    }
    fn csv_row(&self) -> String {
        self.0.csv_row()
    }
    fn __repr__(&self) -> String {
        format!("BoundReport({})", self.0.csv_row())
    }
}

#[pyfunction]
#[pyo3(signature = (k, d, eps, delta = 0.5))]
fn bound_report(k: usize, d: usize, eps: f64, delta: f64) -> PyResult<PyBoundReport> {
    bounds::BoundReport::compute(params(k, d)?, eps, delta).py().map(PyBoundReport)
}

#[pyfunction]
fn default_tail_constant() -> f64 {
    bounds::default_tail_constant()
}

#[pyclass(name = "ProjectionMatrix", frozen)]
struct PyMatrix(transform::ProjectionMatrix);

#[pymethods]
impl PyMatrix {
    /// `kind` is `achlioptas`, `gaussian` or `orthogonal`.
    #[staticmethod]
    #[pyo3(signature = (kind, k, d, seed = 0))]
    fn construct(kind: &str, k: usize, d: usize, seed: u64) -> PyResult<Self> {
        let kind = kind.parse().py()?;
        transform::construct(kind, k, d, &mut rng::substream(seed, 0)).py().map(PyMatrix)
    }
    #[staticmethod]
    fn from_rows(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        transform::ProjectionMatrix::from_rows(&rows).py().map(PyMatrix)
    }
    #[getter]
    fn kind(&self) -> &'static str {
        self.0.kind().as_str()
    }
    #[getter]
    fn k(&self) -> usize {
        self.0.k()
    }
    #[getter]
    fn d(&self) -> usize {
        self.0.d()
    }
    #[getter]
    fn scale(&self) -> f64 {
        self.0.scale()
    }
    fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.0.k()).map(|i| self.0.row(i).to_vec()).collect()
    }
    fn apply(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        transform::apply(&self.0, &x).py()
    }
    /// Singular values, descending.
    fn singular_values(&self) -> PyResult<Vec<f64>> {
        cert::spectral_profile(&self.0).py().map(|p| p.singular_values)
    }
    /// `(p_hat, std_error)` for `P[| |Aw|^2 - 1 | > eps]`, `w` uniform.
    #[pyo3(signature = (eps, n, seed = 0, decomposed = false))]
    fn failure_probability(&self, eps: f64, n: u64, seed: u64, decomposed: bool) -> PyResult<(f64, f64)> {
        let path = if decomposed { cert::FailurePath::Decomposed } else { cert::FailurePath::Direct };
        let e = cert::empirical_failure_prob(&self.0, eps, n, seed, path).py()?;
        Ok((e.p_hat, e.std_error))
    }
    fn __repr__(&self) -> String {
        format!("ProjectionMatrix(kind='{}', k={}, d={})", self.kind(), self.0.k(), self.0.d())
    }
}

#[pyfunction]
fn achlioptas_k(eps: f64, delta: f64) -> PyResult<usize> {
    transform::achlioptas_k(eps, delta).py()
}

#[pyfunction]
#[pyo3(signature = (eps, delta, c = None))]
fn kmn_upper_k(eps: f64, delta: f64, c: Option<f64>) -> PyResult<usize> {
    transform::kmn_upper_k(eps, delta, c).py()
}

#[pyfunction]
fn exact_failure_floor(k: usize, d: usize, eps: f64) -> PyResult<f64> {
    cert::exact_failure_floor(k, d, eps).py()
}

#[pyclass(name = "CertVerdict", frozen, get_all)]
struct PyVerdict {
    k: usize,
    d: usize,
    eps: f64,
    delta: f64,
    l: f64,
    margin: f64,
    no_jld: bool,
    eta: f64,
    gamma1: Option<f64>,
    gamma2: Option<f64>,
    analytic_floor: Option<f64>,
}

impl From<cert::CertVerdict> for PyVerdict {
    fn from(v: cert::CertVerdict) -> Self {
        PyVerdict {
            k: v.k,
            d: v.d,
            eps: v.eps,
            delta: v.delta,
            l: v.l,
            margin: v.margin,
            no_jld: v.no_jld,
            eta: v.eta,
            gamma1: v.gamma1,
            gamma2: v.gamma2,
            analytic_floor: v.analytic_floor,
        }
    }
}

#[pymethods]
impl PyVerdict {
    fn __repr__(&self) -> String {
        format!("CertVerdict(k={}, d={}, L={}, no_jld={})", self.k, self.d, self.l, self.no_jld)
    }
}

#[pyfunction]
fn certify_no_jld(k: usize, d: usize, eps: f64, delta: f64) -> PyResult<PyVerdict> {
    cert::certify_no_jld(k, d, eps, delta).py().map(Into::into)
}

#[pyfunction]
fn eta_threshold_scan(eta: f64, eps: f64, delta: f64, d: usize) -> PyResult<PyVerdict> {
    cert::eta_threshold_scan(eta, eps, delta, d).py().map(Into::into)
}

#[pyclass(name = "PhasePoint", frozen, get_all)]
struct PyPhasePoint {
    eps: f64,
    delta: f64,
    d: usize,
    baseline: f64,
    k_lo: usize,
    k_hi: usize,
    ratio_lo: f64,
    ratio_hi: f64,
}

impl From<&phase::PhasePoint> for PyPhasePoint {
    fn from(p: &phase::PhasePoint) -> Self {
        PyPhasePoint {
            eps: p.eps,
            delta: p.delta,
            d: p.d,
            baseline: p.baseline,
            k_lo: p.k_lo,
            k_hi: p.k_hi,
            ratio_lo: p.ratio_lo,
            ratio_hi: p.ratio_hi,
        }
    }
}

#[pymethods]
impl PyPhasePoint {
    fn __repr__(&self) -> String {
        format!(
            "PhasePoint(eps={}, delta={}, d={}, k_lo={}, k_hi={})",
            self.eps, self.delta, self.d, self.k_lo, self.k_hi
        )
    }
}

/// Threshold bracket at fixed `d`, or at the default `d` when omitted.
#[pyfunction]
#[pyo3(signature = (eps, delta, d = None))]
fn bracket_k0(eps: f64, delta: f64, d: Option<usize>) -> PyResult<PyPhasePoint> {
    let p = match d {
        Some(d) => phase::bracket_k0(eps, delta, d),
        None => phase::bracket_k0_default_d(eps, delta),
    }
    .py()?;
    Ok((&p).into())
}

/// Runs a sweep, writing its files under `out`; returns the phase points.
#[pyfunction]
#[pyo3(signature = (eps_grid, delta_grid, out, seed = 0, d = "auto", mc_samples = 10_000))]
fn run_sweep(
    py: Python<'_>,
    eps_grid: Vec<f64>,
    delta_grid: Vec<f64>,
    out: std::path::PathBuf,
    seed: u64,
    d: &str,
    mc_samples: u64,
) -> PyResult<Vec<PyPhasePoint>> {
    let mut cfg = phase::SweepConfig::new(eps_grid, delta_grid, seed, out);
    cfg.d = phase::DimensionRule::parse(d).py()?;
    cfg.mc_samples = mc_samples;
    let res = py.detach(|| phase::run_sweep(&cfg)).py()?;
    Ok(res.points.iter().map(Into::into).collect())
}

#[pymodule]
fn jl_phase(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTail>()?;
    m.add_class::<PyBoundReport>()?;
    m.add_class::<PyMatrix>()?;
    m.add_class::<PyVerdict>()?;
    m.add_class::<PyPhasePoint>()?;
    m.add_function(wrap_pyfunction!(tail_probabilities, m)?)?;
    m.add_function(wrap_pyfunction!(cdf, m)?)?;
    m.add_function(wrap_pyfunction!(log_sphere_area, m)?)?;
    m.add_function(wrap_pyfunction!(log_b, m)?)?;
    m.add_function(wrap_pyfunction!(sample_sphere, m)?)?;
    m.add_function(wrap_pyfunction!(split, m)?)?;
    m.add_function(wrap_pyfunction!(bound_report, m)?)?;
    m.add_function(wrap_pyfunction!(default_tail_constant, m)?)?;
    m.add_function(wrap_pyfunction!(achlioptas_k, m)?)?;
    m.add_function(wrap_pyfunction!(kmn_upper_k, m)?)?;
    m.add_function(wrap_pyfunction!(exact_failure_floor, m)?)?;
    m.add_function(wrap_pyfunction!(certify_no_jld, m)?)?;
    m.add_function(wrap_pyfunction!(eta_threshold_scan, m)?)?;
    m.add_function(wrap_pyfunction!(bracket_k0, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    Ok(())
}
