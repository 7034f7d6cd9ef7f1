//! Python bindings for `fiberdim`.
//!
//! Sequences are passed as spec strings (`"const:50"`, `"perturb:base=...;x=0.1"`)
//! or as [`PySequence`] objects; complex numbers map to Python `complex`.
//! Heavy computations run with the interpreter lock released.

use fiberdim::dimension_oracle::{box_dimension, box_dimension_cloud, geometric_ladder, julia_ladder, BoxCountReport};
use fiberdim::experiments::{motion_speed_check, sandwich_report, MotionReport, SandwichRecord};
use fiberdim::orbits::julia_cloud as core_julia_cloud;
use fiberdim::pressure::{self, BowenZero, NWindow, PressureCurve, Which};
use fiberdim::verify::{run_suite, VerifyConfig};
use fiberdim::{Complex64, Error, Sequence, SequenceSpec, SignSchedule};
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidSpec(_)
        | Error::PerturbationTooLarge { .. }
        | Error::Domain(_)
        | Error::DepthLimit { .. }
        | Error::Resolution { .. }
        | Error::Parse(_) => PyValueError::new_err(e.to_string()),
        Error::Io(_) => PyOSError::new_err(e.to_string()),
        Error::BracketFailure { .. } | Error::SandwichViolation { .. } => PyRuntimeError::new_err(e.to_string()),
    }
}

fn one() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

fn window_of(window: (usize, usize)) -> PyResult<NWindow> {
    NWindow::new(window.0, window.1).map_err(to_py)
}

/// A parameter sequence parsed from its spec string.
#[pyclass(name = "Sequence", module = "fiberdim_py", frozen, from_py_object)]
#[derive(Clone)]
pub struct PySequence {
    inner: Sequence,
}

#[pymethods]
impl PySequence {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        spec.parse().map(|inner| PySequence { inner }).map_err(to_py)
    }

    /// The parameter `λ_k`, `k >= 1`.
    fn at(&self, k: u64) -> PyResult<Complex64> {
        self.inner.at(k).map_err(to_py)
    }

    /// `[λ_1, ..., λ_n]`.
    fn take(&self, n: u64) -> PyResult<Vec<Complex64>> {
        (1..=n).map(|k| self.at(k)).collect()
    }

    #[getter]
    fn spec(&self) -> String {
        self.inner.to_string()
    }

    #[getter]
    fn is_perturbed(&self) -> bool {
        matches!(self.inner, Sequence::Perturbed(_))
    }

    fn __repr__(&self) -> String {
        format!("Sequence({:?})", self.inner.to_string())
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }
}

#[derive(FromPyObject)]
enum SeqArg {
    Object(PySequence),
    Spec(String),
}

impl SeqArg {
    fn sequence(self) -> PyResult<Sequence> {
        match self {
            SeqArg::Object(s) => Ok(s.inner),
            SeqArg::Spec(s) => s.parse().map_err(to_py),
        }
    }

    fn base(self) -> PyResult<SequenceSpec> {
        match self.sequence()? {
            Sequence::Plain(spec) => Ok(spec),
            Sequence::Perturbed(_) => Err(PyValueError::new_err("the base of a perturbation must be a plain sequence")),
        }
    }
}

#[pyclass(name = "PressureCurve", module = "fiberdim_py", frozen, get_all)]
pub struct PyPressureCurve {
    t_grid: Vec<f64>,
    n_min: usize,
    n_max: usize,
    /// `values[n - n_min][i] = a_n(t_grid[i])`.
    values: Vec<Vec<f64>>,
    min_log_deriv: Vec<f64>,
    max_log_deriv: Vec<f64>,
    window: (usize, usize),
    lower_estimate: Vec<f64>,
    upper_estimate: Vec<f64>,
}

impl From<PressureCurve> for PyPressureCurve {
    fn from(c: PressureCurve) -> Self {
        PyPressureCurve {
            lower_estimate: c.lower_estimate(),
            upper_estimate: c.upper_estimate(),
            window: (c.window.lo, c.window.hi),
            t_grid: c.t_grid,
            n_min: c.n_min,
            n_max: c.n_max,
            values: c.values,
            min_log_deriv: c.min_log_deriv,
            max_log_deriv: c.max_log_deriv,
        }
    }
}

#[pymethods]
impl PyPressureCurve {
    fn row(&self, n: usize) -> PyResult<Vec<f64>> {
        if !(self.n_min..=self.n_max).contains(&n) {
            return Err(PyValueError::new_err(format!("n = {n} outside [{}, {}]", self.n_min, self.n_max)));
        }
        Ok(self.values[n - self.n_min].clone())
    }
}

#[pyclass(name = "BowenZero", module = "fiberdim_py", frozen, get_all)]
pub struct PyBowenZero {
    t_star: f64,
    which: String,
    window: (usize, usize),
    residual: f64,
    bracket: (f64, f64),
    uncertainty: f64,
    iterations: usize,
}

impl From<BowenZero> for PyBowenZero {
    fn from(z: BowenZero) -> Self {
        PyBowenZero {
            t_star: z.t_star,
            which: z.which.to_string(),
            window: (z.window.lo, z.window.hi),
            residual: z.residual,
            bracket: z.bracket,
            uncertainty: z.uncertainty,
            iterations: z.iterations,
        }
    }
}

#[pymethods]
impl PyBowenZero {
    fn __repr__(&self) -> String {
        format!("BowenZero(which={:?}, t_star={}, uncertainty={:e})", self.which, self.t_star, self.uncertainty)
    }
}

#[pyclass(name = "BoxCount", module = "fiberdim_py", frozen, get_all)]
pub struct PyBoxCount {
    epsilons: Vec<f64>,
    counts: Vec<f64>,
    slope: f64,
    intercept: f64,
    residual: f64,
}

impl From<BoxCountReport> for PyBoxCount {
    fn from(r: BoxCountReport) -> Self {
        PyBoxCount { epsilons: r.epsilons, counts: r.counts, slope: r.slope, intercept: r.intercept, residual: r.residual }
    }
}

#[pyclass(name = "SandwichRecord", module = "fiberdim_py", frozen, get_all)]
pub struct PySandwichRecord {
    n: usize,
    t: f64,
    s_n: i64,
    cesaro: f64,
    a_base: f64,
    a_pert: f64,
    middle: f64,
    residual: f64,
    leaf_residual: f64,
    leaf_word: String,
    holds: bool,
}

impl From<&SandwichRecord> for PySandwichRecord {
    fn from(r: &SandwichRecord) -> Self {
        PySandwichRecord {
            n: r.n,
            t: r.t,
            s_n: r.s_n,
            cesaro: r.cesaro,
            a_base: r.a_base,
            a_pert: r.a_pert,
            middle: r.middle,
            residual: r.residual,
            leaf_residual: r.leaf_residual,
            leaf_word: r.leaf_word.to_string(),
            holds: r.holds(),
        }
    }
}

#[pyclass(name = "MotionReport", module = "fiberdim_py", frozen, get_all)]
pub struct PyMotionReport {
    x: f64,
    delta: f64,
    depth: usize,
    max_displacement: f64,
    displacement_bound: f64,
    max_log_ratio: f64,
    log_ratio_bound: f64,
    passed: bool,
}

impl From<MotionReport> for PyMotionReport {
    fn from(m: MotionReport) -> Self {
        PyMotionReport {
            x: m.x,
            delta: m.delta,
            depth: m.depth,
            max_displacement: m.max_displacement,
            displacement_bound: m.displacement_bound(),
            max_log_ratio: m.max_log_ratio,
            log_ratio_bound: m.log_ratio_bound(),
            passed: m.passed(),
        }
    }
}

/// Depth-`depth` Julia-set points over fiber 0 and their resolution bound.
#[pyfunction]
#[pyo3(signature = (seq, depth, anchor = one()))]
fn julia_cloud(py: Python<'_>, seq: SeqArg, depth: usize, anchor: Complex64) -> PyResult<(Vec<Complex64>, f64)> {
    let seq = seq.sequence()?;
    let cloud = py.detach(|| core_julia_cloud(&seq, depth, anchor)).map_err(to_py)?;
    Ok((cloud.points, cloud.resolution))
}

/// Finite-n pressures `a_n(t)` for `n_min <= n <= n_max` over fiber `j`.
#[pyfunction]
#[pyo3(signature = (seq, t_grid, n_min, n_max, j = 0, window = None, anchor = one()))]
#[allow(clippy::too_many_arguments)]
fn pressure_curve(
    py: Python<'_>,
    seq: SeqArg,
    t_grid: Vec<f64>,
    n_min: usize,
    n_max: usize,
    j: usize,
    window: Option<(usize, usize)>,
    anchor: Complex64,
) -> PyResult<PyPressureCurve> {
    let seq = seq.sequence()?;
    let window = window.map(window_of).transpose()?;
    let id = seq.to_string();
    py.detach(|| {
        pressure::pressure_curve_with(&seq, &id, j, &t_grid, n_min, n_max, anchor, window, fiberdim::orbits::Metric::Planar)
    })
    .map(PyPressureCurve::from)
    .map_err(to_py)
}

/// Zero of the windowed lower or upper pressure estimate.
#[pyfunction]
#[pyo3(signature = (seq, which, window, tol = 1e-6, anchor = one()))]
fn bowen_zero(
    py: Python<'_>,
    seq: SeqArg,
    which: &str,
    window: (usize, usize),
    tol: f64,
    anchor: Complex64,
) -> PyResult<PyBowenZero> {
    let seq = seq.sequence()?;
    let which: Which = which.parse().map_err(to_py)?;
    let window = window_of(window)?;
    py.detach(|| pressure::bowen_zero(&seq, which, window, tol, anchor)).map(PyBowenZero::from).map_err(to_py)
}

/// `(lower, upper)` dimension estimates over one window.
#[pyfunction]
#[pyo3(signature = (seq, window, tol = 1e-6, anchor = one()))]
fn dimension_pair(
    py: Python<'_>,
    seq: SeqArg,
    window: (usize, usize),
    tol: f64,
    anchor: Complex64,
) -> PyResult<(PyBowenZero, PyBowenZero)> {
    let seq = seq.sequence()?;
    let window = window_of(window)?;
    let pair = py.detach(|| pressure::dimension_pair(&seq, window, tol, anchor)).map_err(to_py)?;
    Ok((pair.lower.into(), pair.upper.into()))
}

/// Box-counting slope of a point set over a geometric ladder of `count` scales.
#[pyfunction]
#[pyo3(signature = (points, eps_max, eps_min, count, resolution = 0.0))]
fn box_count(
    py: Python<'_>,
    points: Vec<Complex64>,
    eps_max: f64,
    eps_min: f64,
    count: usize,
    resolution: f64,
) -> PyResult<PyBoxCount> {
    let ladder = geometric_ladder(eps_max, eps_min, count).map_err(to_py)?;
    py.detach(|| box_dimension(&points, &ladder, resolution)).map(PyBoxCount::from).map_err(to_py)
}

/// Box-counting slope of the depth-`depth` Julia cloud on the default ladder.
#[pyfunction]
#[pyo3(signature = (seq, depth, anchor = one()))]
fn box_count_julia(py: Python<'_>, seq: SeqArg, depth: usize, anchor: Complex64) -> PyResult<PyBoxCount> {
    let seq = seq.sequence()?;
    py.detach(|| {
        let cloud = core_julia_cloud(&seq, depth, anchor)?;
        box_dimension_cloud(&cloud, &julia_ladder(&cloud)?)
    })
    .map(PyBoxCount::from)
    .map_err(to_py)
}

/// Sandwich records for every `n` in `[n_min, n_max]` and every `t`.
#[pyfunction]
#[pyo3(signature = (base, x, t_grid, n_min, n_max, blocks = "2x2", anchor = one()))]
#[allow(clippy::too_many_arguments)]
fn sandwich(
    py: Python<'_>,
    base: SeqArg,
    x: f64,
    t_grid: Vec<f64>,
    n_min: usize,
    n_max: usize,
    blocks: &str,
    anchor: Complex64,
) -> PyResult<Vec<PySandwichRecord>> {
    let base = base.base()?;
    let schedule: SignSchedule = blocks.parse().map_err(to_py)?;
    let report =
        py.detach(|| sandwich_report(&base, schedule, x, &t_grid, n_min, n_max, anchor)).map_err(to_py)?;
    Ok(report.records.iter().map(PySandwichRecord::from).collect())
}

/// Leaf displacement and modulus-ratio bounds under a perturbation of size `x`.
#[pyfunction]
#[pyo3(signature = (base, x, depth, blocks = "2x2", anchor = one()))]
fn motion(
    py: Python<'_>,
    base: SeqArg,
    x: f64,
    depth: usize,
    blocks: &str,
    anchor: Complex64,
) -> PyResult<PyMotionReport> {
    let base = base.base()?;
    let schedule: SignSchedule = blocks.parse().map_err(to_py)?;
    py.detach(|| motion_speed_check(&base, schedule, x, depth, anchor)).map(PyMotionReport::from).map_err(to_py)
}

/// The bundled invariant suite as `(module, name, passed, detail)` tuples.
#[pyfunction]
#[pyo3(signature = (seq, depth = 18))]
fn verify(py: Python<'_>, seq: SeqArg, depth: usize) -> PyResult<Vec<(String, String, bool, String)>> {
    let cfg = VerifyConfig::new(seq.sequence()?, depth);
    let checks = py.detach(|| run_suite(&cfg)).map_err(to_py)?;
    Ok(checks.into_iter().map(|c| (c.module.to_string(), c.name.to_string(), c.passed, c.detail)).collect())
}

#[pymodule]
pub fn fiberdim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySequence>()?;
    m.add_class::<PyPressureCurve>()?;
    m.add_class::<PyBowenZero>()?;
    m.add_class::<PyBoxCount>()?;
    m.add_class::<PySandwichRecord>()?;
    m.add_class::<PyMotionReport>()?;
    m.add_function(wrap_pyfunction!(julia_cloud, m)?)?;
    m.add_function(wrap_pyfunction!(pressure_curve, m)?)?;
    m.add_function(wrap_pyfunction!(bowen_zero, m)?)?;
    m.add_function(wrap_pyfunction!(dimension_pair, m)?)?;
    m.add_function(wrap_pyfunction!(box_count, m)?)?;
    m.add_function(wrap_pyfunction!(box_count_julia, m)?)?;
    m.add_function(wrap_pyfunction!(sandwich, m)?)?;
    m.add_function(wrap_pyfunction!(motion, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
