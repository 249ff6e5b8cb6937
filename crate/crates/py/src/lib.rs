//! Python module `twirlpy`.
//!
//! Matrices cross the boundary as nested lists of Python `complex`
//! (row-major). Errors from the core library raise `twirlpy.TwirlError`,
//! a subclass of `ValueError`.

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use twirl_core::experiments::{
    fit_decay_rate, preset, run_convergence, ErrorCurve, ExperimentConfig, Figure, InitialState, Metric, Mode,
    Scheme,
};
use twirl_core::integrate::{averaged_moment_operator, trace_integral, IntegrationGroup, DEFAULT_ITERS};
use twirl_core::superop::{self, exact_twirl_superop, recursive_twirl_superop};
use twirl_core::twirl::{self, build_isotropic_basis, build_permutation_basis};
use twirl_core::{
    ComplexMatrix, DensityMatrix, PermutationBasis, QuditRegister, RngHandle, TwirlPlan, UnitarySource, Variant,
    C64,
};

create_exception!(twirlpy, TwirlError, PyValueError);

type Rows = Vec<Vec<C64>>;

fn err(e: twirl_core::TwirlError) -> PyErr {
    TwirlError::new_err(e.to_string())
}

fn to_matrix(rows: Rows) -> PyResult<ComplexMatrix> {
    ComplexMatrix::from_rows(&rows).map_err(err)
}

fn to_rows(m: &ComplexMatrix) -> Rows {
    (0..m.rows()).map(|i| (0..m.cols()).map(|j| m[(i, j)]).collect()).collect()
}

fn to_state(rows: Rows) -> PyResult<DensityMatrix> {
    DensityMatrix::new(to_matrix(rows)?).map_err(err)
}

fn variant(name: &str) -> PyResult<Variant> {
    match name {
        "werner" => Ok(Variant::Werner),
        "isotropic" => Ok(Variant::Isotropic),
        other => Err(PyValueError::new_err(format!("unknown variant '{other}' (werner, isotropic)"))),
    }
}

fn basis(reg: QuditRegister, v: Variant) -> PyResult<PermutationBasis> {
    match v {
        Variant::Werner => build_permutation_basis(reg),
        Variant::Isotropic => build_isotropic_basis(reg),
    }
    .map_err(err)
}

fn register(n: usize, d: usize) -> PyResult<QuditRegister> {
    QuditRegister::new(n, d).map_err(err)
}

fn source(spec: &str, d: usize) -> PyResult<UnitarySource> {
    UnitarySource::parse(spec, d).map_err(err)
}

/// `n` qudits of local dimension `d`.
#[pyclass(name = "QuditRegister", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyRegister {
    #[pyo3(get)]
    n: usize,
    #[pyo3(get)]
    d: usize,
}

#[pymethods]
impl PyRegister {
    #[new]
    fn new(n: usize, d: usize) -> PyResult<Self> {
        register(n, d)?;
        Ok(PyRegister { n, d })
    }

    /// Hilbert-space dimension `d^n`.
    fn dim(&self) -> usize {
        self.d.pow(self.n as u32)
    }

    fn __repr__(&self) -> String {
        format!("QuditRegister(n={}, d={})", self.n, self.d)
    }
}

/// Superoperator in the column-stacking convention.
#[pyclass(name = "Superoperator", frozen)]
struct PySuperop {
    inner: twirl_core::Superoperator,
}

#[pymethods]
impl PySuperop {
    /// Exact twirl `S_P` for the register.
    #[staticmethod]
    #[pyo3(signature = (n, d, variant = "werner"))]
    fn exact(n: usize, d: usize, variant: &str) -> PyResult<Self> {
        let reg = register(n, d)?;
        let inner = exact_twirl_superop(reg, &basis(reg, self::variant(variant)?)?).map_err(err)?;
        Ok(PySuperop { inner })
    }

    /// One realization of the recursive twirl superoperator.
    #[staticmethod]
    #[pyo3(signature = (n, d, iterations, k = 2, source = "haar", seed = 0, variant = "werner"))]
    fn recursive(
        n: usize,
        d: usize,
        iterations: usize,
        k: usize,
        source: &str,
        seed: u64,
        variant: &str,
    ) -> PyResult<Self> {
        let reg = register(n, d)?;
        let plan = TwirlPlan::new(reg, k, iterations, self::source(source, d)?, self::variant(variant)?).map_err(err)?;
        let inner = recursive_twirl_superop(&plan, &mut RngHandle::new(seed, 0)).map_err(err)?;
        Ok(PySuperop { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PySuperop { inner: twirl_core::Superoperator::from_json(text).map_err(err)? })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn matrix(&self) -> Rows {
        to_rows(self.inner.matrix())
    }

    /// Squared HS distance to `other`.
    fn error(&self, other: &PySuperop) -> PyResult<f64> {
        superop::superop_error(&self.inner, &other.inner).map_err(err)
    }

    fn apply(&self, rho: Rows) -> PyResult<Rows> {
        Ok(to_rows(&self.inner.apply_matrix(&to_matrix(rho)?).map_err(err)?))
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n_qudits()
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.local_dim()
    }

    fn __repr__(&self) -> String {
        format!("Superoperator(n={}, d={})", self.inner.n_qudits(), self.inner.local_dim())
    }
}

/// Exact twirl of `rho` onto the invariant family.
#[pyfunction]
#[pyo3(signature = (rho, n, d, variant = "werner"))]
fn exact_twirl(rho: Rows, n: usize, d: usize, variant: &str) -> PyResult<Rows> {
    let reg = register(n, d)?;
    let out = twirl::exact_twirl(&to_state(rho)?, &basis(reg, self::variant(variant)?)?).map_err(err)?;
    Ok(to_rows(out.matrix()))
}

/// Recursive twirl `Q_{K,M}` applied to `rho`.
#[pyfunction]
#[pyo3(signature = (rho, n, d, iterations, k = 2, source = "haar", seed = 0, variant = "werner"))]
#[allow(clippy::too_many_arguments)]
fn recursive_twirl(
    rho: Rows,
    n: usize,
    d: usize,
    iterations: usize,
    k: usize,
    source: &str,
    seed: u64,
    variant: &str,
) -> PyResult<Rows> {
    let reg = register(n, d)?;
    let plan = TwirlPlan::new(reg, k, iterations, self::source(source, d)?, self::variant(variant)?).map_err(err)?;
    let out = twirl::recursive_twirl(&to_state(rho)?, &plan, &mut RngHandle::new(seed, 0)).map_err(err)?;
    Ok(to_rows(out.matrix()))
}

/// Plain average over `m` terms (identity plus `m − 1` random conjugations).
#[pyfunction]
#[pyo3(signature = (rho, n, d, m, source = "haar", seed = 0))]
fn average_twirl(rho: Rows, n: usize, d: usize, m: usize, source: &str, seed: u64) -> PyResult<Rows> {
    let reg = register(n, d)?;
    let src = self::source(source, d)?;
    let out = twirl::average_twirl(&to_state(rho)?, m, &src, reg, &mut RngHandle::new(seed, 0)).map_err(err)?;
    Ok(to_rows(out.matrix()))
}

/// `½(ρ + U^⊗n ρ U^⊗n†)`.
#[pyfunction]
fn twirl_step(rho: Rows, u: Rows, n: usize, d: usize) -> PyResult<Rows> {
    let out = twirl::twirl_step(&to_state(rho)?, &to_matrix(u)?, register(n, d)?).map_err(err)?;
    Ok(to_rows(out.matrix()))
}

#[pyfunction]
#[pyo3(signature = (d, seed, stream = 0))]
fn haar_unitary(d: usize, seed: u64, stream: u64) -> PyResult<Rows> {
    let u = twirl_core::random::haar_unitary(d, &mut RngHandle::new(seed, stream)).map_err(err)?;
    Ok(to_rows(&u))
}

/// Hilbert–Schmidt random density matrix.
#[pyfunction]
#[pyo3(signature = (dim, seed, stream = 0))]
fn random_state(dim: usize, seed: u64, stream: u64) -> PyResult<Rows> {
    let rho = twirl_core::random::hs_random_density(dim, &mut RngHandle::new(seed, stream)).map_err(err)?;
    Ok(to_rows(rho.matrix()))
}

/// `d^{2n} − N_R`, the squared distance of the identity superoperator from `S_P`.
#[pyfunction]
#[pyo3(signature = (n, d, variant = "werner"))]
fn superop_gap(n: usize, d: usize, variant: &str) -> PyResult<f64> {
    Ok(superop::superop_gap(&basis(register(n, d)?, self::variant(variant)?)?))
}

/// Moment operator `∫ U^⊗m ⊗ (U†)^⊗n dU` as a `d^{m+n}` square matrix.
#[pyfunction]
#[pyo3(signature = (m, n, d, iters = DEFAULT_ITERS, source = "haar", seed = 0, runs = 1))]
fn moment_operator(m: usize, n: usize, d: usize, iters: usize, source: &str, seed: u64, runs: usize) -> PyResult<Rows> {
    let src = self::source(source, d)?;
    let mop = averaged_moment_operator(m, n, d, iters, &src, IntegrationGroup::Unitary, seed, runs).map_err(err)?;
    Ok(to_rows(&mop.matrix))
}

/// `∫ Π Tr(U A_i) Π Tr(U† B_j) dU`.
#[pyfunction]
#[pyo3(signature = (a, b, iters = DEFAULT_ITERS, seed = 0, runs = 1))]
fn integrate(a: Vec<Rows>, b: Vec<Rows>, iters: usize, seed: u64, runs: usize) -> PyResult<C64> {
    let a = a.into_iter().map(to_matrix).collect::<PyResult<Vec<_>>>()?;
    let b = b.into_iter().map(to_matrix).collect::<PyResult<Vec<_>>>()?;
    let d = match a.first().or(b.first()) {
        Some(x) => x.rows(),
        None => return Ok(C64::new(1.0, 0.0)),
    };
    let mop = averaged_moment_operator(
        a.len(),
        b.len(),
        d,
        iters,
        &UnitarySource::Haar,
        IntegrationGroup::Unitary,
        seed,
        runs,
    )
    .map_err(err)?;
    trace_integral(&a, &b, &mop).map_err(err)
}

type CurveRow = (usize, f64, f64, Option<f64>);

fn curve_rows(curve: &ErrorCurve) -> Vec<CurveRow> {
    curve.records.iter().map(|r| (r.iteration, r.mean, r.std_error, r.theory)).collect()
}

/// Convergence curve as `(iteration, mean, std_error, theory)` tuples.
#[pyfunction]
#[pyo3(signature = (
    n, d, iterations, trajectories, seed,
    mode = "state", scheme = "recursive", k = 2, source = "haar", variant = "werner",
    metric = "raw", initial = None,
))]
#[allow(clippy::too_many_arguments)]
fn convergence(
    n: usize,
    d: usize,
    iterations: usize,
    trajectories: usize,
    seed: u64,
    mode: &str,
    scheme: &str,
    k: usize,
    source: &str,
    variant: &str,
    metric: &str,
    initial: Option<Rows>,
) -> PyResult<Vec<CurveRow>> {
    let reg = register(n, d)?;
    let mode = match mode {
        "state" => Mode::State,
        "superoperator" => Mode::Superoperator,
        other => return Err(PyValueError::new_err(format!("unknown mode '{other}'"))),
    };
    let scheme = match scheme {
        "recursive" => Scheme::Recursive,
        "averaging" => Scheme::Averaging,
        "conjugation" => Scheme::Conjugation,
        other => return Err(PyValueError::new_err(format!("unknown scheme '{other}'"))),
    };
    let metric = match metric {
        "raw" => Metric::Raw,
        "normalized" => Metric::Normalized,
        other => return Err(PyValueError::new_err(format!("unknown metric '{other}'"))),
    };
    let cfg = ExperimentConfig {
        scheme,
        k,
        source: self::source(source, d)?,
        variant: self::variant(variant)?,
        metric,
        initial: match initial {
            Some(rows) => InitialState::Given(to_state(rows)?),
            None => InitialState::HsRandom,
        },
        ..ExperimentConfig::new(reg, mode, iterations, trajectories, seed)
    };
    Ok(curve_rows(&run_convergence(&cfg).map_err(err)?))
}

/// Least-squares decay rate (bits per iteration) of `log2(mean)` over
/// iterations `lo..=hi` of a curve returned by [`convergence`].
#[pyfunction]
fn decay_rate(curve: Vec<CurveRow>, lo: usize, hi: usize) -> PyResult<(f64, f64)> {
    let curve = ErrorCurve {
        records: curve
            .into_iter()
            .map(|(iteration, mean, std_error, theory)| twirl_core::experiments::ErrorRecord {
                iteration,
                mean,
                std_error,
                theory,
            })
            .collect(),
        gap: f64::NAN,
        metadata: Default::default(),
    };
    let fit = fit_decay_rate(&curve, lo..=hi).map_err(err)?;
    Ok((fit.rate_bits, fit.goodness))
}

/// Runs a figure preset (`fig2`, `fig3a`, ...), optionally with fewer trajectories.
#[pyfunction]
#[pyo3(name = "bench", signature = (figure, seed = 42, trajectories = None))]
fn run_bench(figure: &str, seed: u64, trajectories: Option<usize>) -> PyResult<Vec<CurveRow>> {
    let mut cfg = preset(Figure::parse(figure).map_err(err)?, seed).map_err(err)?;
    if let Some(t) = trajectories {
        cfg.trajectories = t;
    }
    Ok(curve_rows(&run_convergence(&cfg).map_err(err)?))
}

#[pymodule]
fn twirlpy(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("TwirlError", m.py().get_type::<TwirlError>())?;
    m.add_class::<PyRegister>()?;
    m.add_class::<PySuperop>()?;
    m.add_function(wrap_pyfunction!(exact_twirl, m)?)?;
    m.add_function(wrap_pyfunction!(recursive_twirl, m)?)?;
    m.add_function(wrap_pyfunction!(average_twirl, m)?)?;
    m.add_function(wrap_pyfunction!(twirl_step, m)?)?;
    m.add_function(wrap_pyfunction!(haar_unitary, m)?)?;
    m.add_function(wrap_pyfunction!(random_state, m)?)?;
    m.add_function(wrap_pyfunction!(superop_gap, m)?)?;
    m.add_function(wrap_pyfunction!(moment_operator, m)?)?;
    m.add_function(wrap_pyfunction!(integrate, m)?)?;
    m.add_function(wrap_pyfunction!(convergence, m)?)?;
    m.add_function(wrap_pyfunction!(decay_rate, m)?)?;
    m.add_function(wrap_pyfunction!(run_bench, m)?)?;
    Ok(())
}
