//! Python bindings for `gibbsrec`. Words cross the boundary as lists of
//! 1-based symbols.

use std::sync::Arc;

use gibbsrec::cli::config::{ModelConfig, PotentialEntry};
use gibbsrec::ifs::{tilde_recurrence_sandwich, CertifiedIfs, IfsSpec, MapSpec};
use gibbsrec::recurrence::counterexample::{Count, GFunction};
use gibbsrec::recurrence::experiment::{expected_event_count, run_experiment, Window};
use gibbsrec::recurrence::series::series_eps_for_threshold;
use gibbsrec::recurrence::{self, RateFunction};
use gibbsrec::sampling::{self, SamplePlan};
use gibbsrec::sft::{SftSpec, Word};
use gibbsrec::thermo::{self, GibbsModel as CoreModel};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use serde::Serialize;

create_exception!(pygibbsrec, GibbsrecError, PyException, "Raised with (reason, message).");

fn err(e: gibbsrec::Error) -> PyErr {
    GibbsrecError::new_err((e.reason(), e.to_string()))
}

/// Serialize through JSON into plain Python objects.
fn to_py<'py>(py: Python<'py>, v: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let s = serde_json::to_string(v).map_err(|e| err(e.into()))?;
    py.import("json")?.call_method1("loads", (s,))
}

#[pyclass(frozen, name = "GibbsModel")]
struct PyGibbsModel {
    inner: Arc<CoreModel>,
}

#[pymethods]
impl PyGibbsModel {
    /// I.i.d. model with symbol probabilities `p`.
    #[staticmethod]
    fn bernoulli(p: Vec<f64>) -> PyResult<Self> {
        Self::build(ModelConfig {
            bernoulli: Some(p),
            adjacency: None,
            depth: None,
            potential: Vec::new(),
        })
    }

    /// Gibbs measure of a locally constant potential on the shift with
    /// 0/1 matrix `adjacency`; `potential` maps 1-based words of length
    /// `depth` to values, unlisted words get 0.
    #[staticmethod]
    #[pyo3(signature = (adjacency, potential=Vec::new(), depth=2))]
    fn markov(adjacency: Vec<Vec<u8>>, potential: Vec<(Vec<u32>, f64)>, depth: usize) -> PyResult<Self> {
        Self::build(ModelConfig {
            bernoulli: None,
            adjacency: Some(adjacency),
            depth: Some(depth),
            potential: potential.into_iter().map(|(word, value)| PotentialEntry { word, value }).collect(),
        })
    }

    #[getter]
    fn alphabet_size(&self) -> usize {
        self.inner.k()
    }
    #[getter]
    fn pressure(&self) -> f64 {
        self.inner.pressure
    }
    #[getter]
    fn entropy(&self) -> f64 {
        self.inner.h_mu
    }
    #[getter]
    fn variance(&self) -> f64 {
        self.inner.rho_mu
    }
    #[getter]
    fn gibbs_constant(&self) -> f64 {
        self.inner.gibbs_c
    }
    #[getter]
    fn decay_constants(&self) -> (f64, f64) {
        (self.inner.decay_d, self.inner.gamma)
    }
    #[getter]
    fn stationary(&self) -> Vec<f64> {
        self.inner.pi.clone()
    }
    #[getter]
    fn transition(&self) -> Vec<Vec<f64>> {
        self.inner.transition.rows()
    }
    #[getter]
    fn cohomologous(&self) -> bool {
        self.inner.is_cohomologous()
    }

    fn report<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.report())
    }

    fn cylinder_measure(&self, word: Vec<u32>) -> PyResult<f64> {
        thermo::cylinder_measure(&self.inner, &self.word(&word)?).map_err(err)
    }

    /// `mu([u] cap sigma^-n [v])`.
    fn correlation(&self, u: Vec<u32>, v: Vec<u32>, n: usize) -> PyResult<f64> {
        thermo::correlation(&self.inner, &u, &v, n).map_err(err)
    }

    #[pyo3(signature = (length, seed, trial=0))]
    fn sample(&self, length: usize, seed: u64, trial: u64) -> PyResult<Vec<u32>> {
        Ok(sampling::sample_trial(&self.inner, length, seed, trial).map_err(err)?.to_one_based())
    }

    fn clt_statistic(&self, word: Vec<u32>, n: usize) -> PyResult<f64> {
        sampling::clt_statistic(&self.inner, &self.word(&word)?, n).map_err(err)
    }

    fn lil_statistic(&self, word: Vec<u32>, n: usize) -> PyResult<f64> {
        sampling::lil_statistic(&self.inner, &self.word(&word)?, n).map_err(err)
    }

    /// `(n, required, achieved, status)` for `n` in `[lo, hi]`.
    fn detect_events(&self, word: Vec<u32>, rate: &PyRate, lo: u64, hi: u64) -> PyResult<Vec<(u64, u64, u64, String)>> {
        let events = recurrence::detect_events(&self.word(&word)?, &rate.inner, lo, hi).map_err(err)?;
        Ok(events
            .into_iter()
            .map(|e| {
                let status = serde_json::to_value(e.status).unwrap().as_str().unwrap_or_default().to_owned();
                (e.n, e.required, e.achieved, status)
            })
            .collect())
    }

    #[pyo3(signature = (rate, length, trials, seed, windows, workers=1))]
    fn run_experiment<'py>(
        &self,
        py: Python<'py>,
        rate: &PyRate,
        length: usize,
        trials: usize,
        seed: u64,
        windows: Vec<(u64, u64)>,
        workers: usize,
    ) -> PyResult<Bound<'py, PyAny>> {
        let plan = SamplePlan::new(self.inner.clone(), length, trials, seed).map_err(err)?;
        let windows = windows
            .into_iter()
            .map(|(lo, hi)| Window::new(lo, hi))
            .collect::<gibbsrec::Result<Vec<_>>>()
            .map_err(err)?;
        let summary = py
            .detach(|| run_experiment(&rate.inner, &plan, &windows, workers))
            .map_err(err)?;
        to_py(py, &summary)
    }

    fn expected_event_count(&self, rate: &PyRate, lo: u64, hi: u64, length: u64) -> PyResult<f64> {
        expected_event_count(&self.inner, &rate.inner, lo, hi, length).map_err(err)
    }
}

impl PyGibbsModel {
    fn build(cfg: ModelConfig) -> PyResult<Self> {
        Ok(PyGibbsModel {
            inner: cfg.build().map_err(err)?.model,
        })
    }

    fn word(&self, symbols: &[u32]) -> PyResult<Word> {
        Word::new(self.inner.sft.clone(), symbols).map_err(err)
    }
}

#[pyclass(frozen, name = "RateFunction")]
struct PyRate {
    inner: RateFunction,
}

#[pymethods]
impl PyRate {
    #[staticmethod]
    fn plus(h: f64, rho: f64, eps: f64) -> PyResult<Self> {
        Ok(PyRate {
            inner: RateFunction::plus(h, rho, eps).map_err(err)?,
        })
    }

    #[staticmethod]
    fn minus(h: f64, rho: f64, eps: f64) -> PyResult<Self> {
        Ok(PyRate {
            inner: RateFunction::minus(h, rho, eps).map_err(err)?,
        })
    }

    #[staticmethod]
    fn constant(value: u64) -> Self {
        PyRate {
            inner: RateFunction::constant(value),
        }
    }

    /// `values[n - 1]` is `psi(n)`.
    #[staticmethod]
    fn table(values: Vec<u64>) -> PyResult<Self> {
        Ok(PyRate {
            inner: RateFunction::table(values).map_err(err)?,
        })
    }

    /// The counterexample rate with `g(n) = scale * sqrt(log log n)`.
    #[staticmethod]
    #[pyo3(signature = (h, rho, horizon, scale=1.0))]
    fn constructed(h: f64, rho: f64, horizon: u64, scale: f64) -> PyResult<Self> {
        Ok(PyRate {
            inner: recurrence::counterexample_rate(GFunction::SqrtLogLog { scale }, h, rho, horizon).map_err(err)?,
        })
    }

    fn __call__(&self, n: u64) -> PyResult<u64> {
        self.inner.eval(n).map_err(err)
    }

    fn values(&self, lo: u64, hi: u64) -> PyResult<Vec<u64>> {
        self.inner.values(lo, hi).map_err(err)
    }

    /// Preimage count `#psi^-1(n)` of a constructed rate, as
    /// `(exact integer or None, natural log)`.
    fn preimage_count(&self, n: u64) -> PyResult<(Option<u64>, f64)> {
        let c = self
            .inner
            .constructed_data()
            .ok_or_else(|| err(gibbsrec::Error::Domain("not a constructed rate".into())))?;
        let count = c.count(n).map_err(err)?;
        Ok(match count {
            Count::Exact(a) => (Some(a), count.ln()),
            Count::Log(l) => (None, l),
        })
    }

    /// Partial sums and verdict of the convergence series up to `n`. With
    /// `eps=None` the series uses the value matched to the rate.
    #[pyo3(signature = (h, rho, n, eps=None))]
    fn series<'py>(&self, py: Python<'py>, h: f64, rho: f64, n: u64, eps: Option<f64>) -> PyResult<Bound<'py, PyAny>> {
        let eps = match (eps, self.inner.params()) {
            (Some(e), _) => e,
            (None, Some(p)) if self.inner.kind() == recurrence::RateKind::Plus => series_eps_for_threshold(p.eps),
            (None, Some(p)) => p.eps,
            (None, None) => return Err(err(gibbsrec::Error::Domain("eps is required for this rate".into()))),
        };
        let report = py
            .detach(|| recurrence::convergence_series(&self.inner, h, rho, eps, n))
            .map_err(err)?;
        to_py(py, &report)
    }

    fn __repr__(&self) -> String {
        format!("RateFunction({})", self.inner.describe())
    }
}

#[pyclass(frozen, name = "CertifiedIfs")]
struct PyIfs {
    inner: CertifiedIfs,
}

#[pymethods]
impl PyIfs {
    /// Maps are `(o, t)` pairs: `o` is +-1 in one dimension and a rotation
    /// angle in two.
    #[new]
    #[pyo3(signature = (dimension, r, maps, depth=20))]
    fn new(dimension: usize, r: f64, maps: Vec<(Option<f64>, Vec<f64>)>, depth: u32) -> PyResult<Self> {
        let spec = IfsSpec {
            dimension,
            r,
            maps: maps.into_iter().map(|(o, t)| MapSpec { o, t }).collect(),
        };
        Ok(PyIfs {
            inner: CertifiedIfs::certify(spec, depth).map_err(err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (depth=20))]
    fn middle_thirds(depth: u32) -> PyResult<Self> {
        Ok(PyIfs {
            inner: CertifiedIfs::certify(IfsSpec::middle_thirds(), depth).map_err(err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (depth=12))]
    fn four_corner(depth: u32) -> PyResult<Self> {
        Ok(PyIfs {
            inner: CertifiedIfs::certify(IfsSpec::four_corner(), depth).map_err(err)?,
        })
    }

    #[getter]
    fn n(&self) -> u32 {
        self.inner.n
    }
    #[getter]
    fn separation(&self) -> (f64, f64) {
        (self.inner.separation.sep_lower, self.inner.separation.sep_upper)
    }
    #[getter]
    fn diameter(&self) -> (f64, f64) {
        (self.inner.bounds.diam_lower, self.inner.bounds.diam_upper)
    }

    /// Point coded by the first `n` symbols and its error bound.
    fn project(&self, word: Vec<u32>, n: usize) -> PyResult<(Vec<f64>, f64)> {
        self.inner.project(&self.word(&word)?, n).map_err(err)
    }

    fn sandwich<'py>(&self, py: Python<'py>, word: Vec<u32>, rate: &PyRate, lo: u64, hi: u64) -> PyResult<Bound<'py, PyAny>> {
        let rep = tilde_recurrence_sandwich(&self.word(&word)?, &rate.inner, &self.inner, lo, hi).map_err(err)?;
        to_py(py, &rep)
    }
}

impl PyIfs {
    fn word(&self, symbols: &[u32]) -> PyResult<Word> {
        let sft = SftSpec::full_shift(self.inner.k()).map_err(err)?;
        Word::new(Arc::new(sft), symbols).map_err(err)
    }
}

#[pyfunction]
fn psi_plus(n: u64, h: f64, rho: f64, eps: f64) -> PyResult<u64> {
    recurrence::psi_plus(n, h, rho, eps).map_err(err)
}

#[pyfunction]
fn psi_minus(n: u64, h: f64, rho: f64, eps: f64) -> PyResult<u64> {
    recurrence::psi_minus(n, h, rho, eps).map_err(err)
}

#[pymodule]
fn pygibbsrec(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGibbsModel>()?;
    m.add_class::<PyRate>()?;
    m.add_class::<PyIfs>()?;
    m.add_function(wrap_pyfunction!(psi_plus, m)?)?;
    m.add_function(wrap_pyfunction!(psi_minus, m)?)?;
    m.add("GibbsrecError", m.py().get_type::<GibbsrecError>())?;
    Ok(())
}
