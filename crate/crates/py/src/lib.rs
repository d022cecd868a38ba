//! Python bindings for the `istbc` crate.

use ::istbc as core;
use core::metrics::min_trace_search;
use core::{
    Axis, Constellation, DecoderKind, DesignId, DetectionProblem, EncoderKind, Error, LinearDesign, SimConfig,
};
use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(istbc, BudgetExceeded, PyException, "A run would exceed its resource budget.");

fn py_err(e: Error) -> PyErr {
    if e.is_budget() {
        BudgetExceeded::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().py()
}

fn rows(m: &core::CMatrix) -> Vec<Vec<Complex64>> {
    m.rows()
}

fn square(n: usize, rows: Vec<Vec<Complex64>>, what: &str) -> PyResult<core::CMatrix> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err(format!("{what} must be {n}x{n}")));
    }
    Ok(core::CMatrix::from_rows(n, rows.into_iter().flatten().collect()))
}

/// A space-time code over a square QAM constellation.
#[pyclass(name = "Code", module = "istbc", frozen)]
struct PyCode {
    id: DesignId,
    design: LinearDesign,
    constellation: Constellation,
    scale: f64,
}

#[pymethods]
impl PyCode {
    /// `code` is "ic", "alamouti" or "golden"; `m` is bits per QAM symbol.
    #[new]
    #[pyo3(signature = (code = "ic", n = 2, m = 2))]
    fn new(code: &str, n: usize, m: u32) -> PyResult<Self> {
        let id: DesignId = parse(code)?;
        let design = id.build(n, m).py()?;
        let constellation = core::make_qam(m).py()?;
        let scale = core::normalize(&design, &constellation).py()?;
        Ok(PyCode {
            id,
            design,
            constellation,
            scale,
        })
    }

    #[getter]
    fn code(&self) -> String {
        self.id.to_string()
    }

    #[getter]
    fn n(&self) -> usize {
        self.design.n()
    }

    #[getter]
    fn m(&self) -> u32 {
        self.constellation.m()
    }

    #[getter]
    fn name(&self) -> &str {
        self.design.name()
    }

    #[getter]
    fn num_symbols(&self) -> usize {
        self.design.num_symbols()
    }

    #[getter]
    fn real_dimensions(&self) -> usize {
        self.design.k_real()
    }

    #[getter]
    fn exact_integer(&self) -> bool {
        self.design.exact_integer()
    }

    /// Scale giving unit transmit power per channel use.
    #[getter]
    fn norm_scale(&self) -> f64 {
        self.scale
    }

    /// Constellation points indexed by Gray label.
    #[getter]
    fn constellation(&self) -> Vec<Complex64> {
        self.constellation.complex_points()
    }

    #[getter]
    fn basis(&self) -> Vec<Vec<Vec<Complex64>>> {
        self.design.basis().iter().map(rows).collect()
    }

    /// Unnormalized codeword for a list of constellation symbols.
    fn encode(&self, symbols: Vec<Complex64>) -> PyResult<Vec<Vec<Complex64>>> {
        Ok(rows(&core::encode(&self.design, &self.constellation, &symbols).py()?.entries))
    }

    /// Codeword from the q-bit fixed-point encoder.
    fn quantized_encode(&self, symbols: Vec<Complex64>, q: u32) -> PyResult<Vec<Vec<Complex64>>> {
        Ok(rows(
            &core::quantized_encode(&self.design, &self.constellation, &symbols, q)
                .py()?
                .entries,
        ))
    }

    /// PAPR of the transmitted entries as a dict with `ratio`, `db` and `method`.
    fn papr<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let p = core::code_papr(&self.design, &self.constellation).py()?;
        let d = PyDict::new(py);
        d.set_item("ratio", p.ratio)?;
        d.set_item("db", p.db)?;
        d.set_item(
            "method",
            match p.method {
                core::metrics::PaprMethod::QamIdentity => "qam_identity",
                core::metrics::PaprMethod::Enumerated => "enumerated",
            },
        )?;
        Ok(d)
    }

    /// Difference-matrix statistics; pass `sampled` to draw that many pairs instead
    /// of enumerating.
    #[pyo3(signature = (allow_long = false, sampled = None, seed = 0))]
    fn difference_spectrum<'py>(
        &self,
        py: Python<'py>,
        allow_long: bool,
        sampled: Option<u64>,
        seed: u64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let mode = match sampled {
            Some(budget) => core::SpectrumMode::Sampled { budget, seed },
            None => core::SpectrumMode::Exhaustive { allow_long },
        };
        let s = py
            .detach(|| core::difference_spectrum(&self.design, &self.constellation, mode))
            .py()?;
        let d = PyDict::new(py);
        d.set_item("distinct_count", s.distinct_count)?;
        d.set_item("zero_det_count", s.zero_det_count)?;
        d.set_item("zero_det_percent", s.zero_det_percent)?;
        d.set_item("min_trace", s.min_trace)?;
        d.set_item("min_det_sq", s.min_det_sq)?;
        d.set_item("norm_scale", s.norm_scale)?;
        d.set_item("exhaustive", s.exhaustive)?;
        Ok(d)
    }

    /// Normalized minimum trace (integer code only).
    #[pyo3(signature = (node_budget = core::metrics::DEFAULT_TRACE_NODE_BUDGET))]
    fn min_trace(&self, py: Python<'_>, node_budget: u64) -> PyResult<f64> {
        let t = py
            .detach(|| min_trace_search(&self.design, &self.constellation, node_budget))
            .py()?;
        Ok(t.normalized)
    }

    /// ML detection of the symbols from a received matrix `y = √(1/n)·H·(c·X) + Z`.
    ///
    /// Returns the detected symbols and the squared residual.
    #[pyo3(signature = (h, y, method = "sphere"))]
    fn detect(
        &self,
        h: Vec<Vec<Complex64>>,
        y: Vec<Vec<Complex64>>,
        method: &str,
    ) -> PyResult<(Vec<Complex64>, f64)> {
        let n = self.design.n();
        let h = square(n, h, "h")?;
        let y = square(n, y, "y")?;
        let p = DetectionProblem::for_design(&self.design, &self.constellation, self.scale, &h, &y).py()?;
        let det = match parse::<DecoderKind>(method)? {
            DecoderKind::Sphere => core::sphere_decode(&p, None),
            DecoderKind::Exhaustive => core::ml_decode_exhaustive(&p),
        }
        .py()?;
        let symbols = det
            .coords
            .chunks(2)
            .map(|c| Complex64::new((c[0] / self.scale).round(), (c[1] / self.scale).round()))
            .collect();
        Ok((symbols, det.metric))
    }

    fn __repr__(&self) -> String {
        format!(
            "Code(code={:?}, n={}, m={})",
            self.id.to_string(),
            self.design.n(),
            self.constellation.m()
        )
    }
}

/// One CER curve.
#[pyclass(name = "SimResult", module = "istbc", frozen)]
struct PySimResult {
    inner: core::SimResult,
}

#[pymethods]
impl PySimResult {
    #[getter]
    fn eta(&self) -> f64 {
        self.inner.eta
    }

    #[getter]
    fn eta_db(&self) -> f64 {
        self.inner.eta_db
    }

    #[getter]
    fn encoder(&self) -> String {
        self.inner.config.encoder.to_string()
    }

    /// One dict per grid point.
    #[getter]
    fn points<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.inner
            .points
            .iter()
            .map(|p| {
                let d = PyDict::new(py);
                d.set_item("snr_db", p.snr_db)?;
                d.set_item("axis", p.axis.to_string())?;
                d.set_item("trials", p.trials)?;
                d.set_item("errors", p.errors)?;
                d.set_item("cer", p.cer)?;
                d.set_item("ci_low", p.ci_low)?;
                d.set_item("ci_high", p.ci_high)?;
                d.set_item("noise_sigma2", p.noise_sigma2)?;
                Ok(d)
            })
            .collect()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    fn __len__(&self) -> usize {
        self.inner.points.len()
    }
}

/// Monte Carlo CER over `snr_db`. `encoder` is "exact" or "q=<bits>".
#[pyfunction]
#[pyo3(signature = (
    snr_db, code = "ic", n = 2, m = 2, axis = "snr", decoder = "sphere", encoder = "exact",
    seed = 0, max_trials = 1_000_000, target_errors = 100, confidence = 0.95, workers = None
))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    py: Python<'_>,
    snr_db: Vec<f64>,
    code: &str,
    n: usize,
    m: u32,
    axis: &str,
    decoder: &str,
    encoder: &str,
    seed: u64,
    max_trials: u64,
    target_errors: u64,
    confidence: f64,
    workers: Option<usize>,
) -> PyResult<PySimResult> {
    let mut cfg = SimConfig::new(parse(code)?, n, m, snr_db);
    cfg.axis = parse::<Axis>(axis)?;
    cfg.decoder = parse(decoder)?;
    cfg.encoder = parse::<EncoderKind>(encoder)?;
    cfg.seed = seed;
    cfg.max_trials = max_trials;
    cfg.target_errors = target_errors;
    cfg.confidence = confidence;
    let inner = py
        .detach(|| match workers {
            Some(w) => core::run_cer_with_workers(&cfg, w),
            None => core::run_cer(&cfg),
        })
        .py()?;
    Ok(PySimResult { inner })
}

/// Minimum encoder bit width for exact integer-code encoding.
#[pyfunction]
fn min_bits_integer_code(n: usize, m: u32) -> PyResult<u32> {
    core::min_bits_integer_code(n, m).py()
}

/// Rounds `y` in `[-1, 1)` to the q-bit grid.
#[pyfunction]
fn quantize(y: f64, q: u32) -> PyResult<f64> {
    core::quantize(y, q).py()
}

/// `3(√K - 1)/(√K + 1)` for square K-QAM.
#[pyfunction]
fn papr_qam_closed_form(k: u64) -> PyResult<f64> {
    core::papr_qam_closed_form(k).py()
}

#[pymodule]
#[pyo3(name = "istbc")]
fn istbc_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCode>()?;
    m.add_class::<PySimResult>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(min_bits_integer_code, m)?)?;
    m.add_function(wrap_pyfunction!(quantize, m)?)?;
    m.add_function(wrap_pyfunction!(papr_qam_closed_form, m)?)?;
    m.add("BudgetExceeded", m.py().get_type::<BudgetExceeded>())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
