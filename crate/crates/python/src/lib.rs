//! Python bindings: security formulas, the wiretap code chain, loss sweeps
//! and full protocol sessions. Bit vectors come back as `bytes` holding one
//! 0/1 value per byte; any sequence of ints is accepted as input.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

use qsdc_core::attack::AttackModel;
use qsdc_core::coding::{
    bp_decode, build_code, compute_llrs, ldpc_encode, random_bit_rate, spread, uhf_invert, uhf_map, ChipFrame,
    CodeDescription, CodeParams, WiretapCode,
};
use qsdc_core::experiments::{run_capacity_sweep, SweepSpec};
use qsdc_core::protocol::{run_session, ProtocolConfig, SessionOutcome};
use qsdc_core::security::{self, AttackOverlaps, ErrorRates, RateParams, SecurityEstimate};
use qsdc_core::Error;

fn to_py(e: Error) -> PyErr {
    if e.is_io() {
        PyIOError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn rates(e: f64, e_x: f64, e_z: f64) -> PyResult<ErrorRates> {
    ErrorRates::new(e, e_x, e_z).map_err(to_py)
}

fn estimate_dict<'py>(py: Python<'py>, est: &SecurityEstimate) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("i_ab", est.i_ab)?;
    d.set_item("i_ae", est.i_ae)?;
    d.set_item("c_s", est.c_s)?;
    d.set_item("p_star", est.p_star)?;
    d.set_item("closed_form", est.closed_form)?;
    Ok(d)
}

#[pyfunction]
fn binary_entropy(x: f64) -> PyResult<f64> {
    security::binary_entropy(x).map_err(to_py)
}

#[pyfunction]
fn xi(p: f64, e_x: f64, e_z: f64) -> PyResult<f64> {
    security::xi(p, e_x, e_z).map_err(to_py)
}

#[pyfunction]
fn eve_information(q_eve: f64, p: f64, e: f64, e_x: f64, e_z: f64) -> PyResult<f64> {
    security::eve_information(q_eve, p, &rates(e, e_x, e_z)?).map_err(to_py)
}

#[pyfunction]
fn main_information(q_bob: f64, p: f64, e: f64) -> PyResult<f64> {
    security::main_information(q_bob, p, e).map_err(to_py)
}

/// Maximum of I(A:B) − I(A:E) over p, with the p = 1/2 closed form.
#[pyfunction]
fn secrecy_capacity<'py>(
    py: Python<'py>,
    q_bob: f64,
    g: f64,
    e: f64,
    e_x: f64,
    e_z: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let rp = RateParams::new(q_bob, g).map_err(to_py)?;
    let est = security::secrecy_capacity(&rp, &rates(e, e_x, e_z)?).map_err(to_py)?;
    estimate_dict(py, &est)
}

#[pyfunction]
fn gram_eigenvalues(p: f64, alpha: f64, beta: f64, delta: f64) -> PyResult<[f64; 4]> {
    if !(0.0..=1.0).contains(&p) {
        return Err(PyValueError::new_err(format!("p must lie in [0, 1], got {p}")));
    }
    Ok(security::gram_eigenvalues(p, &AttackOverlaps::new(alpha, beta, delta)))
}

/// (loss_db, q_bob, i_ab, i_ae, c_s)
type SweepTuple = (f64, f64, f64, f64, f64);

/// Rows of (loss_db, q_bob, i_ab, i_ae, c_s) at p = 1/2.
#[pyfunction]
#[pyo3(signature = (start_db, end_db, step_db, e, e_x, e_z, g))]
fn capacity_sweep(
    start_db: f64,
    end_db: f64,
    step_db: f64,
    e: f64,
    e_x: f64,
    e_z: f64,
    g: f64,
) -> PyResult<Vec<SweepTuple>> {
    let spec = SweepSpec {
        loss_start_db: start_db,
        loss_end_db: end_db,
        loss_step_db: step_db,
        rates: rates(e, e_x, e_z)?,
        g,
    };
    Ok(run_capacity_sweep(&spec)
        .map_err(to_py)?
        .into_iter()
        .map(|r| (r.loss_db, r.q_bob, r.i_ab, r.i_ae, r.c_s))
        .collect())
}

/// The preprocessing, LDPC and spreading chain shared by both parties.
#[pyclass(name = "Code", frozen)]
struct PyCode {
    inner: WiretapCode,
}

#[pymethods]
impl PyCode {
    #[new]
    #[pyo3(signature = (l, k_u, k_r, n_spread, seed))]
    fn new(py: Python<'_>, l: usize, k_u: usize, k_r: usize, n_spread: usize, seed: u64) -> PyResult<Self> {
        let params = CodeParams {
            l,
            k_u,
            k_r,
            n_spread,
            seed,
        };
        let inner = py.detach(|| build_code(params)).map_err(to_py)?;
        Ok(PyCode { inner })
    }

    #[staticmethod]
    fn nominal(py: Python<'_>) -> PyResult<Self> {
        let inner = py.detach(|| build_code(CodeParams::nominal())).map_err(to_py)?;
        Ok(PyCode { inner })
    }

    /// Rebuilds a code from its text description, checking the checksums.
    #[staticmethod]
    fn from_description(py: Python<'_>, text: &str) -> PyResult<Self> {
        let desc = CodeDescription::from_toml(text).map_err(to_py)?;
        let inner = py.detach(|| desc.instantiate()).map_err(to_py)?;
        Ok(PyCode { inner })
    }

    fn describe(&self) -> PyResult<String> {
        self.inner.describe().to_toml().map_err(to_py)
    }

    #[getter]
    fn l(&self) -> usize {
        self.inner.params().l
    }

    #[getter]
    fn k_u(&self) -> usize {
        self.inner.params().k_u
    }

    #[getter]
    fn k_r(&self) -> usize {
        self.inner.params().k_r
    }

    #[getter]
    fn k_m(&self) -> usize {
        self.inner.k_m()
    }

    #[getter]
    fn n_spread(&self) -> usize {
        self.inner.params().n_spread
    }

    #[getter]
    fn random_bit_rate(&self) -> f64 {
        random_bit_rate(&self.inner)
    }

    fn uhf_map(&self, m: Vec<u8>, r: Vec<u8>) -> PyResult<Vec<u8>> {
        uhf_map(&m, &r, &self.inner).map_err(to_py)
    }

    fn uhf_invert(&self, u: Vec<u8>) -> PyResult<(Vec<u8>, Vec<u8>)> {
        uhf_invert(&u, &self.inner).map_err(to_py)
    }

    fn ldpc_encode(&self, u: Vec<u8>) -> PyResult<Vec<u8>> {
        ldpc_encode(&u, &self.inner).map_err(to_py)
    }

    fn spread(&self, v: Vec<u8>, block_index: u64) -> PyResult<Vec<u8>> {
        spread(&v, &self.inner, block_index).map_err(to_py)
    }

    /// Despreads and decodes a chip frame; returns (u, converged, iterations).
    #[pyo3(signature = (chips, detected, e, block_index, max_iters = 100))]
    fn decode(
        &self,
        py: Python<'_>,
        chips: Vec<u8>,
        detected: Vec<bool>,
        e: f64,
        block_index: u64,
        max_iters: usize,
    ) -> PyResult<(Vec<u8>, bool, usize)> {
        let out = py
            .detach(|| {
                let frame = ChipFrame::new(chips, detected)?;
                let llrs = compute_llrs(&frame, e, &self.inner, block_index)?;
                bp_decode(&llrs, &self.inner, max_iters)
            })
            .map_err(to_py)?;
        Ok((out.u, out.converged, out.iterations))
    }
}

/// Default protocol configuration as TOML.
#[pyfunction]
fn default_config() -> PyResult<String> {
    ProtocolConfig::default().to_toml().map_err(to_py)
}

fn attack_model(attack: &str, fraction: f64, e_x: f64, e_z: f64) -> PyResult<AttackModel> {
    let model = match attack {
        "none" => AttackModel::None,
        "intercept_resend" => AttackModel::InterceptResend { fraction },
        "collective" => AttackModel::OptimalCollective { e_x, e_z },
        other => return Err(PyValueError::new_err(format!("unknown attack {other:?}"))),
    };
    model.validate().map_err(to_py)?;
    Ok(model)
}

/// Sends `message` with `code`; `config` is TOML whose code section, if any,
/// is replaced by the code's parameters. Returns the recovered bytes, the
/// outcome and the JSONL transcript.
#[pyfunction]
#[pyo3(signature = (code, message, config = None, seed = None, attack = "none", fraction = 1.0, e_x = 0.0, e_z = 0.0))]
#[allow(clippy::too_many_arguments)]
fn send<'py>(
    py: Python<'py>,
    code: &PyCode,
    message: &[u8],
    config: Option<&str>,
    seed: Option<u64>,
    attack: &str,
    fraction: f64,
    e_x: f64,
    e_z: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = match config {
        Some(text) => ProtocolConfig::from_toml_unchecked(text).map_err(to_py)?,
        None => ProtocolConfig::default(),
    };
    cfg.code = *code.inner.params();
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let attack = attack_model(attack, fraction, e_x, e_z)?;
    let report = py
        .detach(|| run_session(&cfg, &code.inner, message, &attack))
        .map_err(to_py)?;
    let mut jsonl = Vec::new();
    report.transcript.write_jsonl(&mut jsonl).map_err(to_py)?;

    let s = &report.transcript.summary;
    let d = PyDict::new(py);
    d.set_item("delivered", PyBytes::new(py, &report.delivered))?;
    match s.outcome {
        SessionOutcome::Completed => {
            d.set_item("completed", true)?;
            d.set_item("abort_block", py.None())?;
            d.set_item("abort_cause", py.None())?;
            d.set_item("security_abort", false)?;
        }
        SessionOutcome::Aborted { block_index, cause } => {
            d.set_item("completed", false)?;
            d.set_item("abort_block", block_index)?;
            d.set_item("abort_cause", format!("{cause:?}"))?;
            d.set_item("security_abort", cause.is_security())?;
        }
    }
    d.set_item("blocks", s.blocks)?;
    d.set_item("throughput_bps", s.throughput_bps)?;
    d.set_item("transcript", String::from_utf8(jsonl).expect("JSON is UTF-8"))?;
    Ok(d)
}

#[pymodule]
pub fn qsdc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(binary_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(xi, m)?)?;
    m.add_function(wrap_pyfunction!(eve_information, m)?)?;
    m.add_function(wrap_pyfunction!(main_information, m)?)?;
    m.add_function(wrap_pyfunction!(secrecy_capacity, m)?)?;
    m.add_function(wrap_pyfunction!(gram_eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(capacity_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(send, m)?)?;
    m.add_class::<PyCode>()?;
    Ok(())
}
