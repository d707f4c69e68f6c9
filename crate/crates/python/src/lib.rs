//! Python bindings. Structured inputs and outputs travel as JSON strings.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use sqdaa_core::analytics::{self, DistributionSpec};
use sqdaa_core::asp::{asp_prepare, AspConfig};
use sqdaa_core::driver::{run_sqd, run_sqdaa, DriverConfig};
use sqdaa_core::experiment::{index_energy_hamiltonian, run_experiment, ExperimentConfig};
use sqdaa_core::pauli::parse_hamiltonian;
use sqdaa_core::resources;
use sqdaa_core::state::model_state;

fn err(e: sqdaa_core::Error) -> PyErr {
    match e.exit_code() {
        2 | 4 => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn from_json<T: serde::de::DeserializeOwned>(s: &str) -> PyResult<T> {
    serde_json::from_str(s).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn to_json<T: serde::Serialize>(v: &T) -> PyResult<String> {
    serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Analytic SQD / SQD-AA curve for `m` in `ms`, as JSON.
#[pyfunction]
#[pyo3(signature = (spec, ms, shots_it = 1000, p_fail = 0.1))]
fn ratio_curve(spec: &str, ms: Vec<u64>, shots_it: u64, p_fail: f64) -> PyResult<String> {
    let spec: DistributionSpec = from_json(spec)?;
    to_json(&analytics::ratio_curve(&spec, ms, shots_it, p_fail).map_err(err)?)
}

/// Run one restart on a model state over `n` qubits; returns the run record as JSON.
#[pyfunction]
#[pyo3(signature = (algorithm, distribution, n, driver = "{}"))]
fn run_model(algorithm: &str, distribution: &str, n: usize, driver: &str) -> PyResult<String> {
    let dist = from_json(distribution)?;
    let cfg: DriverConfig = from_json(driver)?;
    let state = model_state(&dist, n).map_err(err)?;
    let h = index_energy_hamiltonian(n).map_err(err)?;
    let rec = match algorithm {
        "sqd" => run_sqd(&h, &state, &cfg),
        "sqdaa" => run_sqdaa(&h, &state, &cfg),
        other => return Err(PyValueError::new_err(format!("unknown algorithm {other:?}"))),
    }
    .map_err(err)?;
    to_json(&rec)
}

/// Adiabatic preparation for a Hamiltonian in the line format; returns the outcome as JSON.
#[pyfunction]
#[pyo3(signature = (hamiltonian, config = "{}"))]
fn asp(hamiltonian: &str, config: &str) -> PyResult<String> {
    let h = parse_hamiltonian(hamiltonian).map_err(err)?;
    let cfg: AspConfig = from_json(config)?;
    to_json(&asp_prepare(&h, &cfg).map_err(err)?)
}

#[pyfunction]
fn sk_tcount(n_rot: u64, eps_tot: f64) -> PyResult<u64> {
    resources::sk_tcount(n_rot, eps_tot).map_err(err)
}

#[pyfunction]
fn cnnot_tcount(n: usize) -> PyResult<u64> {
    resources::cnnot_tcount(n).map_err(err)
}

#[pyfunction]
fn majority_vote_shots(overlap: f64, confidence: f64) -> PyResult<u64> {
    resources::majority_vote_shots(overlap, confidence).map_err(err)
}

/// Run a TOML experiment; returns the files written.
#[pyfunction]
#[pyo3(signature = (toml, output = None))]
fn run_config(toml: &str, output: Option<PathBuf>) -> PyResult<Vec<String>> {
    let mut cfg = ExperimentConfig::from_toml(toml).map_err(err)?;
    if let Some(o) = output {
        cfg.output = o;
    }
    let paths = run_experiment(&cfg).map_err(err)?;
    Ok(paths.into_iter().map(|p| p.display().to_string()).collect())
}

#[pymodule]
fn sqdaa(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(ratio_curve, m)?)?;
    m.add_function(wrap_pyfunction!(run_model, m)?)?;
    m.add_function(wrap_pyfunction!(asp, m)?)?;
    m.add_function(wrap_pyfunction!(sk_tcount, m)?)?;
    m.add_function(wrap_pyfunction!(cnnot_tcount, m)?)?;
    m.add_function(wrap_pyfunction!(majority_vote_shots, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add("SCHEMA_VERSION", sqdaa_core::experiment::SCHEMA_VERSION)?;
    Ok(())
}
