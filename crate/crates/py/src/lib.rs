//! Python bindings: trajectory metrics, alignment scoring, instruction
//! chunking, scripted episodes and experiment runs. Structured results are
//! returned as JSON strings.

use std::path::Path;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use groundmap::eval::{ExperimentConfig, EMD_POINTS, SUCCESS_THRESHOLD};
use groundmap::instruction_lang::{Instruction, Lexicon};
use groundmap::pipeline::EpisodeConfig;
use groundmap::sim_env::{held_out_pool, RenderConfig};
use groundmap::util::canonical_json;

fn py_err(e: groundmap::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn points(v: Vec<(f64, f64)>) -> Vec<[f64; 2]> {
    v.into_iter().map(|(x, y)| [x, y]).collect()
}

/// Earth mover's distance between two trajectories after arc-length resampling.
#[pyfunction]
#[pyo3(signature = (a, b, k = EMD_POINTS))]
fn emd(a: Vec<(f64, f64)>, b: Vec<(f64, f64)>, k: usize) -> PyResult<f64> {
    groundmap::eval::emd(&points(a), &points(b), k).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (stop_distances, threshold = SUCCESS_THRESHOLD))]
fn success_rate(stop_distances: Vec<f64>, threshold: f64) -> PyResult<f64> {
    groundmap::eval::success_rate_at(&stop_distances, threshold).map_err(py_err)
}

/// Alignment of every box with every reference from the three posteriors.
#[pyfunction]
fn align_combine(box_prior: Vec<f64>, p_o_b: Vec<Vec<f64>>, p_o_r: Vec<Vec<f64>>, prior: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
    groundmap::grounding::combine(&box_prior, &p_o_b, &p_o_r, &prior).map_err(py_err)
}

/// Noun chunks of an instruction under the built-in lexicon.
#[pyfunction]
fn chunk(text: &str) -> PyResult<Vec<String>> {
    let ins = Instruction::parse(text).map_err(py_err)?;
    Ok(groundmap::instruction_lang::chunk(&ins.tokens, &Lexicon::builtin())
        .iter()
        .map(|c| c.text())
        .collect())
}

/// A held-out scripted episode as JSON.
#[pyfunction]
fn scripted_episode(seed: u64) -> PyResult<String> {
    let mut cfg = EpisodeConfig::default();
    cfg.layout.max_objects = 8;
    let ep = groundmap::pipeline::scripted_episode(seed, &held_out_pool(), &cfg, &RenderConfig::default()).map_err(py_err)?;
    canonical_json(&ep).map_err(py_err)
}

/// Run an experiment from a JSON config (empty object for defaults) and
/// return the summary as JSON.
#[pyfunction]
fn run_experiment(config_json: &str, out_dir: &str) -> PyResult<String> {
    let cfg: ExperimentConfig = serde_json::from_str(config_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let s = groundmap::eval::run_experiment(&cfg, Path::new(out_dir)).map_err(py_err)?;
    canonical_json(&s).map_err(py_err)
}

#[pymodule]
fn groundmap_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(emd, m)?)?;
    m.add_function(wrap_pyfunction!(success_rate, m)?)?;
    m.add_function(wrap_pyfunction!(align_combine, m)?)?;
    m.add_function(wrap_pyfunction!(chunk, m)?)?;
    m.add_function(wrap_pyfunction!(scripted_episode, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
