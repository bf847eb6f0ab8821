//! Browser bindings for three interactive operations: the gate-level parity
//! circuit, single-gate pulse synthesis, and simulated tomography of a
//! protocol step. Every binding returns a JSON string.
//!
//! The `*_json` functions hold the logic and are plain Rust, so they can be
//! tested natively; the `#[wasm_bindgen]` wrappers only convert errors.

use qqlab_core::experiment::theoretical_states;
use qqlab_core::figures::{pulse_svg, BarFigure};
use qqlab_core::parity::{classical_single_query_check, oracle_phase, run_parity_algorithm, Permutation, QueryVerdict};
use qqlab_core::qudit::density_fidelity;
use qqlab_core::smp::{algorithm_targets, optimize, OptimizerConfig};
use qqlab_core::spin::{to_khz, SpinSystem};
use qqlab_core::tomography::{default_readout_set, reconstruct, simulate_measurements, ReconstructOptions, TomographyMode};
use serde::Serialize;
use wasm_bindgen::prelude::*;

type Out = Result<String, String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

#[derive(Serialize)]
struct Complex {
    re: f64,
    im: f64,
}

#[derive(Serialize)]
struct ParityView {
    permutation: Vec<usize>,
    verdict: String,
    outcome_level: usize,
    probability: f64,
    degenerate: bool,
    oracle_phase: Complex,
    amplitudes: Vec<Complex>,
    classical_verdict: Option<QueryVerdict>,
    svg: String,
}

pub fn run_parity_json(dim: usize, perm: &str) -> Out {
    let p = Permutation::parse(perm, dim).map_err(err)?;
    let run = run_parity_algorithm(&p).map_err(err)?;
    let phase = oracle_phase(&p).map_err(err)?;
    let classical = classical_single_query_check(dim).ok().map(|r| r.verdict);
    let fig = BarFigure::from_matrix(run.final_state.projector().matrix());
    let view = ParityView {
        permutation: p.map().to_vec(),
        verdict: run.class.to_string(),
        outcome_level: run.outcome_index,
        probability: run.probability,
        degenerate: run.degenerate,
        oracle_phase: Complex { re: phase.re, im: phase.im },
        amplitudes: run.final_state.amplitudes().iter().map(|a| Complex { re: a.re, im: a.im }).collect(),
        classical_verdict: classical,
        svg: fig.to_svg(&format!("final state for {p}")),
    };
    serde_json::to_string(&view).map_err(err)
}

#[derive(Serialize)]
struct BlockView {
    amp_khz: f64,
    phase_deg: f64,
    dur_us: f64,
}

#[derive(Serialize)]
struct GateView {
    label: String,
    fidelity: f64,
    converged: bool,
    evals_used: usize,
    duration_us: f64,
    blocks: Vec<BlockView>,
    svg: String,
}

/// Synthesizes one of the seventeen protocol gates for the default sodium system.
pub fn synthesize_gate_json(label: &str, n_blocks: usize, seed: u64, max_evals: usize) -> Out {
    let target = algorithm_targets()
        .map_err(err)?
        .into_iter()
        .find(|t| t.label == label)
        .ok_or_else(|| format!("unknown gate {label}"))?;
    let cfg = OptimizerConfig { n_blocks, rng_seed: seed, max_evals, n_restarts: 1, ..Default::default() };
    let sys = SpinSystem::sodium();
    let r = optimize(&target, &sys, &cfg).map_err(err)?;
    let view = GateView {
        label: r.label.clone(),
        fidelity: r.achieved_fidelity,
        converged: r.converged,
        evals_used: r.evals_used,
        duration_us: r.sequence.total_duration() * 1e6,
        blocks: r
            .sequence
            .blocks()
            .iter()
            .map(|b| BlockView { amp_khz: to_khz(b.amplitude), phase_deg: b.phase.to_degrees(), dur_us: b.duration * 1e6 })
            .collect(),
        svg: pulse_svg(&r.sequence, cfg.bounds.amp_max, &format!("{} (F = {:.5})", r.label, r.achieved_fidelity)),
    };
    serde_json::to_string(&view).map_err(err)
}

#[derive(Serialize)]
struct TomographyView {
    fidelity: f64,
    residual_norm: f64,
    condition_number: f64,
    settings: usize,
    projected: bool,
    svg: String,
}

/// Tomographs the ideal state after `step` ("i", "ii" or "iii") of oracle `oracle` (1..=8).
pub fn tomography_json(oracle: usize, step: &str, noise_sigma: f64, seed: u64) -> Out {
    let k = match step {
        "i" => 0,
        "ii" => 1,
        "iii" => 2,
        _ => return Err(format!("unknown step {step}")),
    };
    let truth = theoretical_states(oracle).map_err(err)?[k].projector();
    let set = default_readout_set(4, TomographyMode::Nmr).map_err(err)?;
    let records = simulate_measurements(&truth, set.settings(), noise_sigma, seed).map_err(err)?;
    let rep = reconstruct(&records, ReconstructOptions { project_positive: true }).map_err(err)?;
    let rho = rep.rho_hat.ok_or("reconstruction failed")?;
    let fidelity = density_fidelity(&rho, &truth).map_err(err)?;
    let view = TomographyView {
        fidelity,
        residual_norm: rep.residual_norm,
        condition_number: rep.condition_number,
        settings: set.settings().len(),
        projected: rep.projected,
        svg: BarFigure::from_matrix(rho.matrix()).to_svg(&format!("U{oracle} step ({step}): F = {fidelity:.4}")),
    };
    serde_json::to_string(&view).map_err(err)
}

#[wasm_bindgen]
pub fn run_parity(dim: usize, perm: &str) -> Result<String, JsValue> {
    run_parity_json(dim, perm).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn synthesize_gate(label: &str, n_blocks: usize, seed: u32, max_evals: usize) -> Result<String, JsValue> {
    synthesize_gate_json(label, n_blocks, seed as u64, max_evals).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn tomography(oracle: usize, step: &str, noise_sigma: f64, seed: u32) -> Result<String, JsValue> {
    tomography_json(oracle, step, noise_sigma, seed as u64).map_err(|e| JsValue::from_str(&e))
}
