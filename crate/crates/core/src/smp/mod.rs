//! Strong-modulating-pulse synthesis.
//!
//! A gate is realized as a short train of constant rf blocks, each with a
//! free amplitude, phase and duration, acting on the quadrupolar spin in
//! the rotating frame. Block parameters are searched with a multi-start
//! simplex method on the phase-insensitive figure of merit
//! |Tr(U_target† U)|/d. The search runs in unconstrained coordinates that a
//! logistic map sends into the hardware box, so no step can leave it.

pub mod nelder_mead;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, ZERO};
use crate::parity::{permutation_unitary, Permutation};
use crate::qudit::{fourier_unitary, MatrixJson, Unitary};
use crate::spin::{
    khz, sequence_propagator, to_khz, BlockKernel, PulseBlock, PulseBlockJson, PulseBounds, PulseSequence,
    SpinSystem, SpinSystemConfig,
};
use nelder_mead::{minimize, SimplexOptions};

pub const DEFAULT_BLOCKS: usize = 8;
pub const MAX_BLOCKS: usize = 16;

/// A unitary the synthesizer should reproduce, with a short label.
#[derive(Clone, Debug, PartialEq)]
pub struct GateTarget {
    pub label: String,
    pub target: Unitary,
}

impl GateTarget {
    pub fn new(label: impl Into<String>, target: Unitary) -> Self {
        Self { label: label.into(), target }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub n_blocks: usize,
    pub bounds: PulseBounds,
    /// Fidelity at which a result counts as converged.
    pub fidelity_goal: f64,
    /// Each local search stops once it reaches this fidelity; set above the
    /// goal to buy margin for downstream state preparation.
    pub stop_fidelity: f64,
    /// Evaluation budget of one local search.
    pub max_evals: usize,
    pub n_restarts: usize,
    pub rng_seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            n_blocks: DEFAULT_BLOCKS,
            bounds: PulseBounds::default(),
            fidelity_goal: 0.99,
            stop_fidelity: 0.99999,
            max_evals: 20_000,
            n_restarts: 4,
            rng_seed: 2014,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_blocks == 0 || self.n_blocks > MAX_BLOCKS {
            return Err(Error::InvalidParameter(format!("n_blocks {} outside 1..={MAX_BLOCKS}", self.n_blocks)));
        }
        if !(self.fidelity_goal > 0.0 && self.fidelity_goal <= 1.0) {
            return Err(Error::InvalidParameter(format!("fidelity_goal {} outside (0, 1]", self.fidelity_goal)));
        }
        if !(self.stop_fidelity > 0.0 && self.stop_fidelity <= 1.0) {
            return Err(Error::InvalidParameter(format!("stop_fidelity {} outside (0, 1]", self.stop_fidelity)));
        }
        if self.max_evals == 0 || self.n_restarts == 0 {
            return Err(Error::InvalidParameter("max_evals and n_restarts must be positive".into()));
        }
        self.bounds.validate()
    }
}

/// Lab-unit JSON form of [`OptimizerConfig`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfigJson {
    pub n_blocks: usize,
    pub amp_max_khz: f64,
    pub t_min_us: f64,
    pub t_max_us: f64,
    pub fidelity_goal: f64,
    pub stop_fidelity: f64,
    pub max_evals: usize,
    pub n_restarts: usize,
    pub seed: u64,
}

impl Default for OptimizerConfigJson {
    fn default() -> Self {
        OptimizerConfig::default().into()
    }
}

impl From<OptimizerConfig> for OptimizerConfigJson {
    fn from(c: OptimizerConfig) -> Self {
        Self {
            n_blocks: c.n_blocks,
            amp_max_khz: to_khz(c.bounds.amp_max),
            t_min_us: c.bounds.t_min * 1e6,
            t_max_us: c.bounds.t_max * 1e6,
            fidelity_goal: c.fidelity_goal,
            stop_fidelity: c.stop_fidelity,
            max_evals: c.max_evals,
            n_restarts: c.n_restarts,
            seed: c.rng_seed,
        }
    }
}

impl TryFrom<OptimizerConfigJson> for OptimizerConfig {
    type Error = Error;
    fn try_from(j: OptimizerConfigJson) -> Result<Self> {
        let c = OptimizerConfig {
            n_blocks: j.n_blocks,
            bounds: PulseBounds { amp_max: khz(j.amp_max_khz), t_min: j.t_min_us * 1e-6, t_max: j.t_max_us * 1e-6 },
            fidelity_goal: j.fidelity_goal,
            stop_fidelity: j.stop_fidelity,
            max_evals: j.max_evals,
            n_restarts: j.n_restarts,
            rng_seed: j.seed,
        };
        c.validate()?;
        Ok(c)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub label: String,
    pub sequence: PulseSequence,
    pub achieved_fidelity: f64,
    pub evals_used: usize,
    pub converged: bool,
    /// Best fidelity reached by each local search, in restart order.
    pub restart_fidelities: Vec<f64>,
    pub seed: u64,
}

/// |Tr(U_target† U_actual)|/d.
pub fn gate_fidelity(target: &Unitary, actual: &Unitary) -> Result<f64> {
    if target.dim() != actual.dim() {
        return Err(Error::DimensionMismatch { expected: target.dim(), found: actual.dim() });
    }
    Ok(trace_overlap(target.matrix(), actual.matrix()))
}

fn trace_overlap(target: &CMat, actual: &CMat) -> f64 {
    let d = target.nrows();
    let mut acc = ZERO;
    for (t, a) in target.iter().zip(actual.iter()) {
        acc += t.conj() * a;
    }
    (acc.norm() / d as f64).min(1.0)
}

/// Flattens a sequence into `[amp, phase, duration]` per block (SI units).
pub fn encode(seq: &PulseSequence) -> Vec<f64> {
    seq.blocks().iter().flat_map(|b| [b.amplitude, b.phase, b.duration]).collect()
}

/// A decoded parameter vector plus the number of entries that had to be
/// clamped into the bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct Decoded {
    pub sequence: PulseSequence,
    pub clamped: usize,
}

/// Inverse of [`encode`], clamping amplitudes and durations into `bounds`.
pub fn decode(params: &[f64], bounds: &PulseBounds) -> Result<Decoded> {
    if params.is_empty() || params.len() % 3 != 0 {
        return Err(Error::InvalidParameter(format!("parameter vector length {} is not 3·n_blocks", params.len())));
    }
    let mut clamped = 0;
    let mut clamp = |v: f64, lo: f64, hi: f64| {
        let c = v.clamp(lo, hi);
        if c != v {
            clamped += 1;
        }
        c
    };
    let mut blocks = Vec::with_capacity(params.len() / 3);
    for chunk in params.chunks_exact(3) {
        let amplitude = clamp(chunk[0], 0.0, bounds.amp_max);
        let duration = clamp(chunk[2], bounds.t_min, bounds.t_max);
        blocks.push(PulseBlock::new(amplitude, chunk[1], duration)?);
    }
    Ok(Decoded { sequence: PulseSequence::new(blocks)?, clamped })
}

/// 1 − gate fidelity of the clamped sequence encoded by `params`.
pub fn objective(params: &[f64], target: &GateTarget, sys: &SpinSystem, cfg: &OptimizerConfig) -> Result<f64> {
    if params.len() != 3 * cfg.n_blocks {
        return Err(Error::InvalidParameter(format!(
            "expected {} parameters for {} blocks, got {}",
            3 * cfg.n_blocks,
            cfg.n_blocks,
            params.len()
        )));
    }
    let decoded = decode(params, &cfg.bounds)?;
    let u = sequence_propagator(sys, &decoded.sequence)?;
    Ok(1.0 - gate_fidelity(&target.target, &u)?)
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    (p / (1.0 - p)).ln()
}

/// Smooth bijection between unconstrained search coordinates and the
/// hardware box. Phases pass through unchanged since they are periodic.
#[derive(Clone, Copy, Debug)]
pub struct SearchSpace {
    pub bounds: PulseBounds,
}

impl SearchSpace {
    pub fn block(&self, z: &[f64]) -> PulseBlock {
        let b = &self.bounds;
        PulseBlock {
            amplitude: b.amp_max * logistic(z[0]),
            phase: z[1],
            duration: b.t_min + (b.t_max - b.t_min) * logistic(z[2]),
        }
    }

    pub fn blocks(&self, z: &[f64]) -> Vec<PulseBlock> {
        z.chunks_exact(3).map(|c| self.block(c)).collect()
    }

    pub fn internal(&self, seq: &PulseSequence) -> Vec<f64> {
        let b = &self.bounds;
        seq.blocks()
            .iter()
            .flat_map(|blk| {
                [
                    logit(blk.amplitude / b.amp_max),
                    blk.phase,
                    logit((blk.duration - b.t_min) / (b.t_max - b.t_min)),
                ]
            })
            .collect()
    }
}

/// Outcome of one seeded local search.
#[derive(Clone, Debug, PartialEq)]
pub struct RestartOutcome {
    pub restart: usize,
    pub sequence: PulseSequence,
    pub fidelity: f64,
    pub evals: usize,
}

/// SplitMix64 finalizer, used to derive independent per-restart seeds.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x632B_E59B_D9B4_E019);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs local search number `restart`, reporting every objective value to `observer`.
pub fn local_search(
    target: &GateTarget,
    sys: &SpinSystem,
    cfg: &OptimizerConfig,
    restart: usize,
    observer: &mut dyn FnMut(f64),
) -> Result<RestartOutcome> {
    cfg.validate()?;
    if target.target.dim() != sys.dim() {
        return Err(Error::DimensionMismatch { expected: sys.dim(), found: target.target.dim() });
    }
    let space = SearchSpace { bounds: cfg.bounds };
    let kernel = BlockKernel::new(sys);
    let goal = target.target.matrix();

    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.rng_seed, restart as u64));
    let z0: Vec<f64> = (0..cfg.n_blocks)
        .flat_map(|_| [rng.random_range(-2.0..2.0), rng.random_range(0.0..2.0 * PI), rng.random_range(-2.5..1.5)])
        .collect();

    let f = |z: &[f64]| {
        let u = kernel.sequence(&space.blocks(z));
        let value = 1.0 - trace_overlap(goal, &u);
        observer(value);
        value
    };
    let opts = SimplexOptions {
        max_evals: cfg.max_evals,
        f_target: 1.0 - cfg.stop_fidelity,
        initial_step: 0.6,
        ..Default::default()
    };
    let min = minimize(f, &z0, &opts);
    let sequence = PulseSequence::new(space.blocks(&min.x))?;
    // re-simulate through the public path so stored fidelities are reproducible
    let fidelity = gate_fidelity(&target.target, &sequence_propagator(sys, &sequence)?)?;
    Ok(RestartOutcome { restart, sequence, fidelity, evals: min.evals })
}

/// Multi-start synthesis. The best restart wins, ties going to the lower index.
pub fn optimize(target: &GateTarget, sys: &SpinSystem, cfg: &OptimizerConfig) -> Result<OptimizationResult> {
    cfg.validate()?;
    let run = |r: usize| local_search(target, sys, cfg, r, &mut |_| {});
    #[cfg(feature = "parallel")]
    let outcomes: Vec<RestartOutcome> = (0..cfg.n_restarts).into_par_iter().map(run).collect::<Result<_>>()?;
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<RestartOutcome> = (0..cfg.n_restarts).map(run).collect::<Result<_>>()?;

    let best = outcomes
        .iter()
        .fold(None::<&RestartOutcome>, |best, o| match best {
            Some(b) if b.fidelity >= o.fidelity => Some(b),
            _ => Some(o),
        })
        .expect("at least one restart");
    Ok(OptimizationResult {
        label: target.label.clone(),
        sequence: best.sequence.clone(),
        achieved_fidelity: best.fidelity,
        evals_used: outcomes.iter().map(|o| o.evals).sum(),
        converged: best.fidelity >= cfg.fidelity_goal,
        restart_fidelities: outcomes.iter().map(|o| o.fidelity).collect(),
        seed: cfg.rng_seed,
    })
}

/// The seventeen composite gates of the protocol, in protocol order:
/// U_FT, then U_i·U_FT and U_FT†·U_i·U_FT for the eight oracles.
pub fn algorithm_targets() -> Result<Vec<GateTarget>> {
    let ft = fourier_unitary(4)?;
    let ft_dag = ft.dagger();
    let mut targets = vec![GateTarget::new("UFT", ft.clone())];
    for i in 1..=8 {
        let oracle = permutation_unitary(&Permutation::ququart_oracle(i)?);
        targets.push(GateTarget::new(step_two_label(i), oracle.compose(&ft)?));
    }
    for i in 1..=8 {
        let oracle = permutation_unitary(&Permutation::ququart_oracle(i)?);
        targets.push(GateTarget::new(step_three_label(i), ft_dag.compose(&oracle)?.compose(&ft)?));
    }
    Ok(targets)
}

pub fn step_two_label(i: usize) -> String {
    format!("U{i}_UFT")
}

pub fn step_three_label(i: usize) -> String {
    format!("UFTinv_U{i}_UFT")
}

/// Optimizes every protocol gate independently. Each target gets its own
/// seed stream derived from the configured seed and its protocol index.
pub fn synthesize_algorithm_gates(
    sys: &SpinSystem,
    cfg: &OptimizerConfig,
) -> Result<BTreeMap<String, OptimizationResult>> {
    if sys.dim() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, found: sys.dim() });
    }
    let targets = algorithm_targets()?;
    let run = |(i, t): (usize, &GateTarget)| optimize(t, sys, &config_for_target(cfg, i));
    #[cfg(feature = "parallel")]
    let results: Vec<OptimizationResult> = targets.par_iter().enumerate().map(run).collect::<Result<_>>()?;
    #[cfg(not(feature = "parallel"))]
    let results: Vec<OptimizationResult> = targets.iter().enumerate().map(run).collect::<Result<_>>()?;
    Ok(results.into_iter().map(|r| (r.label.clone(), r)).collect())
}

/// Configuration used for the `index`-th protocol gate.
pub fn config_for_target(cfg: &OptimizerConfig, index: usize) -> OptimizerConfig {
    OptimizerConfig { rng_seed: mix_seed(cfg.rng_seed, 1000 + index as u64), ..cfg.clone() }
}

/// On-disk record of one synthesized gate, `gates/<label>.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateFile {
    pub label: String,
    pub system: SpinSystemConfig,
    pub config: OptimizerConfigJson,
    pub target: MatrixJson,
    pub blocks: Vec<PulseBlockJson>,
    pub achieved_fidelity: f64,
    pub evals_used: usize,
    pub converged: bool,
    pub restart_fidelities: Vec<f64>,
    pub seed: u64,
}

impl GateFile {
    pub fn new(target: &GateTarget, sys: &SpinSystem, cfg: &OptimizerConfig, result: &OptimizationResult) -> Self {
        Self {
            label: result.label.clone(),
            system: sys.clone().into(),
            config: cfg.clone().into(),
            target: target.target.clone().into(),
            blocks: result.sequence.blocks().iter().map(|&b| b.into()).collect(),
            achieved_fidelity: result.achieved_fidelity,
            evals_used: result.evals_used,
            converged: result.converged,
            restart_fidelities: result.restart_fidelities.clone(),
            seed: result.seed,
        }
    }

    pub fn path_in(dir: &Path, label: &str) -> std::path::PathBuf {
        dir.join(format!("{label}.json"))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Parses a gate file and re-simulates it; the stored fidelity must be
    /// reproduced within 1e-12.
    pub fn from_json(text: &str) -> Result<VerifiedGate> {
        let file: GateFile = serde_json::from_str(text)?;
        file.verify()
    }

    pub fn verify(&self) -> Result<VerifiedGate> {
        let system = SpinSystem::try_from(self.system.clone())?;
        let target = Unitary::try_from(self.target.clone())?;
        let blocks = self.blocks.iter().map(|&b| PulseBlock::try_from(b)).collect::<Result<Vec<_>>>()?;
        let sequence = PulseSequence::new(blocks)?;
        let propagator = sequence_propagator(&system, &sequence)?;
        let fidelity = gate_fidelity(&target, &propagator)?;
        if (fidelity - self.achieved_fidelity).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "gate {} records fidelity {} but re-simulates to {}",
                self.label, self.achieved_fidelity, fidelity
            )));
        }
        Ok(VerifiedGate { label: self.label.clone(), system, target, sequence, propagator, fidelity, converged: self.converged })
    }
}

/// A gate file whose stored fidelity has been reproduced by simulation.
#[derive(Clone, Debug)]
pub struct VerifiedGate {
    pub label: String,
    pub system: SpinSystem,
    pub target: Unitary,
    pub sequence: PulseSequence,
    pub propagator: Unitary,
    pub fidelity: f64,
    pub converged: bool,
}

impl VerifiedGate {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidParameter(format!("cannot read {}: {e}", path.display())))?;
        GateFile::from_json(&text)
    }
}
