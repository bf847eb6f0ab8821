//! The simulated experiment: pseudo-pure preparation, pulse-level gates,
//! tomography after every protocol step, and the final parity verdict.
//!
//! Each selected oracle U_i runs three steps from ρ(2, ε):
//! (i) U_FT, (ii) U_i·U_FT, (iii) U_FT†·U_i·U_FT, every one implemented by
//! its own synthesized pulse sequence. States are tomographed in units of ε
//! so that they can be compared with the pure states of the gate-level
//! circuit.

use std::collections::BTreeMap;
use std::path::Path;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::figures::BarFigure;
use crate::parity::{classify_classically, permutation_unitary, CyclicClass, OracleSet, Permutation};
use crate::qudit::{density_fidelity, fourier_unitary, overlap_fidelity, DensityMatrix, MatrixJson, QuditState, Unitary};
use crate::smp::{
    gate_fidelity, mix_seed, step_three_label, step_two_label, OptimizationResult, OptimizerConfig,
    OptimizerConfigJson, VerifiedGate,
};
use crate::spin::{
    deviation_in_epsilon_units, evolve_density, pseudo_pure, sequence_propagator, PulseSequence, SpinSystem,
    SpinSystemConfig, ThermalModel,
};
use crate::tomography::{default_readout_set, reconstruct, simulate_measurements, ReconstructOptions, TomographyMode};

/// Level prepared before the protocol starts.
pub const INITIAL_LEVEL: usize = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThermalConfig {
    pub temperature_k: f64,
}

impl Default for ThermalConfig {
    fn default() -> Self {
        Self { temperature_k: 298.15 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TomographyConfig {
    pub mode: TomographyMode,
    /// Noise width in units of ε.
    pub noise_sigma: f64,
    pub seed: u64,
    pub project_positive: bool,
}

impl Default for TomographyConfig {
    fn default() -> Self {
        Self { mode: TomographyMode::Nmr, noise_sigma: 0.0, seed: 7, project_positive: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SpinSystemConfig,
    pub thermal: ThermalConfig,
    pub optimizer: OptimizerConfigJson,
    pub tomography: TomographyConfig,
    /// Oracle labels U1..U8.
    pub permutations: Vec<String>,
    /// Gate library directory, `<gates_dir>/<label>.json`.
    pub gates_dir: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            system: SpinSystemConfig::default(),
            thermal: ThermalConfig::default(),
            optimizer: OptimizerConfigJson::default(),
            tomography: TomographyConfig::default(),
            permutations: (1..=8).map(|i| format!("U{i}")).collect(),
            gates_dir: "gates".into(),
        }
    }
}

/// Sets `key.path=value` inside a JSON object. The value is read as JSON
/// when it parses, otherwise as a bare string.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::InvalidParameter(format!("override {assignment:?} is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::InvalidParameter(format!("bad override key {path:?}")));
    }
    let mut node = doc;
    for key in &keys[..keys.len() - 1] {
        node = node
            .get_mut(*key)
            .filter(|n| n.is_object())
            .ok_or_else(|| Error::InvalidParameter(format!("override key {path:?}: no section {key:?}")))?;
    }
    let obj = node.as_object_mut().ok_or_else(|| Error::InvalidParameter(format!("override key {path:?}")))?;
    obj.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

impl ExperimentConfig {
    /// Builds a configuration from optional JSON text, `key=value`
    /// overrides, and an optional seed that replaces every seed.
    pub fn load(text: Option<&str>, overrides: &[String], seed: Option<u64>) -> Result<Self> {
        let base: ExperimentConfig = match text {
            Some(t) => serde_json::from_str(t)?,
            None => ExperimentConfig::default(),
        };
        let mut doc = serde_json::to_value(&base)?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let mut cfg: ExperimentConfig = serde_json::from_value(doc)?;
        if let Some(s) = seed {
            cfg.optimizer.seed = s;
            cfg.tomography.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let sys = self.spin_system()?;
        if sys.dim() != 4 {
            return Err(Error::DimensionMismatch { expected: 4, found: sys.dim() });
        }
        self.optimizer_config()?;
        ThermalModel::new(self.thermal.temperature_k, sys.larmor())?;
        if !(self.tomography.noise_sigma >= 0.0 && self.tomography.noise_sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise_sigma {} must be >= 0", self.tomography.noise_sigma)));
        }
        if self.permutations.is_empty() {
            return Err(Error::InvalidParameter("no permutations selected".into()));
        }
        let indices = self.oracle_indices()?;
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("permutations must be distinct and in order".into()));
        }
        Ok(())
    }

    pub fn spin_system(&self) -> Result<SpinSystem> {
        SpinSystem::try_from(self.system.clone())
    }

    pub fn optimizer_config(&self) -> Result<OptimizerConfig> {
        OptimizerConfig::try_from(self.optimizer.clone())
    }

    /// Oracle indices 1..=8 of the selected permutations.
    pub fn oracle_indices(&self) -> Result<Vec<usize>> {
        self.permutations.iter().map(|p| oracle_index(p)).collect()
    }

    /// Gate labels the selected permutations need, in protocol order.
    pub fn required_gates(&self) -> Result<Vec<String>> {
        let idx = self.oracle_indices()?;
        let mut out = vec!["UFT".to_string()];
        out.extend(idx.iter().map(|&i| step_two_label(i)));
        out.extend(idx.iter().map(|&i| step_three_label(i)));
        Ok(out)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> Result<String> {
        let bytes = serde_json::to_vec(self)?;
        Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
    }
}

fn oracle_index(label: &str) -> Result<usize> {
    label
        .strip_prefix('U')
        .and_then(|n| n.parse::<usize>().ok())
        .filter(|i| (1..=8).contains(i))
        .ok_or_else(|| Error::InvalidParameter(format!("permutation {label:?} is not one of U1..U8")))
}

/// Pulse sequences by gate label.
#[derive(Clone, Debug, Default)]
pub struct GateLibrary {
    sequences: BTreeMap<String, PulseSequence>,
}

impl GateLibrary {
    /// Loads and re-verifies `dir/<label>.json` for every label.
    pub fn load(dir: &Path, labels: &[String]) -> Result<Self> {
        let mut sequences = BTreeMap::new();
        for label in labels {
            let path = crate::smp::GateFile::path_in(dir, label);
            if !path.is_file() {
                return Err(Error::MissingGate { label: label.clone(), path: path.display().to_string() });
            }
            sequences.insert(label.clone(), VerifiedGate::load(&path)?.sequence);
        }
        Ok(Self { sequences })
    }

    pub fn from_results(results: &BTreeMap<String, OptimizationResult>) -> Self {
        Self { sequences: results.iter().map(|(k, r)| (k.clone(), r.sequence.clone())).collect() }
    }

    pub fn insert(&mut self, label: impl Into<String>, seq: PulseSequence) {
        self.sequences.insert(label.into(), seq);
    }

    pub fn get(&self, label: &str) -> Result<&PulseSequence> {
        self.sequences
            .get(label)
            .ok_or_else(|| Error::MissingGate { label: label.to_string(), path: "<library>".into() })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    /// "i", "ii" or "iii".
    pub step: String,
    pub gate: String,
    /// Gate fidelity of the pulse sequence in the configured system.
    pub gate_fidelity: f64,
    /// Reconstructed state in units of ε.
    pub reconstructed: MatrixJson,
    pub projected: bool,
    /// Gate-level state the step should produce.
    pub theory: MatrixJson,
    /// Uhlmann fidelity of `reconstructed` against `theory`; absent when the
    /// raw estimate was unphysical and projection was off.
    pub fidelity: Option<f64>,
    pub overlap_fidelity: Option<f64>,
    pub residual_norm: f64,
    pub condition_number: f64,
    pub settings_rank: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PermutationReport {
    pub label: String,
    pub permutation: Permutation,
    pub expected: CyclicClass,
    /// Read off the final populations; absent if neither |2> nor |4> wins.
    pub verdict: Option<CyclicClass>,
    pub outcome_level: usize,
    pub populations: Vec<f64>,
    pub winning_population: f64,
    pub agrees: bool,
    pub steps: Vec<StepReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub optimizer_seed: u64,
    pub tomography_seed: u64,
    pub epsilon: f64,
    pub temperature_k: f64,
    pub readout_model: String,
    pub readout_settings: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub provenance: Provenance,
    pub config: ExperimentConfig,
    pub permutations: Vec<PermutationReport>,
    pub verdicts_correct: usize,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Parses a report and checks that every stored matrix is well formed.
    pub fn from_json(text: &str) -> Result<Self> {
        let report: ExperimentReport = serde_json::from_str(text)?;
        for p in &report.permutations {
            for s in &p.steps {
                s.reconstructed.to_matrix()?;
                s.theory.to_matrix()?;
            }
        }
        Ok(report)
    }

    /// Bar figures of every reconstructed state, named `<label>_step_<k>`.
    pub fn figures(&self) -> Result<Vec<(String, String, BarFigure)>> {
        let mut out = Vec::new();
        for p in &self.permutations {
            for s in &p.steps {
                let fig = BarFigure::from_matrix(&s.reconstructed.to_matrix()?);
                let title = match s.fidelity {
                    Some(f) => format!("{} step ({}) {}: F = {f:.4}", p.label, s.step, s.gate),
                    None => format!("{} step ({}) {}", p.label, s.step, s.gate),
                };
                out.push((format!("{}_step_{}", p.label, s.step), title, fig));
            }
        }
        Ok(out)
    }
}

/// Gate-level states after each protocol step for oracle `i`.
pub fn theoretical_states(i: usize) -> Result<[QuditState; 3]> {
    let ft = fourier_unitary(4)?;
    let oracle = permutation_unitary(&Permutation::ququart_oracle(i)?);
    let s1 = ft.apply(&QuditState::basis(4, INITIAL_LEVEL)?)?;
    let s2 = oracle.apply(&s1)?;
    let s3 = ft.dagger().apply(&s2)?;
    Ok([s1, s2, s3])
}

fn step_targets(i: usize) -> Result<[Unitary; 3]> {
    let ft = fourier_unitary(4)?;
    let oracle = permutation_unitary(&Permutation::ququart_oracle(i)?);
    let two = oracle.compose(&ft)?;
    let three = ft.dagger().compose(&two)?;
    Ok([ft, two, three])
}

pub fn run_experiment(cfg: &ExperimentConfig, gates: &GateLibrary) -> Result<ExperimentReport> {
    cfg.validate()?;
    let sys = cfg.spin_system()?;
    let thermal = ThermalModel::new(cfg.thermal.temperature_k, sys.larmor())?;
    let readout = default_readout_set(4, cfg.tomography.mode)?;
    let indices = cfg.oracle_indices()?;
    for label in cfg.required_gates()? {
        gates.get(&label)?;
    }

    let run = |&i: &usize| run_branch(cfg, &sys, thermal.epsilon, &readout, gates, i);
    #[cfg(feature = "parallel")]
    let permutations: Vec<PermutationReport> = indices.par_iter().map(run).collect::<Result<_>>()?;
    #[cfg(not(feature = "parallel"))]
    let permutations: Vec<PermutationReport> = indices.iter().map(run).collect::<Result<_>>()?;

    let provenance = Provenance {
        tool: "qqlab".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_hash: cfg.hash()?,
        optimizer_seed: cfg.optimizer.seed,
        tomography_seed: cfg.tomography.seed,
        epsilon: thermal.epsilon,
        temperature_k: thermal.temperature,
        readout_model: match cfg.tomography.mode {
            TomographyMode::Nmr => "idealized expectation values; hard rotations, line-resolved Ix/Iy".into(),
            TomographyMode::OperatorBasis => "idealized expectation values; direct Gell-Mann components".into(),
        },
        readout_settings: readout.settings().len(),
    };
    let verdicts_correct = permutations.iter().filter(|p| p.agrees).count();
    Ok(ExperimentReport { provenance, config: cfg.clone(), permutations, verdicts_correct })
}

fn run_branch(
    cfg: &ExperimentConfig,
    sys: &SpinSystem,
    eps: f64,
    readout: &crate::tomography::ReadoutSet,
    gates: &GateLibrary,
    i: usize,
) -> Result<PermutationReport> {
    let perm = Permutation::ququart_oracle(i)?;
    let expected = classify_classically(&perm, &OracleSet::new(4)?)?;
    let rho0 = pseudo_pure(4, INITIAL_LEVEL, eps)?;
    let theory = theoretical_states(i)?;
    let targets = step_targets(i)?;
    let labels = ["UFT".to_string(), step_two_label(i), step_three_label(i)];
    let opts = ReconstructOptions { project_positive: cfg.tomography.project_positive };

    let mut steps = Vec::with_capacity(3);
    let mut last = None;
    for (k, name) in ["i", "ii", "iii"].into_iter().enumerate() {
        let u = sequence_propagator(sys, gates.get(&labels[k])?)?;
        let rho = evolve_density(&rho0, &u)?;
        let in_eps = deviation_in_epsilon_units(&rho, eps)?;
        let seed = mix_seed(cfg.tomography.seed, (3 * i + k) as u64);
        let records = simulate_measurements(&in_eps, readout.settings(), cfg.tomography.noise_sigma, seed)?;
        let rep = reconstruct(&records, opts)?;
        let expect = theory[k].projector();
        let (fidelity, overlap) = match &rep.rho_hat {
            Some(r) => (Some(density_fidelity(r, &expect)?), Some(overlap_fidelity(r, &expect)?)),
            None => (None, None),
        };
        let shown = rep.rho_hat.as_ref().map_or(&rep.estimate, DensityMatrix::matrix);
        steps.push(StepReport {
            step: name.into(),
            gate: labels[k].clone(),
            gate_fidelity: gate_fidelity(&targets[k], &u)?,
            reconstructed: MatrixJson::from_matrix(shown),
            projected: rep.projected,
            theory: MatrixJson::from_matrix(expect.matrix()),
            fidelity,
            overlap_fidelity: overlap,
            residual_norm: rep.residual_norm,
            condition_number: rep.condition_number,
            settings_rank: rep.settings_rank,
            warnings: rep.warnings,
        });
        last = Some(shown.clone());
    }

    let fin = last.expect("three steps");
    let populations: Vec<f64> = (0..4).map(|k| fin[(k, k)].re).collect();
    let (level, winning) = populations
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (k, &p)| if p > best.1 { (k + 1, p) } else { best });
    let verdict = match level {
        INITIAL_LEVEL => Some(CyclicClass::PositiveCyclic),
        4 => Some(CyclicClass::NegativeCyclic),
        _ => None,
    };
    Ok(PermutationReport {
        label: format!("U{i}"),
        permutation: perm,
        expected,
        verdict,
        outcome_level: level,
        populations,
        winning_population: winning,
        agrees: verdict == Some(expected),
        steps,
    })
}
