//! Spin-s quadrupolar system in the rotating frame.
//!
//! Frequencies are angular (rad/s) with ħ = 1; the JSON forms use the lab
//! units kHz, MHz, degrees and microseconds.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, real, CMat, C64, ZERO};
use crate::qudit::{DensityMatrix, QuditState, Unitary};

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 6.626_070_15e-34 / (2.0 * PI);
/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;

pub const DEFAULT_QUAD_KHZ: f64 = 10.0;
pub const DEFAULT_LARMOR_MHZ: f64 = 105.8;
pub const DEFAULT_AMP_MAX_KHZ: f64 = 25.0;
pub const DEFAULT_T_MIN_US: f64 = 0.5;
pub const DEFAULT_T_MAX_US: f64 = 200.0;

pub fn khz(nu: f64) -> f64 {
    2.0 * PI * nu * 1e3
}

pub fn mhz(nu: f64) -> f64 {
    2.0 * PI * nu * 1e6
}

pub fn to_khz(omega: f64) -> f64 {
    omega / (2.0 * PI * 1e3)
}

/// Half-integer spin quantum number, stored as 2s.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Spin {
    twice: u32,
}

impl Spin {
    pub const THREE_HALVES: Spin = Spin { twice: 3 };

    pub fn from_twice(twice: u32) -> Result<Self> {
        if twice == 0 {
            return Err(Error::InvalidSpin("spin must be positive".into()));
        }
        Ok(Self { twice })
    }

    pub fn from_f64(s: f64) -> Result<Self> {
        let twice = 2.0 * s;
        if !(twice.is_finite() && twice > 0.0 && (twice - twice.round()).abs() < 1e-12) {
            return Err(Error::InvalidSpin(format!("{s} is not a positive half-integer")));
        }
        Self::from_twice(twice.round() as u32)
    }

    pub fn value(self) -> f64 {
        self.twice as f64 / 2.0
    }

    pub fn dim(self) -> usize {
        self.twice as usize + 1
    }

    /// Magnetic quantum numbers s, s−1, …, −s in basis order.
    pub fn m_values(self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.value() - i as f64).collect()
    }
}

impl FromStr for Spin {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if let Some((num, den)) = t.split_once('/') {
            let num: u32 = num.trim().parse().map_err(|_| Error::InvalidSpin(t.into()))?;
            return match den.trim() {
                "2" => Self::from_twice(num),
                "1" => Self::from_twice(2 * num),
                _ => Err(Error::InvalidSpin(format!("{t} is not a half-integer"))),
            };
        }
        let v: f64 = t.parse().map_err(|_| Error::InvalidSpin(t.into()))?;
        Self::from_f64(v)
    }
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.twice % 2 == 0 {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

/// Angular momentum operators in units of ħ.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinOperators {
    pub ix: CMat,
    pub iy: CMat,
    pub iz: CMat,
    /// Total spin squared, s(s+1)·I.
    pub isq: CMat,
}

/// Ladder-operator construction with ⟨m+1|I₊|m⟩ = √(s(s+1) − m(m+1)).
pub fn spin_operators(s: Spin) -> SpinOperators {
    let d = s.dim();
    let sv = s.value();
    let ms = s.m_values();
    let mut raise = CMat::zeros(d, d);
    for i in 1..d {
        let m = ms[i];
        raise[(i - 1, i)] = real((sv * (sv + 1.0) - m * (m + 1.0)).sqrt());
    }
    let lower = raise.adjoint();
    let ix = (&raise + &lower) * real(0.5);
    let iy = (&raise - &lower) * C64::new(0.0, -0.5);
    let iz = CMat::from_diagonal(&DVector::from_iterator(d, ms.iter().map(|&m| real(m))));
    let isq = linalg::identity(d) * real(sv * (sv + 1.0));
    SpinOperators { ix, iy, iz, isq }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinSystemConfig {
    pub spin: String,
    pub larmor_mhz: f64,
    pub quad_khz: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub offset_khz: f64,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

impl Default for SpinSystemConfig {
    fn default() -> Self {
        Self {
            spin: "3/2".into(),
            larmor_mhz: DEFAULT_LARMOR_MHZ,
            quad_khz: DEFAULT_QUAD_KHZ,
            offset_khz: 0.0,
        }
    }
}

/// Spin, Larmor and quadrupolar frequencies, plus an optional resonance
/// offset δ that enters the rotating frame as δ·Iz.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpinSystemConfig", into = "SpinSystemConfig")]
pub struct SpinSystem {
    spin: Spin,
    larmor: f64,
    quad: f64,
    offset: f64,
    ops: SpinOperators,
}

impl SpinSystem {
    pub fn new(spin: Spin, larmor: f64, quad: f64) -> Self {
        Self { spin, larmor, quad, offset: 0.0, ops: spin_operators(spin) }
    }

    /// Spin-3/2 with the default ²³Na-like frequencies.
    pub fn sodium() -> Self {
        Self::new(Spin::THREE_HALVES, mhz(DEFAULT_LARMOR_MHZ), khz(DEFAULT_QUAD_KHZ))
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    pub fn spin(&self) -> Spin {
        self.spin
    }

    pub fn dim(&self) -> usize {
        self.spin.dim()
    }

    pub fn larmor(&self) -> f64 {
        self.larmor
    }

    pub fn quad(&self) -> f64 {
        self.quad
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn operators(&self) -> &SpinOperators {
        &self.ops
    }

    /// Non-fatal modelling concerns, e.g. a Larmor frequency that does not
    /// dominate the quadrupolar coupling.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.larmor.abs() < 10.0 * self.quad.abs() {
            w.push(format!(
                "Larmor frequency {:.3e} rad/s does not dominate quadrupolar frequency {:.3e} rad/s",
                self.larmor, self.quad
            ));
        }
        w
    }

    /// (ω_Q/6)(3Iz² − I²).
    pub fn quadrupolar_term(&self) -> CMat {
        let iz = &self.ops.iz;
        (iz * iz * real(3.0) - &self.ops.isq) * real(self.quad / 6.0)
    }

    /// Energies of the static Hamiltonian, ascending.
    pub fn energy_levels(&self) -> Vec<f64> {
        linalg::hermitian_eigen(&static_hamiltonian(self)).0
    }

    /// Gaps between consecutive energy levels: the single-quantum lines.
    pub fn transition_frequencies(&self) -> Vec<f64> {
        self.energy_levels().windows(2).map(|w| w[1] - w[0]).collect()
    }
}

impl TryFrom<SpinSystemConfig> for SpinSystem {
    type Error = Error;
    fn try_from(c: SpinSystemConfig) -> Result<Self> {
        let spin: Spin = c.spin.parse()?;
        for (name, v) in [("larmor_mhz", c.larmor_mhz), ("quad_khz", c.quad_khz), ("offset_khz", c.offset_khz)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite")));
            }
        }
        Ok(SpinSystem::new(spin, mhz(c.larmor_mhz), khz(c.quad_khz)).with_offset(khz(c.offset_khz)))
    }
}

impl From<SpinSystem> for SpinSystemConfig {
    fn from(s: SpinSystem) -> Self {
        Self {
            spin: s.spin.to_string(),
            larmor_mhz: s.larmor / (2.0 * PI * 1e6),
            quad_khz: to_khz(s.quad),
            offset_khz: to_khz(s.offset),
        }
    }
}

/// Hardware limits on a single rf block.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseBounds {
    /// ω₁ ceiling, rad/s.
    pub amp_max: f64,
    /// Shortest block, s.
    pub t_min: f64,
    /// Longest block, s.
    pub t_max: f64,
}

impl Default for PulseBounds {
    fn default() -> Self {
        Self { amp_max: khz(DEFAULT_AMP_MAX_KHZ), t_min: DEFAULT_T_MIN_US * 1e-6, t_max: DEFAULT_T_MAX_US * 1e-6 }
    }
}

impl PulseBounds {
    pub fn validate(&self) -> Result<()> {
        if !(self.amp_max > 0.0 && self.t_min > 0.0 && self.t_min < self.t_max && self.t_max.is_finite()) {
            return Err(Error::InvalidParameter(format!("inconsistent pulse bounds {self:?}")));
        }
        Ok(())
    }
}

/// One constant-amplitude rf block.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PulseBlockJson", into = "PulseBlockJson")]
pub struct PulseBlock {
    /// ω₁, rad/s.
    pub amplitude: f64,
    /// rf phase, rad.
    pub phase: f64,
    /// s.
    pub duration: f64,
}

impl PulseBlock {
    pub fn new(amplitude: f64, phase: f64, duration: f64) -> Result<Self> {
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return Err(Error::InvalidParameter(format!("amplitude {amplitude} must be >= 0")));
        }
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::InvalidParameter(format!("duration {duration} must be > 0")));
        }
        if !phase.is_finite() {
            return Err(Error::InvalidParameter("phase must be finite".into()));
        }
        Ok(Self { amplitude, phase, duration })
    }

    pub fn within(&self, bounds: &PulseBounds) -> bool {
        self.amplitude <= bounds.amp_max * (1.0 + 1e-12)
            && self.duration >= bounds.t_min * (1.0 - 1e-12)
            && self.duration <= bounds.t_max * (1.0 + 1e-12)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseBlockJson {
    pub amp_khz: f64,
    pub phase_deg: f64,
    pub dur_us: f64,
}

impl From<PulseBlock> for PulseBlockJson {
    fn from(b: PulseBlock) -> Self {
        Self { amp_khz: to_khz(b.amplitude), phase_deg: b.phase.to_degrees(), dur_us: b.duration * 1e6 }
    }
}

impl TryFrom<PulseBlockJson> for PulseBlock {
    type Error = Error;
    fn try_from(j: PulseBlockJson) -> Result<Self> {
        PulseBlock::new(khz(j.amp_khz), j.phase_deg.to_radians(), j.dur_us * 1e-6)
    }
}

/// Concatenated rf blocks; block 0 is applied first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<PulseBlock>", into = "Vec<PulseBlock>")]
pub struct PulseSequence {
    blocks: Vec<PulseBlock>,
}

impl PulseSequence {
    pub fn new(blocks: Vec<PulseBlock>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::EmptySequence);
        }
        Ok(Self { blocks })
    }

    pub fn blocks(&self) -> &[PulseBlock] {
        &self.blocks
    }

    pub fn total_duration(&self) -> f64 {
        self.blocks.iter().map(|b| b.duration).sum()
    }

    /// Reversed order with phases shifted by π: undoes the sequence when
    /// the rf term is the only interaction.
    pub fn mirrored(&self) -> PulseSequence {
        let blocks = self.blocks.iter().rev().map(|b| PulseBlock { phase: b.phase + PI, ..*b }).collect();
        PulseSequence { blocks }
    }
}

impl TryFrom<Vec<PulseBlock>> for PulseSequence {
    type Error = Error;
    fn try_from(blocks: Vec<PulseBlock>) -> Result<Self> {
        PulseSequence::new(blocks)
    }
}

impl From<PulseSequence> for Vec<PulseBlock> {
    fn from(s: PulseSequence) -> Self {
        s.blocks
    }
}

/// H/ħ = −ω_L·Iz + (ω_Q/6)(3Iz² − I²).
pub fn static_hamiltonian(sys: &SpinSystem) -> CMat {
    sys.quadrupolar_term() - &sys.ops.iz * real(sys.larmor)
}

/// H_rot/ħ = (ω_Q/6)(3Iz² − I²) + δ·Iz + ω₁(Ix cos φ + Iy sin φ).
pub fn rotating_frame_hamiltonian(sys: &SpinSystem, b: &PulseBlock) -> CMat {
    let ops = &sys.ops;
    let rf = &ops.ix * real(b.amplitude * b.phase.cos()) + &ops.iy * real(b.amplitude * b.phase.sin());
    sys.quadrupolar_term() + &ops.iz * real(sys.offset) + rf
}

/// exp(−iHt) by Hermitian eigendecomposition.
pub fn propagator(h: &CMat, t: f64) -> Result<Unitary> {
    if !h.is_square() {
        return Err(Error::DimensionMismatch { expected: h.nrows(), found: h.ncols() });
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("evolution time {t} must be >= 0")));
    }
    let defect = linalg::hermiticity_defect(h);
    if defect > 1e-10 * linalg::frobenius(h).max(1.0) {
        return Err(Error::NotHermitian(defect));
    }
    if t == 0.0 {
        return Unitary::identity(h.nrows());
    }
    let u = linalg::hermitian_function(h, |lambda| C64::from_polar(1.0, -lambda * t));
    Ok(Unitary::from_matrix_unchecked(u))
}

/// Precomputed pieces for fast block propagators.
///
/// The rotating-frame Hamiltonian is e^{−iφIz}(H_Q + δIz + ω₁Ix)e^{iφIz},
/// and the bracket is real symmetric, so each block only needs a real
/// symmetric eigensolve plus diagonal phase factors.
#[derive(Clone, Debug)]
pub struct BlockKernel {
    diag: Vec<f64>,
    ix: DMatrix<f64>,
    m: Vec<f64>,
}

impl BlockKernel {
    pub fn new(sys: &SpinSystem) -> Self {
        let d = sys.dim();
        let hq = sys.quadrupolar_term();
        let m = sys.spin.m_values();
        let diag = (0..d).map(|i| hq[(i, i)].re + sys.offset * m[i]).collect();
        let ix = DMatrix::from_fn(d, d, |r, c| sys.ops.ix[(r, c)].re);
        Self { diag, ix, m }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn propagator(&self, b: &PulseBlock) -> CMat {
        let d = self.dim();
        let mut h = &self.ix * b.amplitude;
        for i in 0..d {
            h[(i, i)] += self.diag[i];
        }
        let eig = h.symmetric_eigen();
        let v = &eig.eigenvectors;
        let phases: Vec<C64> = eig.eigenvalues.iter().map(|&l| C64::from_polar(1.0, -l * b.duration)).collect();
        let mut u = CMat::from_element(d, d, ZERO);
        for j in 0..d {
            for k in 0..d {
                let mut acc = ZERO;
                for (n, p) in phases.iter().enumerate() {
                    acc += p * (v[(j, n)] * v[(k, n)]);
                }
                // rotate the x-axis drive to phase φ
                u[(j, k)] = acc * C64::from_polar(1.0, -b.phase * (self.m[j] - self.m[k]));
            }
        }
        u
    }

    /// U_n···U₁ for blocks applied in order.
    pub fn sequence(&self, blocks: &[PulseBlock]) -> CMat {
        let mut total = linalg::identity(self.dim());
        for b in blocks {
            total = self.propagator(b) * total;
        }
        total
    }
}

pub fn block_propagator(sys: &SpinSystem, b: &PulseBlock) -> Unitary {
    Unitary::from_matrix_unchecked(BlockKernel::new(sys).propagator(b))
}

/// Ordered product of block propagators, first block applied first.
pub fn sequence_propagator(sys: &SpinSystem, seq: &PulseSequence) -> Result<Unitary> {
    if seq.blocks.is_empty() {
        return Err(Error::EmptySequence);
    }
    Ok(Unitary::from_matrix_unchecked(BlockKernel::new(sys).sequence(&seq.blocks)))
}

/// ħω_L/(4 k_B T).
pub fn epsilon_of(temperature: f64, larmor: f64) -> Result<f64> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::InvalidParameter(format!("temperature {temperature} K must be positive")));
    }
    Ok(HBAR * larmor.abs() / (4.0 * BOLTZMANN * temperature))
}

/// Room-temperature polarization model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalModel {
    pub epsilon: f64,
    pub temperature: f64,
    pub larmor_freq: f64,
}

impl ThermalModel {
    pub fn new(temperature: f64, larmor_freq: f64) -> Result<Self> {
        let epsilon = epsilon_of(temperature, larmor_freq)?;
        if !(epsilon > 0.0) {
            return Err(Error::InvalidParameter("Larmor frequency must be nonzero".into()));
        }
        Ok(Self { epsilon, temperature, larmor_freq })
    }

    /// High-temperature equilibrium ρ ≈ I/d + (4ε/d)·Iz, which is
    /// I/4 + ε·Iz for a ququart.
    pub fn equilibrium(&self, s: Spin) -> Result<DensityMatrix> {
        let d = s.dim();
        let ops = spin_operators(s);
        let m = linalg::identity(d) / real(d as f64) + ops.iz * real(4.0 * self.epsilon / d as f64);
        DensityMatrix::new(m)
    }
}

/// ρ = ((1−ε)/d)·I + ε|i⟩⟨i| for 1-based `label`.
pub fn pseudo_pure(dim: usize, label: usize, eps: f64) -> Result<DensityMatrix> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon {eps} outside (0, 1]")));
    }
    QuditState::basis(dim, label)?;
    let mut m = linalg::identity(dim) * real((1.0 - eps) / dim as f64);
    m[(label - 1, label - 1)] += real(eps);
    Ok(DensityMatrix::from_matrix_unchecked(m))
}

/// UρU†, evolving only the traceless part so I/d is carried over exactly.
pub fn evolve_density(rho: &DensityMatrix, u: &Unitary) -> Result<DensityMatrix> {
    let d = rho.dim();
    if u.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: u.dim() });
    }
    let dev = rho.deviation();
    let moved = u.matrix() * dev * u.matrix().adjoint();
    let herm = (&moved + moved.adjoint()) * real(0.5);
    Ok(DensityMatrix::from_matrix_unchecked(linalg::identity(d) / real(d as f64) + herm))
}

/// Deviation matrix of a pseudo-pure ensemble rescaled to units of ε:
/// I/d + (ρ − I/d)/ε. For ρ = ((1−ε)/d)I + ε ρ₁ this returns ρ₁.
pub fn deviation_in_epsilon_units(rho: &DensityMatrix, eps: f64) -> Result<DensityMatrix> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon {eps} must be positive")));
    }
    let d = rho.dim();
    let dev = rho.deviation() / real(eps);
    // dividing by a tiny ε magnifies the rounding left in the trace
    let drift = linalg::trace(&dev) / real(d as f64);
    let m = linalg::identity(d) * (real(1.0 / d as f64) - drift) + dev;
    DensityMatrix::new(m)
}
