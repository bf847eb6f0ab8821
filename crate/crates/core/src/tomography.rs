//! Simulated NMR state tomography with linear least-squares reconstruction.
//!
//! The deviation ρ − I/d is expanded in an orthonormal basis of d²−1
//! traceless Hermitian matrices (generalized Gell-Mann, normalized to
//! Tr(B_j B_k) = δ_jk). A readout setting is a rotation R followed by the
//! detection of a traceless observable O, so it measures the linear
//! functional Tr(O R ρ R†) of those coefficients.
//!
//! Two readout sets are provided. The operator-basis set measures each
//! coefficient directly. The NMR set applies hard global rotations
//! exp(−iθ(Ix cos φ + Iy sin φ)) and detects the x and y magnetization of
//! each resolved single-quantum line, the way a quadrupolar spectrum
//! separates its 2s satellite and central transitions.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, real, CMat, C64};
use crate::qudit::{DensityMatrix, Unitary};
use crate::spin::{propagator, spin_operators, Spin};

/// Condition number above which a reconstruction carries a warning.
pub const ILL_CONDITIONED: f64 = 1e6;

const RANK_TOL: f64 = 1e-10;

/// Orthonormal traceless Hermitian basis: symmetric, antisymmetric, then diagonal elements.
pub fn gell_mann_basis(d: usize) -> Vec<CMat> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(d * d - 1);
    for j in 0..d {
        for k in j + 1..d {
            let mut m = CMat::zeros(d, d);
            m[(j, k)] = real(s);
            m[(k, j)] = real(s);
            out.push(m);
        }
    }
    for j in 0..d {
        for k in j + 1..d {
            let mut m = CMat::zeros(d, d);
            m[(j, k)] = C64::new(0.0, -s);
            m[(k, j)] = C64::new(0.0, s);
            out.push(m);
        }
    }
    for l in 1..d {
        let norm = 1.0 / ((l * (l + 1)) as f64).sqrt();
        let mut m = CMat::zeros(d, d);
        for i in 0..l {
            m[(i, i)] = real(norm);
        }
        m[(l, l)] = real(-(l as f64) * norm);
        out.push(m);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    Ix,
    Iy,
}

/// What a readout setting does, in lab terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReadoutKind {
    /// Global rotation by `theta` about the axis at azimuth `phi`, then
    /// detection of `axis` magnetization on transition `line` (1-based,
    /// between levels `line` and `line + 1`).
    Nmr { theta: f64, phi: f64, axis: Axis, line: usize },
    /// Direct readout of basis component `component` (0-based).
    Basis { component: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReadoutSetting {
    pub kind: ReadoutKind,
    pub rotation: Unitary,
    pub observable: CMat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TomographyMode {
    #[default]
    Nmr,
    OperatorBasis,
}

/// A complete readout set and its design matrix.
#[derive(Clone, Debug)]
pub struct ReadoutSet {
    dim: usize,
    settings: Vec<ReadoutSetting>,
    basis: Vec<CMat>,
    design: DMatrix<f64>,
    rank: usize,
    condition_number: f64,
}

impl ReadoutSet {
    pub fn new(dim: usize, settings: Vec<ReadoutSetting>) -> Result<Self> {
        let basis = gell_mann_basis(dim);
        for s in &settings {
            if s.rotation.dim() != dim || s.observable.nrows() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: s.rotation.dim() });
            }
        }
        let design = DMatrix::from_fn(settings.len(), basis.len(), |r, k| {
            let s = &settings[r];
            let moved = s.rotation.matrix() * &basis[k] * s.rotation.matrix().adjoint();
            linalg::trace_product(&s.observable, &moved).re
        });
        let (rank, condition_number) = rank_and_condition(&design);
        let required = dim * dim - 1;
        if rank < required {
            return Err(Error::RankDeficient { rank, required });
        }
        Ok(Self { dim, settings, basis, design, rank, condition_number })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn settings(&self) -> &[ReadoutSetting] {
        &self.settings
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn condition_number(&self) -> f64 {
        self.condition_number
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }
}

fn rank_and_condition(a: &DMatrix<f64>) -> (usize, f64) {
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return (0, f64::INFINITY);
    }
    let kept: Vec<f64> = sv.iter().cloned().filter(|&s| s > RANK_TOL * max).collect();
    let min = kept.iter().cloned().fold(f64::INFINITY, f64::min);
    let full = sv.len();
    let cond = if kept.len() == full { max / min } else { f64::INFINITY };
    (kept.len(), cond)
}

/// Transverse magnetization of one resolved line: `axis` restricted to
/// the level pair (line−1, line), 0-based.
pub fn line_observable(s: Spin, axis: Axis, line: usize) -> CMat {
    let ops = spin_operators(s);
    let full = match axis {
        Axis::Ix => ops.ix,
        Axis::Iy => ops.iy,
    };
    let d = s.dim();
    let mut m = CMat::zeros(d, d);
    m[(line - 1, line)] = full[(line - 1, line)];
    m[(line, line - 1)] = full[(line, line - 1)];
    m
}

/// exp(−iθ(Ix cos φ + Iy sin φ)).
pub fn hard_pulse(s: Spin, theta: f64, phi: f64) -> Result<Unitary> {
    let ops = spin_operators(s);
    let axis = &ops.ix * real(phi.cos()) + &ops.iy * real(phi.sin());
    propagator(&axis, theta)
}

/// Rotation grid of the NMR readout: the unrotated spectrum plus three
/// nutation angles at four azimuths.
pub fn nmr_grid() -> Vec<(f64, f64)> {
    let mut grid = vec![(0.0, 0.0)];
    for theta in [PI / 4.0, PI / 2.0, 3.0 * PI / 4.0] {
        for phi in [0.0, PI / 4.0, PI / 2.0, 3.0 * PI / 4.0] {
            grid.push((theta, phi));
        }
    }
    grid
}

pub fn nmr_setting(s: Spin, theta: f64, phi: f64, axis: Axis, line: usize) -> Result<ReadoutSetting> {
    if line == 0 || line >= s.dim() {
        return Err(Error::InvalidParameter(format!("line {line} outside 1..{}", s.dim())));
    }
    Ok(ReadoutSetting {
        kind: ReadoutKind::Nmr { theta, phi, axis, line },
        rotation: hard_pulse(s, theta, phi)?,
        observable: line_observable(s, axis, line),
    })
}

/// The standard readout set for dimension `d`; construction fails unless
/// the design has full rank d²−1.
pub fn default_readout_set(d: usize, mode: TomographyMode) -> Result<ReadoutSet> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    let settings = match mode {
        TomographyMode::OperatorBasis => gell_mann_basis(d)
            .into_iter()
            .enumerate()
            .map(|(component, b)| ReadoutSetting {
                kind: ReadoutKind::Basis { component },
                rotation: Unitary::identity(d).expect("d >= 2"),
                observable: b,
            })
            .collect(),
        TomographyMode::Nmr => {
            let s = Spin::from_twice((d - 1) as u32)?;
            let mut v = Vec::new();
            for (theta, phi) in nmr_grid() {
                for line in 1..d {
                    for axis in [Axis::Ix, Axis::Iy] {
                        v.push(nmr_setting(s, theta, phi, axis, line)?);
                    }
                }
            }
            v
        }
    };
    ReadoutSet::new(d, settings)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TomographyRecord {
    pub setting: ReadoutSetting,
    /// Expectation value in units of ε.
    pub value: f64,
    pub noise_sigma: f64,
}

/// Measures Tr(O R ρ R†) for each setting, adding i.i.d. Gaussian noise of
/// width `noise_sigma`. Only the traceless part of ρ is propagated.
pub fn simulate_measurements(
    rho: &DensityMatrix,
    settings: &[ReadoutSetting],
    noise_sigma: f64,
    rng_seed: u64,
) -> Result<Vec<TomographyRecord>> {
    simulate_deviation(&rho.deviation(), settings, noise_sigma, rng_seed)
}

/// As [`simulate_measurements`] for an arbitrary Hermitian input; any
/// multiple of the identity it carries is invisible to traceless detectors.
pub fn simulate_deviation(
    dev: &CMat,
    settings: &[ReadoutSetting],
    noise_sigma: f64,
    rng_seed: u64,
) -> Result<Vec<TomographyRecord>> {
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise_sigma {noise_sigma} must be >= 0")));
    }
    let noise = Normal::new(0.0, noise_sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    settings
        .iter()
        .map(|s| {
            if s.rotation.dim() != dev.nrows() {
                return Err(Error::DimensionMismatch { expected: dev.nrows(), found: s.rotation.dim() });
            }
            let moved = s.rotation.matrix() * dev * s.rotation.matrix().adjoint();
            let ideal = linalg::trace_product(&s.observable, &moved).re;
            let eta = if noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            Ok(TomographyRecord { setting: s.clone(), value: ideal + eta, noise_sigma })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct ReconstructOptions {
    /// Clip negative eigenvalues and renormalize when the raw estimate is unphysical.
    pub project_positive: bool,
}

#[derive(Clone, Debug)]
pub struct ReconstructionReport {
    /// Raw least-squares estimate: Hermitian with unit trace, possibly not positive.
    pub estimate: CMat,
    /// Physical estimate; `None` only when the raw estimate is unphysical and
    /// projection was not requested.
    pub rho_hat: Option<DensityMatrix>,
    pub projected: bool,
    pub min_eigenvalue: f64,
    pub residual_norm: f64,
    pub condition_number: f64,
    pub settings_rank: usize,
    pub warnings: Vec<String>,
}

/// Linear least-squares reconstruction from a set of records.
pub fn reconstruct(records: &[TomographyRecord], opts: ReconstructOptions) -> Result<ReconstructionReport> {
    let first = records.first().ok_or(Error::RankDeficient { rank: 0, required: 3 })?;
    let d = first.setting.rotation.dim();
    let set = ReadoutSet::new(d, records.iter().map(|r| r.setting.clone()).collect())?;
    let y = DVector::from_iterator(records.len(), records.iter().map(|r| r.value));

    let svd = set.design.clone().svd(true, true);
    let coeffs = svd.solve(&y, RANK_TOL * svd.singular_values.max()).map_err(|e| Error::InvalidParameter(e.into()))?;
    let residual_norm = (&set.design * &coeffs - &y).norm();

    let mut estimate = linalg::identity(d) / real(d as f64);
    for (c, b) in coeffs.iter().zip(&set.basis) {
        estimate += b * real(*c);
    }
    let (values, _) = linalg::hermitian_eigen(&estimate);
    let min_eigenvalue = values[0];

    let mut warnings = Vec::new();
    if set.condition_number > ILL_CONDITIONED {
        warnings.push(format!("ill-conditioned readout design (condition number {:.3e})", set.condition_number));
    }
    let (rho_hat, projected) = match DensityMatrix::new(estimate.clone()) {
        Ok(rho) => (Some(rho), false),
        Err(_) if opts.project_positive => (Some(DensityMatrix::project_positive(&estimate)?), true),
        Err(_) => {
            warnings.push(format!("estimate is not positive (min eigenvalue {min_eigenvalue:.3e})"));
            (None, false)
        }
    };
    Ok(ReconstructionReport {
        estimate,
        rho_hat,
        projected,
        min_eigenvalue,
        residual_norm,
        condition_number: set.condition_number,
        settings_rank: set.rank,
        warnings,
    })
}

/// Lab-facing JSON form of a record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_rad: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_rad: Option<f64>,
    /// "Ix", "Iy", or "basis" for operator-basis readout.
    pub observable: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component: Option<usize>,
    pub value: f64,
}

impl From<&TomographyRecord> for RecordJson {
    fn from(r: &TomographyRecord) -> Self {
        match r.setting.kind {
            ReadoutKind::Nmr { theta, phi, axis, line } => RecordJson {
                theta_rad: Some(theta),
                phi_rad: Some(phi),
                observable: format!("{axis:?}"),
                line: Some(line),
                component: None,
                value: r.value,
            },
            ReadoutKind::Basis { component } => RecordJson {
                theta_rad: None,
                phi_rad: None,
                observable: "basis".into(),
                line: None,
                component: Some(component),
                value: r.value,
            },
        }
    }
}

/// Rebuilds records for dimension `d` from their JSON form.
pub fn records_from_json(d: usize, records: &[RecordJson]) -> Result<Vec<TomographyRecord>> {
    let s = Spin::from_twice((d.max(2) - 1) as u32)?;
    let basis = gell_mann_basis(d);
    records
        .iter()
        .map(|r| {
            let setting = match r.observable.as_str() {
                "Ix" | "Iy" => {
                    let axis = if r.observable == "Ix" { Axis::Ix } else { Axis::Iy };
                    let missing = || Error::InvalidParameter(format!("record {r:?} lacks rotation or line"));
                    nmr_setting(
                        s,
                        r.theta_rad.ok_or_else(missing)?,
                        r.phi_rad.ok_or_else(missing)?,
                        axis,
                        r.line.ok_or_else(missing)?,
                    )?
                }
                "basis" => {
                    let component = r
                        .component
                        .filter(|&c| c < basis.len())
                        .ok_or_else(|| Error::InvalidParameter(format!("bad basis component in {r:?}")))?;
                    ReadoutSetting {
                        kind: ReadoutKind::Basis { component },
                        rotation: Unitary::identity(d)?,
                        observable: basis[component].clone(),
                    }
                }
                other => return Err(Error::InvalidParameter(format!("unknown observable {other}"))),
            };
            Ok(TomographyRecord { setting, value: r.value, noise_sigma: 0.0 })
        })
        .collect()
}

/// Coefficients c_k = Tr(B_k ρ) of the deviation in the Gell-Mann basis.
pub fn deviation_coefficients(m: &CMat) -> Vec<f64> {
    gell_mann_basis(m.nrows()).iter().map(|b| linalg::trace_product(b, m).re).collect()
}
