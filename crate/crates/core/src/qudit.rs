//! States, unitaries and density matrices of a single d-level system.
//!
//! Basis labels are 1-based at the public surface (`|1⟩ … |d⟩`) and
//! 0-based inside matrices and vectors.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, real, CMat, CVec, C64};

/// Tolerance for identities that hold exactly in exact arithmetic.
pub const EXACT_TOL: f64 = 1e-12;
/// Tolerance for eigenvalue positivity of density matrices.
pub const PSD_TOL: f64 = 1e-10;

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        Err(Error::InvalidDimension(d))
    } else {
        Ok(())
    }
}

fn check_same(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Pure state of a single qudit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixJson", into = "MatrixJson")]
pub struct QuditState {
    amplitudes: CVec,
}

impl QuditState {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        check_dim(amplitudes.len())?;
        let norm_sqr: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sqr - 1.0).abs() > EXACT_TOL {
            return Err(Error::NotNormalized(norm_sqr));
        }
        Ok(Self { amplitudes: CVec::from_vec(amplitudes) })
    }

    /// Rescales arbitrary nonzero amplitudes to unit norm.
    pub fn normalized(amplitudes: Vec<C64>) -> Result<Self> {
        check_dim(amplitudes.len())?;
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized(norm * norm));
        }
        Self::new(amplitudes.into_iter().map(|a| a / norm).collect())
    }

    /// Computational basis state `|label⟩`, `label` in `1..=dim`.
    pub fn basis(dim: usize, label: usize) -> Result<Self> {
        check_dim(dim)?;
        if label == 0 || label > dim {
            return Err(Error::BasisLabel { label, dim });
        }
        let mut v = CVec::zeros(dim);
        v[label - 1] = C64::new(1.0, 0.0);
        Ok(Self { amplitudes: v })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        self.amplitudes.as_slice()
    }

    pub fn vector(&self) -> &CVec {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// Multiplies by a global phase `e^{iθ}`.
    pub fn with_phase(&self, theta: f64) -> Self {
        Self { amplitudes: &self.amplitudes * C64::from_polar(1.0, theta) }
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &QuditState) -> Result<C64> {
        check_same(self.dim(), other.dim())?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// |ψ⟩⟨ψ|.
    pub fn projector(&self) -> DensityMatrix {
        DensityMatrix { m: &self.amplitudes * self.amplitudes.adjoint() }
    }
}

/// A d×d unitary matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixJson", into = "MatrixJson")]
pub struct Unitary {
    m: CMat,
}

impl Unitary {
    pub fn new(m: CMat) -> Result<Self> {
        Self::with_tolerance(m, EXACT_TOL)
    }

    pub fn with_tolerance(m: CMat, tol: f64) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
        }
        check_dim(m.nrows())?;
        let defect = linalg::unitarity_defect(&m);
        if !(defect < tol) {
            return Err(Error::NotUnitary(defect));
        }
        Ok(Self { m })
    }

    pub fn identity(d: usize) -> Result<Self> {
        check_dim(d)?;
        Ok(Self { m: linalg::identity(d) })
    }

    /// Diagonal unitary from a list of unit-modulus entries.
    pub fn diagonal(entries: &[C64]) -> Result<Self> {
        Self::new(CMat::from_diagonal(&CVec::from_column_slice(entries)))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.m
    }

    pub fn into_matrix(self) -> CMat {
        self.m
    }

    pub fn dagger(&self) -> Unitary {
        Unitary { m: self.m.adjoint() }
    }

    /// `self · rhs`, i.e. `rhs` acts first.
    pub fn compose(&self, rhs: &Unitary) -> Result<Unitary> {
        check_same(self.dim(), rhs.dim())?;
        Ok(Unitary { m: &self.m * &rhs.m })
    }

    pub fn apply(&self, s: &QuditState) -> Result<QuditState> {
        check_same(self.dim(), s.dim())?;
        Ok(QuditState { amplitudes: &self.m * &s.amplitudes })
    }

    pub fn with_phase(&self, theta: f64) -> Unitary {
        Unitary { m: &self.m * C64::from_polar(1.0, theta) }
    }

    pub fn unitarity_defect(&self) -> f64 {
        linalg::unitarity_defect(&self.m)
    }

    pub(crate) fn from_matrix_unchecked(m: CMat) -> Self {
        Self { m }
    }
}

/// Density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixJson", into = "MatrixJson")]
pub struct DensityMatrix {
    m: CMat,
}

impl DensityMatrix {
    pub fn new(m: CMat) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
        }
        check_dim(m.nrows())?;
        let herm = linalg::hermiticity_defect(&m);
        if !(herm < EXACT_TOL) {
            return Err(Error::NotHermitian(herm));
        }
        let tr = linalg::trace(&m);
        if (tr - real(1.0)).norm() > EXACT_TOL {
            return Err(Error::InvalidDensity(format!("trace {tr}")));
        }
        let (values, _) = linalg::hermitian_eigen(&m);
        if values[0] < -PSD_TOL {
            return Err(Error::InvalidDensity(format!("negative eigenvalue {}", values[0])));
        }
        Ok(Self { m })
    }

    pub fn maximally_mixed(d: usize) -> Result<Self> {
        check_dim(d)?;
        Ok(Self { m: linalg::identity(d) / real(d as f64) })
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.m
    }

    /// Diagonal entries: level populations in basis order.
    pub fn populations(&self) -> Vec<f64> {
        self.m.diagonal().iter().map(|z| z.re).collect()
    }

    pub fn purity(&self) -> f64 {
        linalg::trace_product(&self.m, &self.m).re
    }

    /// Traceless part ρ − I/d.
    pub fn deviation(&self) -> CMat {
        let d = self.dim();
        &self.m - linalg::identity(d) / real(d as f64)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigen(&self.m).0
    }

    /// Projects onto the closest physical state by clipping negative
    /// eigenvalues and renormalizing the trace.
    pub fn project_positive(m: &CMat) -> Result<Self> {
        let clipped = linalg::hermitian_function(m, |x| real(x.max(0.0)));
        let tr = linalg::trace(&clipped).re;
        if tr <= 0.0 {
            return Err(Error::InvalidDensity("no positive spectrum to project onto".into()));
        }
        let herm = (&clipped + clipped.adjoint()) * real(0.5 / tr);
        Ok(Self { m: herm })
    }

    pub(crate) fn from_matrix_unchecked(m: CMat) -> Self {
        Self { m }
    }
}

/// Probability of reading out one basis level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementOutcome {
    /// 1-based level label.
    pub basis_index: usize,
    pub probability: f64,
}

/// Discrete Fourier gate with entries ω^{jk}/√d, ω = exp(+2πi/d).
///
/// Some texts use the opposite sign of the exponent; this one reproduces
/// the ququart gate whose second row is (1, i, −1, −i)/2.
pub fn fourier_unitary(d: usize) -> Result<Unitary> {
    check_dim(d)?;
    let norm = 1.0 / (d as f64).sqrt();
    let m = CMat::from_fn(d, d, |j, k| {
        // reduce the exponent first so large jk does not lose phase accuracy
        let e = (j * k) % d;
        C64::from_polar(norm, 2.0 * PI * e as f64 / d as f64)
    });
    Ok(Unitary { m })
}

pub fn apply(u: &Unitary, s: &QuditState) -> Result<QuditState> {
    u.apply(s)
}

pub fn dagger(u: &Unitary) -> Unitary {
    u.dagger()
}

/// |⟨a|b⟩|².
pub fn state_fidelity(a: &QuditState, b: &QuditState) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr().min(1.0))
}

/// Uhlmann fidelity (Tr√(√ρ σ √ρ))².
///
/// When either argument is pure the closed form ⟨ψ|σ|ψ⟩ is used, which
/// avoids the square-root amplification of rounding noise in the null space.
pub fn density_fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_same(rho.dim(), sigma.dim())?;
    let f = if let Some(psi) = pure_vector(rho) {
        (psi.adjoint() * sigma.matrix() * &psi)[(0, 0)].re
    } else if let Some(psi) = pure_vector(sigma) {
        (psi.adjoint() * rho.matrix() * &psi)[(0, 0)].re
    } else {
        let sqrt_rho = linalg::psd_sqrt(rho.matrix());
        let inner = &sqrt_rho * sigma.matrix() * &sqrt_rho;
        let (values, _) = linalg::hermitian_eigen(&inner);
        let s: f64 = values.iter().map(|x| x.max(0.0).sqrt()).sum();
        s * s
    };
    Ok(f.clamp(0.0, 1.0))
}

/// Normalized overlap Tr(ρσ)/√(Tr ρ² · Tr σ²), the other fidelity in common
/// use for NMR tomography.
pub fn overlap_fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_same(rho.dim(), sigma.dim())?;
    let num = linalg::trace_product(rho.matrix(), sigma.matrix()).re;
    Ok((num / (rho.purity() * sigma.purity()).sqrt()).clamp(0.0, 1.0))
}

fn pure_vector(rho: &DensityMatrix) -> Option<CVec> {
    if (rho.purity() - 1.0).abs() > EXACT_TOL {
        return None;
    }
    let (values, vectors) = linalg::hermitian_eigen(rho.matrix());
    let top = values.len() - 1;
    Some(vectors.column(top).into_owned())
}

/// Born-rule distribution over basis levels, ordered by label.
pub fn measure_distribution(s: &QuditState) -> Vec<MeasurementOutcome> {
    s.amplitudes()
        .iter()
        .enumerate()
        .map(|(j, a)| MeasurementOutcome { basis_index: j + 1, probability: a.norm_sqr() })
        .collect()
}

/// Row-major JSON form shared by states and matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub dim: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl MatrixJson {
    pub fn from_matrix(m: &CMat) -> Self {
        let d = m.nrows();
        let mut re = Vec::with_capacity(d * d);
        let mut im = Vec::with_capacity(d * d);
        for r in 0..d {
            for c in 0..m.ncols() {
                re.push(m[(r, c)].re);
                im.push(m[(r, c)].im);
            }
        }
        Self { dim: d, re, im }
    }

    pub fn to_matrix(&self) -> Result<CMat> {
        let n = self.dim * self.dim;
        if self.re.len() != n || self.im.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: self.re.len().min(self.im.len()) });
        }
        Ok(CMat::from_fn(self.dim, self.dim, |r, c| {
            C64::new(self.re[r * self.dim + c], self.im[r * self.dim + c])
        }))
    }

    fn to_vector(&self) -> Result<Vec<C64>> {
        if self.re.len() != self.dim || self.im.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: self.re.len() });
        }
        Ok(self.re.iter().zip(&self.im).map(|(&r, &i)| C64::new(r, i)).collect())
    }
}

impl From<Unitary> for MatrixJson {
    fn from(u: Unitary) -> Self {
        MatrixJson::from_matrix(&u.m)
    }
}

impl TryFrom<MatrixJson> for Unitary {
    type Error = Error;
    fn try_from(j: MatrixJson) -> Result<Self> {
        Unitary::new(j.to_matrix()?)
    }
}

impl From<DensityMatrix> for MatrixJson {
    fn from(rho: DensityMatrix) -> Self {
        MatrixJson::from_matrix(&rho.m)
    }
}

impl TryFrom<MatrixJson> for DensityMatrix {
    type Error = Error;
    fn try_from(j: MatrixJson) -> Result<Self> {
        DensityMatrix::new(j.to_matrix()?)
    }
}

impl From<QuditState> for MatrixJson {
    fn from(s: QuditState) -> Self {
        MatrixJson {
            dim: s.dim(),
            re: s.amplitudes.iter().map(|a| a.re).collect(),
            im: s.amplitudes.iter().map(|a| a.im).collect(),
        }
    }
}

impl TryFrom<MatrixJson> for QuditState {
    type Error = Error;
    fn try_from(j: MatrixJson) -> Result<Self> {
        QuditState::new(j.to_vector()?)
    }
}
