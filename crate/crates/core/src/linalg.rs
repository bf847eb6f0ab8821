//! Small dense complex linear algebra shared by every module.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn identity(d: usize) -> CMat {
    CMat::identity(d, d)
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn trace(m: &CMat) -> C64 {
    m.diagonal().iter().sum()
}

/// Tr(A·B) without forming the product.
pub fn trace_product(a: &CMat, b: &CMat) -> C64 {
    let d = a.nrows();
    let mut acc = ZERO;
    for i in 0..d {
        for k in 0..d {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// ‖M − M†‖_F.
pub fn hermiticity_defect(m: &CMat) -> f64 {
    frobenius(&(m - m.adjoint()))
}

/// ‖U†U − I‖_F.
pub fn unitarity_defect(u: &CMat) -> f64 {
    frobenius(&(u.adjoint() * u - identity(u.nrows())))
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    // symmetrize so rounding noise in the input cannot leak into the solver
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(m.nrows(), m.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Applies `f` to the spectrum of a Hermitian matrix: V f(Λ) V†.
pub fn hermitian_function(m: &CMat, f: impl Fn(f64) -> C64) -> CMat {
    let (values, vectors) = hermitian_eigen(m);
    let d = m.nrows();
    let mut scaled = vectors.clone();
    for (c, &lambda) in values.iter().enumerate() {
        let w = f(lambda);
        for r in 0..d {
            scaled[(r, c)] *= w;
        }
    }
    scaled * vectors.adjoint()
}

/// Square root of a positive semidefinite Hermitian matrix, negative rounding noise clipped.
pub fn psd_sqrt(m: &CMat) -> CMat {
    hermitian_function(m, |x| C64::new(x.max(0.0).sqrt(), 0.0))
}

pub fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}
