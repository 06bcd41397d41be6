//! Small dense helpers on top of `faer` used throughout the crate.

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::{Mat, Side};

use crate::error::{Error, Result};

pub use num_complex::Complex64 as C64;

/// Dense complex matrix, column-major.
pub type CMat = Mat<C64>;

pub const I: C64 = C64::new(0.0, 1.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const ZERO: C64 = C64::new(0.0, 0.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn zeros(n: usize) -> CMat {
    Mat::zeros(n, n)
}

pub fn identity(n: usize) -> CMat {
    Mat::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
}

pub fn diag(d: &[C64]) -> CMat {
    let n = d.len();
    Mat::from_fn(n, n, |i, j| if i == j { d[i] } else { ZERO })
}

pub fn adjoint(a: &CMat) -> CMat {
    a.adjoint().to_owned()
}

pub fn transpose(a: &CMat) -> CMat {
    a.transpose().to_owned()
}

pub fn scale(a: &CMat, s: C64) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

pub fn max_abs(a: &CMat) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

/// Max-norm of `a - b`.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    m
}

pub fn frobenius(a: &CMat) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

pub fn trace(a: &CMat) -> C64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)]).sum()
}

/// Max-norm of `a - a^dagger`.
pub fn hermiticity_defect(a: &CMat) -> f64 {
    let n = a.nrows();
    let mut m = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            m = m.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    m
}

/// `(a + a^dagger) / 2`.
pub fn hermitian_part(a: &CMat) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5)
}

pub fn is_finite(a: &CMat) -> bool {
    (0..a.ncols()).all(|j| (0..a.nrows()).all(|i| a[(i, j)].re.is_finite() && a[(i, j)].im.is_finite()))
}

pub fn inverse(a: &CMat) -> CMat {
    a.partial_piv_lu().inverse()
}

/// Solves `a x = b`.
pub fn solve(a: &CMat, b: &CMat) -> CMat {
    a.partial_piv_lu().solve(b)
}

pub fn determinant(a: &CMat) -> C64 {
    a.determinant()
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian
/// matrix. Only the lower triangle is read.
pub fn eigh(a: &CMat) -> Result<(Vec<f64>, CMat)> {
    let evd = a.self_adjoint_eigen(Side::Lower).map_err(|_| Error::EigenFailure)?;
    let s = evd.S().column_vector();
    let vals = (0..a.nrows()).map(|i| s[i].re).collect();
    Ok((vals, evd.U().to_owned()))
}

/// `f(a)` for Hermitian `a` with real spectral function `f`.
pub fn hermitian_function(a: &CMat, f: impl Fn(f64) -> C64) -> Result<CMat> {
    let (vals, u) = eigh(a)?;
    let fd: Vec<C64> = vals.iter().map(|&x| f(x)).collect();
    Ok(&(&u * &diag(&fd)) * u.adjoint())
}

/// `u diag(d) w` without forming the diagonal matrix.
pub fn sandwich(u: &CMat, d: &[C64], w: &CMat) -> CMat {
    let scaled = Mat::from_fn(w.nrows(), w.ncols(), |i, j| d[i] * w[(i, j)]);
    u * &scaled
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_and_solve_agree() {
        let a = Mat::from_fn(3, 3, |i, j| c((i * 3 + j) as f64 + if i == j { 5.0 } else { 0.0 }, i as f64 - j as f64));
        let inv = inverse(&a);
        assert!(max_abs_diff(&(&a * &inv), &identity(3)) < 1e-13);
        let b = Mat::from_fn(3, 2, |i, j| c(i as f64, j as f64));
        let x = solve(&a, &b);
        assert!(max_abs_diff(&(&a * &x), &b) < 1e-13);
    }

    #[test]
    fn eigh_reconstructs() {
        let a = Mat::from_fn(4, 4, |i, j| {
            let v = c((i + j) as f64, i as f64 - j as f64);
            if i == j {
                c(v.re, 0.0)
            } else {
                v
            }
        });
        let (vals, u) = eigh(&a).unwrap();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let d: Vec<C64> = vals.iter().map(|&x| c(x, 0.0)).collect();
        assert!(max_abs_diff(&sandwich(&u, &d, &adjoint(&u)), &a) < 1e-12);
    }
}
