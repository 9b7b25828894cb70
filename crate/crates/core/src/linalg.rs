//! Small dense complex linear-algebra helpers shared by the modules.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView2};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CVector = Array1<C64>;
pub type CMatrix = Array2<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn dagger(m: &ArrayView2<C64>) -> CMatrix {
    m.t().mapv(|z| z.conj())
}

pub fn identity(n: usize) -> CMatrix {
    Array2::from_diag_elem(n, C64::new(1.0, 0.0))
}

/// max |(U^dagger U - 1)_ij|
pub fn unitarity_deviation(u: &ArrayView2<C64>) -> f64 {
    let n = u.ncols();
    let g = dagger(u).dot(u);
    let mut dev = 0.0f64;
    for ((i, j), z) in g.indexed_iter() {
        let target = if i == j { 1.0 } else { 0.0 };
        dev = dev.max((z - target).norm());
    }
    debug_assert_eq!(g.nrows(), n);
    dev
}

pub fn max_abs_diff(a: &ArrayView2<C64>, b: &ArrayView2<C64>) -> f64 {
    a.iter().zip(b.iter()).fold(0.0f64, |m, (x, y)| m.max((x - y).norm()))
}

/// max |A - A^dagger|
pub fn hermiticity_deviation(a: &ArrayView2<C64>) -> f64 {
    let mut dev = 0.0f64;
    for ((i, j), z) in a.indexed_iter() {
        dev = dev.max((z - a[[j, i]].conj()).norm());
    }
    dev
}

pub fn trace(a: &ArrayView2<C64>) -> C64 {
    a.diag().sum()
}

pub(crate) fn to_nalgebra(a: &ArrayView2<C64>) -> DMatrix<C64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

/// Largest singular value.
pub fn operator_norm(a: &ArrayView2<C64>) -> f64 {
    to_nalgebra(a).singular_values().iter().cloned().fold(0.0, f64::max)
}

/// Eigenvalues of the Hermitian part of `a`, ascending.
pub fn hermitian_eigenvalues(a: &ArrayView2<C64>) -> Vec<f64> {
    let m = to_nalgebra(a);
    let h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().cloned().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Integer power of a square matrix by repeated squaring.
pub fn matrix_power(a: &ArrayView2<C64>, mut p: usize) -> CMatrix {
    let mut result = identity(a.nrows());
    let mut base = a.to_owned();
    while p > 0 {
        if p & 1 == 1 {
            result = result.dot(&base);
        }
        p >>= 1;
        if p > 0 {
            base = base.dot(&base);
        }
    }
    result
}

pub fn vector_norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}
