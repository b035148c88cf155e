//! Small dense linear-algebra helpers shared by the checkers.

use nalgebra::{DMatrix, DVector};

use crate::{Matrix, Vector};

pub fn diag(entries: &Vector) -> Matrix {
    DMatrix::from_diagonal(entries)
}

pub fn symmetric_part(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Largest eigenvalue of a symmetric matrix together with a unit eigenvector.
pub fn max_symmetric_eigen(m: &Matrix) -> (f64, Vector) {
    let eig = m.clone().symmetric_eigen();
    let mut best = 0;
    for i in 1..eig.eigenvalues.len() {
        if eig.eigenvalues[i] > eig.eigenvalues[best] {
            best = i;
        }
    }
    (eig.eigenvalues[best], eig.eigenvectors.column(best).into_owned())
}

pub fn min_symmetric_eigenvalue(m: &Matrix) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.min()
}

pub fn max_symmetric_eigenvalue(m: &Matrix) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.max()
}

/// Largest real part over the spectrum of a square matrix.
pub fn spectral_abscissa(m: &Matrix) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|c| c.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn is_hurwitz(m: &Matrix) -> bool {
    m.is_square() && m.iter().all(|v| v.is_finite()) && spectral_abscissa(m) < 0.0
}

/// Nonnegative off-diagonal entries.
pub fn is_metzler(m: &Matrix) -> bool {
    let (r, c) = m.shape();
    (0..r).all(|i| (0..c).all(|j| i == j || m[(i, j)] >= 0.0))
}

pub fn is_diagonal(m: &Matrix) -> bool {
    let (r, c) = m.shape();
    (0..r).all(|i| (0..c).all(|j| i == j || m[(i, j)] == 0.0))
}

pub fn select_rows(m: &Matrix, rows: &[usize]) -> Matrix {
    DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

pub fn select_entries(v: &[f64], idx: &[usize]) -> Vector {
    DVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]))
}

pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// `max_ij |a_ij - a_ji|`.
pub fn asymmetry(m: &Matrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..i {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    num_traits::Float::sqrt(dot(a, a))
}
