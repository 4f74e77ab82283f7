//! Thin helpers over `nalgebra` for the small dense problems that show up
//! everywhere: numerical rank, extreme eigenvalues, linear solves.

use nalgebra::{DMatrix, DVector};

pub fn matrix(rows: &[Vec<f64>], ncols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j])
}

/// Matrix whose columns are the given vectors.
pub fn from_columns(cols: &[&[f64]]) -> DMatrix<f64> {
    let nrows = cols.first().map_or(0, |c| c.len());
    DMatrix::from_fn(nrows, cols.len(), |i, j| cols[j][i])
}

pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    m.clone().svd(false, false).singular_values.iter().copied().collect()
}

/// Number of singular values above `tol`.
pub fn rank(m: &DMatrix<f64>, tol: f64) -> usize {
    singular_values(m).into_iter().filter(|s| *s > tol).count()
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// 2-norm condition number; infinite for singular input.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let s = singular_values(m);
    let max = s.iter().copied().fold(0.0, f64::max);
    let min = s.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn solve(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    m.clone().lu().solve(rhs)
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
