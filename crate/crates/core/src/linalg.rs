//! Dense linear algebra helpers shared by the classification and
//! equilibrium code: principal minors, tolerant solves, eigenvalue bounds.

use nalgebra::{DMatrix, DVector};

/// Largest absolute entry; 0 for an all-zero matrix.
pub fn max_abs_entry(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, &v| acc.max(v.abs()))
}

/// Boundary tolerance for principal minors: `1e-12 · max|entry|^n`.
/// A minor within `[-tol, tol]` counts as exactly zero.
pub fn minor_tolerance(m: &DMatrix<f64>) -> f64 {
    1e-12 * max_abs_entry(m).powi(m.nrows() as i32)
}

/// Principal submatrix on the given (strictly increasing) index set.
pub fn principal_submatrix(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    let k = idx.len();
    DMatrix::from_fn(k, k, |r, c| m[(idx[r], idx[c])])
}

pub fn principal_minor(m: &DMatrix<f64>, idx: &[usize]) -> f64 {
    principal_submatrix(m, idx).determinant()
}

/// All non-empty index subsets of `0..n`, ordered by (size, lexicographic).
pub fn index_subsets(n: usize) -> Vec<Vec<usize>> {
    assert!(n <= 30, "subset enumeration over {n} indices");
    let mut masks: Vec<u32> = (1..(1u32 << n)).collect();
    masks.sort_by_key(|m| (m.count_ones(), *m));
    masks
        .into_iter()
        .map(|mask| (0..n).filter(|i| mask & (1 << i) != 0).collect())
        .collect()
}

/// Partial-pivoting LU solve with one step of iterative refinement.
pub fn solve_refined(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let lu = a.clone().lu();
    let mut x = lu.solve(b)?;
    let r = b - a * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

/// Real parts of all eigenvalues, ascending.
pub fn eigenvalue_real_parts(m: &DMatrix<f64>) -> Vec<f64> {
    let mut re: Vec<f64> = m.clone().complex_eigenvalues().iter().map(|z| z.re).collect();
    re.sort_by(f64::total_cmp);
    re
}
