//! Small dense helpers on top of nalgebra's dynamically sized types.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Replace `m` by `(m + m')/2`.
pub fn symmetrize(m: &mut Matrix) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Infinity norm (max absolute row sum).
pub fn norm_inf(m: &Matrix) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

pub fn max_abs_vec(v: &Vector) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// `‖m − m'‖∞ ≤ tol·(1 + ‖m‖∞)`
pub fn is_symmetric(m: &Matrix, tol: f64) -> bool {
    m.is_square() && norm_inf(&(m - m.transpose())) <= tol * (1.0 + norm_inf(m))
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_eigenvalue(m: &Matrix) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let mut s = m.clone();
    symmetrize(&mut s);
    SymmetricEigen::new(s)
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &v| a.min(v))
}

/// Largest absolute eigenvalue of the symmetric part of `m` (its 2-norm).
pub fn spectral_norm_sym(m: &Matrix) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let mut s = m.clone();
    symmetrize(&mut s);
    SymmetricEigen::new(s)
        .eigenvalues
        .iter()
        .fold(0.0, |a, &v| a.max(v.abs()))
}

/// All eigenvalues ≥ −tol·‖m‖₂.
pub fn is_psd(m: &Matrix, tol: f64) -> bool {
    min_eigenvalue(m) >= -tol * spectral_norm_sym(m).max(f64::MIN_POSITIVE)
}

pub fn is_diagonal(m: &Matrix) -> bool {
    m.is_square()
        && (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| i == j || m[(i, j)] == 0.0))
}

/// Norm-wise relative difference `‖a − b‖max / ‖b‖max`; zero when both vanish.
pub fn rel_diff(a: &Matrix, b: &Matrix) -> f64 {
    let d = max_abs(&(a - b));
    if d == 0.0 {
        return 0.0;
    }
    d / max_abs(a).max(max_abs(b))
}

pub fn rel_diff_vec(a: &Vector, b: &Vector) -> f64 {
    let d = max_abs_vec(&(a - b));
    if d == 0.0 {
        return 0.0;
    }
    d / max_abs_vec(a).max(max_abs_vec(b))
}

/// Factor a symmetric PSD matrix as `L L'` with `L` of full column rank,
/// dropping eigen-directions at or below `rel_tol·λmax`.
pub fn psd_factor(m: &Matrix, rel_tol: f64) -> Matrix {
    let n = m.nrows();
    if n == 0 {
        return Matrix::zeros(0, 0);
    }
    let mut s = m.clone();
    symmetrize(&mut s);
    let eig = SymmetricEigen::new(s);
    let lmax = eig.eigenvalues.iter().fold(0.0_f64, |a, &v| a.max(v));
    let keep: Vec<usize> = (0..n)
        .filter(|&i| lmax > 0.0 && eig.eigenvalues[i] > rel_tol * lmax)
        .collect();
    let mut l = Matrix::zeros(n, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        let scale = eig.eigenvalues[i].sqrt();
        for r in 0..n {
            l[(r, c)] = eig.eigenvectors[(r, i)] * scale;
        }
    }
    l
}

/// Upper triangle (row-major, including the diagonal).
pub fn upper_triangle(m: &Matrix) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub fn all_finite(m: &Matrix) -> bool {
    m.iter().all(|v| v.is_finite())
}
