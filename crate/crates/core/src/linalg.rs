//! Dense vector helpers on `&[f64]`. Reductions run in index order so results
//! are reproducible bit-for-bit.

use nalgebra::DMatrix;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// Row-major dense matrix-vector product.
pub fn matvec(rows: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    rows.iter().map(|r| dot(r, x)).collect()
}

/// Transposed product `Aᵀ y` for a row-major `A`.
pub fn matvec_t(rows: &[Vec<f64>], y: &[f64], ncols: usize) -> Vec<f64> {
    let mut out = vec![0.0; ncols];
    for (r, yi) in rows.iter().zip(y) {
        axpy(*yi, r, &mut out);
    }
    out
}

fn to_dmatrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j])
}

/// Largest singular value of a row-major matrix.
pub fn spectral_norm(rows: &[Vec<f64>]) -> f64 {
    if rows.is_empty() || rows[0].is_empty() {
        return 0.0;
    }
    to_dmatrix(rows)
        .singular_values()
        .iter()
        .fold(0.0_f64, |m, s| m.max(*s))
}

/// Smallest eigenvalue of the symmetric part of a square matrix.
pub fn min_symmetric_eigenvalue(rows: &[Vec<f64>]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let m = to_dmatrix(rows);
    let sym = (&m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues()
        .iter()
        .fold(f64::INFINITY, |a, b| a.min(*b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_norm_of_diagonal() {
        let a = vec![vec![3.0, 0.0], vec![0.0, -5.0]];
        assert!((spectral_norm(&a) - 5.0).abs() < 1e-12);
        assert!((min_symmetric_eigenvalue(&a) + 5.0).abs() < 1e-12);
    }

    #[test]
    fn transpose_product_matches_columns() {
        let a = vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]];
        assert_eq!(matvec_t(&a, &[1.0, 0.0, 1.0], 2), vec![6.0, 8.0]);
        assert_eq!(matvec(&a, &[1.0, 1.0]), vec![3.0, 7.0, 11.0]);
    }
}
