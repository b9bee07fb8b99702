//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// A state vector in `R^n` with the standard inner product.
pub type Point = DVector<f64>;

/// Dense real matrix.
pub type Matrix = DMatrix<f64>;

pub fn point(coords: &[f64]) -> Point {
    DVector::from_column_slice(coords)
}

pub fn check_dim(expected: usize, x: &Point) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch { expected, got: x.len() });
    }
    Ok(())
}

pub fn check_finite(x: &Point, what: &'static str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub fn symmetric_part(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

pub fn is_symmetric(m: &Matrix, tol: f64) -> bool {
    m.is_square() && (m - m.transpose()).amax() <= tol * (1.0 + m.amax())
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &Matrix) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn min_sym_eigenvalue(m: &Matrix) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(0.0)
}

pub fn max_sym_eigenvalue(m: &Matrix) -> f64 {
    sym_eigenvalues(m).last().copied().unwrap_or(0.0)
}

/// Largest singular value.
pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.singular_values().iter().fold(0.0_f64, |acc, s| acc.max(*s))
}

/// Orthonormal basis of the (numerical) kernel of a symmetric PSD matrix.
pub fn kernel_basis(m: &Matrix, tol: f64) -> Vec<Point> {
    let eig = SymmetricEigen::new(m.clone());
    let scale = 1.0 + eig.eigenvalues.amax();
    eig.eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, ev)| ev.abs() <= tol * scale)
        .map(|(i, _)| eig.eigenvectors.column(i).into_owned())
        .collect()
}

/// Modified Gram-Schmidt. Returns an error if the vectors are linearly dependent.
pub fn orthonormalize(vectors: &[Point]) -> Result<Vec<Point>> {
    let mut out: Vec<Point> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let mut u = v.clone();
        for b in &out {
            let c = u.dot(b);
            u.axpy(-c, b, 1.0);
        }
        let n = u.norm();
        if n <= 1e-12 * (1.0 + v.norm()) {
            return Err(Error::InvalidDescriptor(
                "affine subspace directions are linearly dependent".into(),
            ));
        }
        out.push(u / n);
    }
    Ok(out)
}

pub fn max_orthonormality_drift(basis: &[Point]) -> f64 {
    let mut drift = 0.0_f64;
    for (i, a) in basis.iter().enumerate() {
        for (j, b) in basis.iter().enumerate().skip(i) {
            let target = if i == j { 1.0 } else { 0.0 };
            drift = drift.max((a.dot(b) - target).abs());
        }
    }
    drift
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::InvalidDescriptor("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}
