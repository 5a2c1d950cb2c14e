//! Small dense linear algebra on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Absolute symmetry tolerance, scaled by `max(1, max |a_ij|)`.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

const JITTER_BASE: f64 = 1e-12;
const JITTER_RETRIES: usize = 3;

pub fn max_asymmetry(m: &Matrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn check_symmetric(m: &Matrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    let scale = m.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let asymmetry = max_asymmetry(m);
    if asymmetry > SYMMETRY_TOLERANCE * scale || !asymmetry.is_finite() {
        return Err(Error::NonSymmetricCovariance { asymmetry });
    }
    Ok(())
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Eigendecomposition `m = U diag(λ) Uᵀ` of a symmetric PSD matrix, with
/// eigenvalues clamped at zero and sorted in descending order.
#[derive(Clone, Debug)]
pub struct SymmetricDecomposition {
    pub rotation: Matrix,
    pub eigenvalues: Vector,
}

impl SymmetricDecomposition {
    pub fn reconstruct(&self) -> Matrix {
        &self.rotation * Matrix::from_diagonal(&self.eigenvalues) * self.rotation.transpose()
    }
}

pub fn svd_symmetric(m: &Matrix) -> Result<SymmetricDecomposition> {
    check_symmetric(m)?;
    let eigen = SymmetricEigen::new(symmetrize(m));
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]));
    let mut rotation = Matrix::zeros(n, n);
    let mut eigenvalues = Vector::zeros(n);
    for (dst, &src) in order.iter().enumerate() {
        rotation.set_column(dst, &eigen.eigenvectors.column(src));
        eigenvalues[dst] = eigen.eigenvalues[src].max(0.0);
    }
    Ok(SymmetricDecomposition {
        rotation,
        eigenvalues,
    })
}

/// Lower-triangular factor `L` with `L Lᵀ = m` for a symmetric positive
/// semi-definite matrix.
///
/// Zero pivots are accepted and produce zero columns, so null directions of
/// the covariance stay exactly deterministic. A clearly negative pivot
/// triggers diagonal jitter of `1e-12 · trace/d`, escalated tenfold up to
/// three times.
pub fn cholesky_psd(m: &Matrix) -> Result<Matrix> {
    check_symmetric(m)?;
    if let Some(l) = factor_psd(m) {
        return Ok(l);
    }
    let n = m.nrows();
    let mut jitter = JITTER_BASE * m.trace() / n as f64;
    for _ in 0..JITTER_RETRIES {
        let mut jittered = m.clone();
        for i in 0..n {
            jittered[(i, i)] += jitter;
        }
        if let Some(l) = factor_psd(&jittered) {
            return Ok(l);
        }
        jitter *= 10.0;
    }
    Err(Error::DecompositionFailure)
}

fn factor_psd(a: &Matrix) -> Option<Matrix> {
    let n = a.nrows();
    let max_diag = (0..n).fold(0.0f64, |acc, i| acc.max(a[(i, i)].abs()));
    let pivot_tol = (n as f64) * f64::EPSILON * max_diag;
    let residual_tol = 1e-7 * max_diag.max(f64::MIN_POSITIVE);
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut pivot = a[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if !pivot.is_finite() || pivot < -pivot_tol {
            return None;
        }
        if pivot <= pivot_tol {
            // Semi-definite direction: the rest of the column must vanish too.
            for i in (j + 1)..n {
                let mut off = a[(i, j)];
                for k in 0..j {
                    off -= l[(i, k)] * l[(j, k)];
                }
                if off.abs() > residual_tol {
                    return None;
                }
            }
            continue;
        }
        let diag = pivot.sqrt();
        l[(j, j)] = diag;
        for i in (j + 1)..n {
            let mut off = a[(i, j)];
            for k in 0..j {
                off -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = off / diag;
        }
    }
    Some(l)
}

/// Unbiased sample covariance of a set of equally sized vectors.
///
/// Returns the zero matrix for fewer than two points.
pub fn sample_covariance(points: &[Vector]) -> Matrix {
    let Some(first) = points.first() else {
        return Matrix::zeros(0, 0);
    };
    let d = first.len();
    let n = points.len();
    if n < 2 {
        return Matrix::zeros(d, d);
    }
    let mut mean = Vector::zeros(d);
    for p in points {
        mean += p;
    }
    mean /= n as f64;
    let mut cov = Matrix::zeros(d, d);
    for p in points {
        let c = p - &mean;
        cov += &c * c.transpose();
    }
    symmetrize(&(cov / (n - 1) as f64))
}

/// Serialize a [`Vector`] as a flat list of numbers.
pub mod vector_serde {
    use super::Vector;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Vector, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vector, D::Error> {
        Ok(Vector::from_vec(Vec::<f64>::deserialize(d)?))
    }
}

/// Serialize a list of [`Vector`]s as nested lists.
pub mod vectors_serde {
    use super::Vector;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Vector], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| x.as_slice()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vector>, D::Error> {
        Ok(Vec::<Vec<f64>>::deserialize(d)?
            .into_iter()
            .map(Vector::from_vec)
            .collect())
    }
}

/// Serialize a square or rectangular [`Matrix`] as a list of rows.
pub mod matrix_serde {
    use super::Matrix;
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &Matrix, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(
            m.row_iter()
                .map(|row| row.iter().copied().collect::<Vec<f64>>()),
        )
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(D::Error::custom("ragged matrix rows"));
        }
        Ok(Matrix::from_row_iterator(
            nrows,
            ncols,
            rows.into_iter().flatten(),
        ))
    }
}
