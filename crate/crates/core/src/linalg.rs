//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Condition number above which a symmetric matrix is treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Average of a square matrix and its transpose.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn eigenvalues_sym(m: &DMatrix<f64>) -> DVector<f64> {
    if m.is_empty() {
        return DVector::zeros(0);
    }
    symmetrize(m).symmetric_eigenvalues()
}

/// Smallest eigenvalue of the symmetric part of `m` (0 for an empty matrix).
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    eigenvalues_sym(m).iter().copied().fold(f64::INFINITY, f64::min)
}

/// Ratio of extreme eigenvalues of a symmetric matrix; infinite when the
/// smallest eigenvalue is not strictly positive.
pub fn condition_number_sym(m: &DMatrix<f64>) -> f64 {
    let ev = eigenvalues_sym(m);
    let max = ev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = ev.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) || !max.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Inverse of a symmetric positive-definite matrix through its
/// eigendecomposition. Refuses matrices whose condition number reaches
/// [`MAX_CONDITION`]; no pseudo-inverse fallback.
pub fn inverse_spd(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let sym = symmetrize(m);
    if sym.iter().any(|v| !v.is_finite()) {
        return Err(Error::Evaluation(format!("{what} has non-finite entries")));
    }
    let eig = sym.symmetric_eigen();
    let max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition < MAX_CONDITION) {
        return Err(Error::Singular {
            what: what.to_string(),
            condition,
        });
    }
    let inv_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l));
    Ok(symmetrize(&(&eig.eigenvectors * inv_diag * eig.eigenvectors.transpose())))
}

/// Inverse of a general square matrix via LU, with a condition estimate from
/// singular values.
pub fn inverse_general(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Evaluation(format!("{what} has non-finite entries")));
    }
    let sv = m.clone().singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition < MAX_CONDITION) {
        return Err(Error::Singular {
            what: what.to_string(),
            condition,
        });
    }
    m.clone().try_inverse().ok_or(Error::Singular {
        what: what.to_string(),
        condition,
    })
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Outer product `a b'` as a matrix.
pub fn outer(a: &DVector<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    a * b.transpose()
}
