//! Small dense linear-algebra helpers shared by the solvers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (m + m.transpose())
}

pub fn inverse(m: &DMatrix<f64>, context: &'static str) -> Result<DMatrix<f64>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(context));
    }
    let inv = m.clone().try_inverse().ok_or(Error::Singular(context))?;
    if inv.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular(context));
    }
    Ok(inv)
}

pub fn solve(m: &DMatrix<f64>, b: &DVector<f64>, context: &'static str) -> Result<DVector<f64>> {
    let x = m.clone().lu().solve(b).ok_or(Error::Singular(context))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular(context));
    }
    Ok(x)
}

/// Eigenvalues of the symmetric part, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(symmetrize(m)).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    *sym_eigenvalues(m).last().expect("non-empty matrix")
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m)[0]
}

pub fn min_singular_value(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Orthonormal basis of the orthogonal complement of `a`, as columns.
/// Built from a Householder reflection mapping `a` onto a coordinate axis.
pub fn orthogonal_complement(a: &DVector<f64>) -> DMatrix<f64> {
    let n = a.len();
    let norm = a.norm();
    if n == 1 {
        return DMatrix::zeros(1, 0);
    }
    if norm == 0.0 {
        return DMatrix::identity(n, n);
    }
    let e = a / norm;
    let mut w = e.clone();
    let sign = if e[0] >= 0.0 { 1.0 } else { -1.0 };
    w[0] += sign;
    let w = w.normalize();
    let reflector = DMatrix::identity(n, n) - 2.0 * &w * w.transpose();
    reflector.columns(1, n - 1).into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complement_is_orthonormal_and_orthogonal() {
        let a = DVector::from_vec(vec![0.3, -2.0, 1.1]);
        let q = orthogonal_complement(&a);
        assert_eq!(q.ncols(), 2);
        let gram = q.transpose() * &q;
        assert!((gram - DMatrix::identity(2, 2)).norm() < 1e-14);
        assert!((q.transpose() * &a).norm() < 1e-14);
    }

    #[test]
    fn complement_in_one_dimension_is_empty() {
        assert_eq!(orthogonal_complement(&DVector::from_vec(vec![2.0])).ncols(), 0);
    }

    #[test]
    fn singular_inverse_is_reported() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert_eq!(inverse(&m, "test"), Err(Error::Singular("test")));
    }
}
