use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative residual norm below which a column counts as a linear
/// combination of the ones before it.
const RANK_TOL: f64 = 1e-10;

/// Modified Gram-Schmidt with one re-orthogonalization pass. Returns the
/// orthonormal basis of the accepted columns and the indices rejected as
/// collinear with earlier columns.
pub(crate) fn orthonormal_basis(columns: &[DVector<f64>]) -> (Vec<DVector<f64>>, Vec<usize>) {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut rejected = Vec::new();
    for (j, col) in columns.iter().enumerate() {
        let norm0 = col.norm();
        let mut v = col.clone();
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&v);
                v.axpy(-c, q, 1.0);
            }
        }
        let norm = v.norm();
        if norm0 == 0.0 || norm <= RANK_TOL * norm0 {
            rejected.push(j);
        } else {
            basis.push(v / norm);
        }
    }
    (basis, rejected)
}

/// Names of design columns that are (numerically) linear combinations of
/// earlier columns.
pub fn collinear_columns(x: &DMatrix<f64>, names: &[String]) -> Vec<String> {
    let cols: Vec<DVector<f64>> = x.column_iter().map(|c| c.into_owned()).collect();
    orthonormal_basis(&cols).1.into_iter().map(|j| names[j].clone()).collect()
}

/// Residual of `target` after projection onto span(`basis`).
pub(crate) fn project_out(basis: &[DVector<f64>], target: &DVector<f64>) -> DVector<f64> {
    let mut v = target.clone();
    for _ in 0..2 {
        for q in basis {
            let c = q.dot(&v);
            v.axpy(-c, q, 1.0);
        }
    }
    v
}

/// Least squares through Householder QR. Also returns (X'X)^-1 = R^-1 R^-T.
pub(crate) fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>, names: &[String]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (n, p) = x.shape();
    if n <= p {
        return Err(Error::InvalidArgument(format!("need more observations ({n}) than terms ({p})")));
    }
    let collinear = collinear_columns(x, names);
    if !collinear.is_empty() {
        return Err(Error::RankDeficient(collinear));
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let qty = qr.q().transpose() * y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Singular("triangular factor is singular".into()))?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| Error::Singular("triangular factor is singular".into()))?;
    let xtx_inv = &r_inv * r_inv.transpose();
    Ok((beta, xtx_inv))
}
