//! Normwise relative backward errors. Residuals here are `b - A x`.

use crate::error::{dim_err, Error, Result};
use crate::linalg::{Matrix, Vector};

/// `||b - A x|| / (||b|| + ||A||_2 ||x||)`
pub fn nrbe(a: &Matrix, b: &Vector, x: &Vector) -> Result<f64> {
    if !a.is_square() || a.rows() != b.len() || a.cols() != x.len() {
        return Err(dim_err(
            format!("square A matching b ({}) and x ({})", b.len(), x.len()),
            format!("{}x{}", a.rows(), a.cols()),
        ));
    }
    let r = b.sub(&a.matvec(x));
    let den = b.norm() + a.norm2() * x.norm();
    if den == 0.0 {
        return Err(Error::ZeroDenominator("||b|| + ||A|| ||x||"));
    }
    Ok(r.norm() / den)
}

/// Backward error of a least-squares coefficient vector through its normal
/// equations: `||R^T R beta + R^T r|| / (||R^T r|| + ||R^T R|| ||beta||)`,
/// defined as 0 when the numerator vanishes.
pub fn ls_nrbe(r_mat: &Matrix, r: &Vector, beta: &Vector) -> Result<f64> {
    if r_mat.rows() != r.len() || r_mat.cols() != beta.len() {
        return Err(dim_err(
            format!("{}x{}", r.len(), beta.len()),
            format!("{}x{}", r_mat.rows(), r_mat.cols()),
        ));
    }
    let gram = r_mat.transpose().matmul(r_mat);
    let rtr = r_mat.tr_matvec(r);
    let num = gram.matvec(beta).add(&rtr).norm();
    if num == 0.0 {
        return Ok(0.0);
    }
    Ok(num / (rtr.norm() + gram.norm2() * beta.norm()))
}
