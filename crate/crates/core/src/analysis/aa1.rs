//! Coefficient-free forms of the linear AA(1) residual sequence.

use crate::anderson::{Trace, STALL_TOL};
use crate::error::{dim_err, Error, Result};
use crate::linalg::{singular_values, Matrix, Vector};

fn is_stall(r_k: &Vector, r_km1: &Vector) -> bool {
    r_k.sub(r_km1).norm() <= STALL_TOL * r_k.norm()
}

/// `r_(k+1)` from `r_k` and `r_(k-1)` without forming beta:
/// `M (-r_k r_(k-1)^T + r_(k-1) r_k^T) w / ||w||^2` with `w = r_k - r_(k-1)`,
/// or `M r_k` when the two residuals coincide.
pub fn aa1_residual_recursion(r_k: &Vector, r_km1: &Vector, m: &Matrix) -> Result<Vector> {
    let n = r_k.len();
    if r_km1.len() != n {
        return Err(dim_err(n, r_km1.len()));
    }
    if !m.is_square() || m.rows() != n {
        return Err(dim_err(format!("{n}x{n}"), format!("{}x{}", m.rows(), m.cols())));
    }
    if is_stall(r_k, r_km1) {
        return Ok(m.matvec(r_k));
    }
    let w = r_k.sub(r_km1);
    let skew = Matrix::outer(r_km1, r_k).sub(&Matrix::outer(r_k, r_km1));
    Ok(m.matvec(&skew.matvec(&w)).scale(1.0 / w.dot(&w)))
}

/// `L_k` with `r_k = L_k r_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankTwoUpdate {
    pub k: usize,
    pub l: Matrix,
}

impl RankTwoUpdate {
    /// `sigma_3 / sigma_1`, zero when `n < 3` or `L = 0`.
    pub fn third_singular_ratio(&self) -> f64 {
        let s = singular_values(&self.l);
        if s.len() < 3 || s[0] == 0.0 {
            return 0.0;
        }
        s[2] / s[0]
    }

    pub fn has_rank_at_most_two(&self, tol: f64) -> bool {
        self.third_singular_ratio() <= tol
    }
}

/// `L_0 = I`, `L_1 = M`, and
/// `L_(k+1) = M (-L_k R_0 L_(k-1)^T + L_(k-1) R_0 L_k^T)(L_k - L_(k-1)) / ||(L_k - L_(k-1)) r_0||^2`
/// with `R_0 = r_0 r_0^T`, for `k = 0..=steps`.
pub fn lk_recursion(m: &Matrix, r0: &Vector, steps: usize) -> Result<Vec<RankTwoUpdate>> {
    let n = r0.len();
    if !m.is_square() || m.rows() != n {
        return Err(dim_err(format!("{n}x{n}"), format!("{}x{}", m.rows(), m.cols())));
    }
    let r0_outer = Matrix::outer(r0, r0);
    let mut ls = vec![Matrix::identity(n), m.clone()];
    for k in 1..steps {
        let (lk, lkm1) = (&ls[k], &ls[k - 1]);
        let d = lk.sub(lkm1);
        let dr = d.matvec(r0);
        if is_stall(&lk.matvec(r0), &lkm1.matvec(r0)) {
            return Err(Error::Stall { k });
        }
        let a = lk.matmul(&r0_outer).matmul(&lkm1.transpose());
        let skew = a.transpose().sub(&a);
        let next = m.matmul(&skew).matmul(&d).scale(1.0 / dr.dot(&dr));
        if !next.is_finite() {
            return Err(Error::NonFinite("L_k recursion"));
        }
        ls.push(next);
    }
    ls.truncate(steps + 1);
    Ok(ls
        .into_iter()
        .enumerate()
        .map(|(k, l)| RankTwoUpdate { k, l })
        .collect())
}

/// Max over `k >= 1` of `||r_(k+1) - closed form|| / ||r_k||` along an AA(1) trace.
pub fn verify_aa1_recursion(trace: &Trace, m: &Matrix) -> Result<f64> {
    check_aa1(trace)?;
    let rs = trace.residuals();
    let mut dev: f64 = 0.0;
    for k in 1..rs.len().saturating_sub(1) {
        let scale = rs[k].norm();
        if scale == 0.0 {
            continue;
        }
        let pred = aa1_residual_recursion(rs[k], rs[k - 1], m)?;
        dev = dev.max(pred.sub(rs[k + 1]).norm() / scale);
    }
    Ok(dev)
}

/// Max over k of `||L_k r_0 - r_k|| / ||r_0||`.
pub fn verify_lk_against_trace(ls: &[RankTwoUpdate], trace: &Trace) -> Result<f64> {
    check_aa1(trace)?;
    let r0 = &trace.records[0].r;
    let scale = r0.norm().max(f64::MIN_POSITIVE);
    Ok(ls
        .iter()
        .zip(&trace.records)
        .map(|(l, rec)| l.l.matvec(r0).sub(&rec.r).norm() / scale)
        .fold(0.0, f64::max))
}

pub(crate) fn check_aa1(trace: &Trace) -> Result<()> {
    if trace.m != 1 || trace.is_general_guess() {
        return Err(Error::TraceMode(format!(
            "single-guess AA(1) trace required, got m = {} with {} guesses",
            trace.m, trace.initial_guesses
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v2(a: f64, b: f64) -> Vector {
        Vector::from(vec![a, b])
    }

    #[test]
    fn stall_branch() {
        let m = Matrix::diag(&[1.5, 0.5]);
        let r = v2(1.5, 0.5);
        assert_eq!(aa1_residual_recursion(&r, &r, &m).unwrap().as_slice(), &[2.25, 0.25]);
    }

    #[test]
    fn stall_example_step() {
        // r_0 = (1, 1), r_1 = (3/2, 1/2): the next residual repeats r_1
        let m = Matrix::diag(&[1.5, 0.5]);
        let r2 = aa1_residual_recursion(&v2(1.5, 0.5), &v2(1.0, 1.0), &m).unwrap();
        assert!(r2.sub(&v2(1.5, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn parallel_residuals_converge() {
        let m = Matrix::from_rows(&[vec![0.4, 0.1], vec![0.2, 0.5]]).unwrap();
        let r = v2(0.3, -0.8);
        let out = aa1_residual_recursion(&r, &r.scale(2.5), &m).unwrap();
        assert!(out.norm() < 1e-16);
    }

    #[test]
    fn lk_starts() {
        let m = Matrix::from_rows(&[vec![0.4, 0.1], vec![0.2, 0.5]]).unwrap();
        let ls = lk_recursion(&m, &v2(1.0, 0.3), 3).unwrap();
        assert_eq!(ls.len(), 4);
        assert_eq!(ls[0].l, Matrix::identity(2));
        assert_eq!(ls[1].l, m);
    }

    #[test]
    fn lk_stall_is_error() {
        // r_1 = M r_0 = r_0 for an eigenvector with eigenvalue 1
        let m = Matrix::diag(&[1.0, 0.5]);
        assert_eq!(lk_recursion(&m, &v2(1.0, 0.0), 3), Err(Error::Stall { k: 1 }));
    }
}
