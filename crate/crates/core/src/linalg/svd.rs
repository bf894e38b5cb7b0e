//! One-sided (Hestenes) Jacobi SVD. Rotating column pairs of `A` until they
//! are mutually orthogonal is the implicit Jacobi eigenvalue method on
//! `A^T A`, so the singular values come out as column norms.

use serde::{Deserialize, Serialize};

use super::{check_ls_input, norm2, Matrix, Vector, EPS};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// Extreme singular values of a square matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularPair {
    pub sigma_min: f64,
    pub sigma_max: f64,
}

impl SingularPair {
    pub fn condition_number(&self) -> f64 {
        self.sigma_max / self.sigma_min
    }
}

struct Jacobi {
    /// Columns of `A V`, stored column-major.
    u: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Jacobi {
    fn new(a: &Matrix) -> Self {
        let p = a.cols();
        let mut u: Vec<Vec<f64>> = (0..p).map(|j| a.column(j).into_vec()).collect();
        let mut v: Vec<Vec<f64>> = (0..p).map(|j| Vector::unit(p, j).into_vec()).collect();
        for _ in 0..MAX_SWEEPS {
            let mut rotated = false;
            for i in 0..p {
                for j in i + 1..p {
                    let alpha: f64 = u[i].iter().map(|x| x * x).sum();
                    let beta: f64 = u[j].iter().map(|x| x * x).sum();
                    let gamma: f64 = u[i].iter().zip(&u[j]).map(|(x, y)| x * y).sum();
                    if gamma == 0.0 || gamma.abs() <= EPS * (alpha * beta).sqrt() {
                        continue;
                    }
                    rotated = true;
                    let zeta = (beta - alpha) / (2.0 * gamma);
                    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    rotate(&mut u, i, j, c, s);
                    rotate(&mut v, i, j, c, s);
                }
            }
            if !rotated {
                break;
            }
        }
        Self { u, v }
    }

    fn sigmas(&self) -> Vec<f64> {
        self.u.iter().map(|c| norm2(c)).collect()
    }
}

fn rotate(cols: &mut [Vec<f64>], i: usize, j: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(j);
    let (ci, cj) = (&mut left[i], &mut right[0]);
    for (x, y) in ci.iter_mut().zip(cj.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// All singular values, in descending order. A wide matrix is handled by
/// working on its transpose, so the result has `min(n, p)` entries.
pub fn singular_values(a: &Matrix) -> Vec<f64> {
    let work = if a.cols() > a.rows() { a.transpose() } else { a.clone() };
    let mut s = Jacobi::new(&work).sigmas();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Smallest and largest singular value of a square matrix.
pub fn singular_values_small(m: &Matrix) -> Result<SingularPair> {
    if m.rows() == 0 || !m.is_square() {
        return Err(crate::error::dim_err(
            "non-empty square matrix",
            format!("{}x{}", m.rows(), m.cols()),
        ));
    }
    if !m.is_finite() {
        return Err(Error::NonFinite("matrix entries"));
    }
    let s = singular_values(m);
    Ok(SingularPair {
        sigma_min: *s.last().unwrap(),
        sigma_max: s[0],
    })
}

/// Minimum-norm least-squares solution of `R x ~ rhs`, i.e. `x = R^+ rhs`.
///
/// Singular values below `max(n, p) * eps * sigma_max` are dropped.
pub fn pseudo_inverse_solve(r: &Matrix, rhs: &Vector) -> Result<Vector> {
    check_ls_input(r, rhs)?;
    let (n, p) = r.dims();
    let jac = Jacobi::new(r);
    let sig = jac.sigmas();
    let smax = sig.iter().fold(0.0f64, |m, s| m.max(*s));
    let mut x = Vector::zeros(p);
    if smax == 0.0 {
        return Ok(x);
    }
    let cut = n.max(p) as f64 * EPS * smax;
    for (k, &s) in sig.iter().enumerate() {
        if s <= cut {
            continue;
        }
        // u_k is sigma_k times the unit left singular vector
        let coef = jac.u[k].iter().zip(rhs.iter()).map(|(a, b)| a * b).sum::<f64>() / (s * s);
        for (xi, vi) in x.0.iter_mut().zip(&jac.v[k]) {
            *xi += coef * vi;
        }
    }
    Ok(x)
}
