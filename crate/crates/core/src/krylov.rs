//! Plain (non-restarted) GMRES: Arnoldi with modified Gram-Schmidt and a
//! Givens-rotation update of the small least-squares problem.
//!
//! Residual convention here is `r = b - A x`; only norms are compared with
//! AA residuals, so the sign does not matter.

use crate::error::{dim_err, Error, Result};
use crate::linalg::{Matrix, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct GmresTrace {
    /// `||r_k||` for `k = 0, 1, ...`, with index 0 the initial residual.
    pub residual_norms: Vec<f64>,
    pub x: Vector,
    /// True when the Krylov space became invariant (exact solve).
    pub breakdown: bool,
}

impl GmresTrace {
    /// `||r_k||`, or the final value once GMRES has stopped early.
    pub fn norm_at(&self, k: usize) -> f64 {
        let last = self.residual_norms.len() - 1;
        self.residual_norms[k.min(last)]
    }
}

fn givens(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        (1.0, 0.0)
    } else {
        let h = a.hypot(b);
        (a / h, b / h)
    }
}

pub fn gmres(a: &Matrix, b: &Vector, x0: &Vector, max_iter: usize) -> Result<GmresTrace> {
    let n = a.rows();
    if !a.is_square() {
        return Err(dim_err("square matrix", format!("{}x{}", a.rows(), a.cols())));
    }
    if b.len() != n {
        return Err(dim_err(n, b.len()));
    }
    if x0.len() != n {
        return Err(dim_err(n, x0.len()));
    }
    if !a.is_finite() || !b.is_finite() || !x0.is_finite() {
        return Err(Error::NonFinite("gmres input"));
    }
    let r0 = b.sub(&a.matvec(x0));
    let beta = r0.norm();
    let mut norms = vec![beta];
    if beta == 0.0 || max_iter == 0 {
        return Ok(GmresTrace {
            residual_norms: norms,
            x: x0.clone(),
            breakdown: beta == 0.0,
        });
    }
    let max_iter = max_iter.min(n);
    let mut basis = vec![r0.scale(1.0 / beta)];
    // column j of the Hessenberg matrix, already rotated
    let mut h_cols: Vec<Vec<f64>> = Vec::new();
    let mut rot: Vec<(f64, f64)> = Vec::new();
    let mut g = vec![beta];
    let mut breakdown = false;
    let scale = a.frobenius_norm();

    for j in 0..max_iter {
        let mut w = a.matvec(&basis[j]);
        let mut h = vec![0.0; j + 2];
        for (i, v) in basis.iter().enumerate() {
            h[i] = w.dot(v);
            w.axpy(-h[i], v);
        }
        let hn = w.norm();
        h[j + 1] = hn;
        for (i, &(c, s)) in rot.iter().enumerate() {
            let (x, y) = (h[i], h[i + 1]);
            h[i] = c * x + s * y;
            h[i + 1] = -s * x + c * y;
        }
        let (c, s) = givens(h[j], h[j + 1]);
        h[j] = c * h[j] + s * h[j + 1];
        h[j + 1] = 0.0;
        rot.push((c, s));
        let gj = g[j];
        g[j] = c * gj;
        g.push(-s * gj);
        if !h[j].is_finite() || !g[j + 1].is_finite() {
            return Err(Error::NonFinite("gmres iteration"));
        }
        h_cols.push(h);
        norms.push(g[j + 1].abs());
        if hn <= 1e-14 * scale {
            breakdown = true;
            break;
        }
        if j + 1 < max_iter {
            basis.push(w.scale(1.0 / hn));
        }
    }

    let k = h_cols.len();
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for jj in i + 1..k {
            s -= h_cols[jj][i] * y[jj];
        }
        y[i] = if h_cols[i][i] != 0.0 { s / h_cols[i][i] } else { 0.0 };
    }
    let mut x = x0.clone();
    for (yi, v) in y.iter().zip(&basis) {
        x.axpy(*yi, v);
    }
    if breakdown {
        *norms.last_mut().unwrap() = 0.0;
    }
    Ok(GmresTrace {
        residual_norms: norms,
        x,
        breakdown,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_converges_in_one_step() {
        let b = Vector::from(vec![1.0, -2.0, 0.5]);
        let t = gmres(&Matrix::identity(3), &b, &Vector::zeros(3), 10).unwrap();
        assert_eq!(t.residual_norms.len(), 2);
        assert_eq!(t.residual_norms[1], 0.0);
        assert!(t.x.sub(&b).norm() < 1e-15);
        assert!(t.breakdown);
    }

    #[test]
    fn two_eigenvalues_two_steps() {
        let a = Matrix::diag(&[1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0]);
        let b = Vector::from(vec![1.0, 0.3, -0.7]);
        let t = gmres(&a, &b, &Vector::zeros(3), 3).unwrap();
        assert!(t.norm_at(2) <= 1e-12 * t.residual_norms[0]);
        // the degree-2 polynomial (1 - 3z)(1 - 1.5z) annihilates r0
        let r0 = b.clone();
        let p = Matrix::identity(3)
            .sub(&a.scale(3.0))
            .matmul(&Matrix::identity(3).sub(&a.scale(1.5)));
        assert!(p.matvec(&r0).norm() < 1e-15);
    }

    #[test]
    fn residuals_non_increasing() {
        let a = Matrix::from_rows(&[
            vec![2.0, 1.0, 0.0, 0.3],
            vec![-1.0, 3.0, 0.5, 0.0],
            vec![0.0, 0.2, 1.5, -0.4],
            vec![0.1, 0.0, 0.7, 2.2],
        ])
        .unwrap();
        let b = Vector::from(vec![1.0, 2.0, -1.0, 0.5]);
        let t = gmres(&a, &b, &Vector::zeros(4), 4).unwrap();
        for w in t.residual_norms.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-14));
        }
        assert!(a.matvec(&t.x).sub(&b).norm() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(gmres(&Matrix::zeros(2, 3), &Vector::zeros(2), &Vector::zeros(3), 2).is_err());
        assert!(gmres(&Matrix::identity(2), &Vector::zeros(3), &Vector::zeros(2), 2).is_err());
    }
}
