//! Dense kernels for the small systems that drive AA(m): vectors, row-major
//! matrices, pivoted QR least squares, a Jacobi SVD, LU and Cholesky.
//!
//! Everything here is deterministic and allocation-light; matrices in this
//! crate are at most a few dozen rows.

mod lu;
mod qr;
mod svd;

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{dim_err, Error, Result};

pub use lu::solve_square;
pub use qr::qr_least_squares;
pub use svd::{pseudo_inverse_solve, singular_values, singular_values_small, SingularPair};

/// Unit roundoff for `f64`, 2^-52.
pub const EPS: f64 = f64::EPSILON;

#[derive(Clone, PartialEq, Default)]
pub struct Vector(Vec<f64>);

impl Vector {
    /// Builds a vector, rejecting NaN and infinite entries.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.iter().all(|v| v.is_finite()) {
            Ok(Self(entries))
        } else {
            Err(Error::NonFinite("vector entries"))
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn unit(n: usize, i: usize) -> Self {
        let mut v = Self::zeros(n);
        v.0[i] = 1.0;
        v
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    /// Euclidean norm, scaled to avoid overflow and underflow.
    pub fn norm(&self) -> f64 {
        norm2(&self.0)
    }

    pub fn scale(&self, alpha: f64) -> Vector {
        Vector(self.0.iter().map(|v| alpha * v).collect())
    }

    pub fn add(&self, other: &Vector) -> Vector {
        debug_assert_eq!(self.len(), other.len());
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        debug_assert_eq!(self.len(), other.len());
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// `self += alpha * x`
    pub fn axpy(&mut self, alpha: f64, x: &Vector) {
        debug_assert_eq!(self.len(), x.len());
        for (s, v) in self.0.iter_mut().zip(&x.0) {
            *s += alpha * v;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Vector(v)
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.0).finish()
    }
}

pub(crate) fn norm2(xs: &[f64]) -> f64 {
    let scale = xs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    let ssq: f64 = xs.iter().map(|v| (v / scale) * (v / scale)).sum();
    scale * ssq.sqrt()
}

/// Dense row-major matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(dim_err(format!("{} entries", rows * cols), data.len()));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("matrix entries"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|row| row.len() != c) {
            return Err(dim_err(format!("rows of length {c}"), bad.len()));
        }
        Self::new(r, c, rows.concat())
    }

    /// Builds a matrix from its columns.
    pub fn from_columns(n: usize, cols: &[Vector]) -> Self {
        let p = cols.len();
        let mut m = Self::zeros(n, p);
        for (j, c) in cols.iter().enumerate() {
            debug_assert_eq!(c.len(), n);
            for i in 0..n {
                m[(i, j)] = c[i];
            }
        }
        m
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, v) in d.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    /// `u v^T`
    pub fn outer(u: &Vector, v: &Vector) -> Self {
        let mut m = Self::zeros(u.len(), v.len());
        for i in 0..u.len() {
            for j in 0..v.len() {
                m[(i, j)] = u[i] * v[j];
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vector {
        Vector((0..self.rows).map(|i| self[(i, j)]).collect())
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matvec(&self, x: &Vector) -> Vector {
        debug_assert_eq!(self.cols, x.len());
        Vector(
            (0..self.rows)
                .map(|i| self.row(i).iter().zip(x.iter()).map(|(a, b)| a * b).sum())
                .collect(),
        )
    }

    /// `self^T x`
    pub fn tr_matvec(&self, x: &Vector) -> Vector {
        debug_assert_eq!(self.rows, x.len());
        let mut y = vec![0.0; self.cols];
        for i in 0..self.rows {
            let xi = x[i];
            for (yj, a) in y.iter_mut().zip(self.row(i)) {
                *yj += a * xi;
            }
        }
        Vector(y)
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        debug_assert_eq!(self.cols, other.rows);
        let mut c = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    c.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        c
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        debug_assert_eq!(self.dims(), other.dims());
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        debug_assert_eq!(self.dims(), other.dims());
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, alpha: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| alpha * v).collect(),
        }
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect(),
        }
    }

    pub fn pow(&self, k: u32) -> Matrix {
        debug_assert!(self.is_square());
        let mut acc = Matrix::identity(self.rows);
        for _ in 0..k {
            acc = acc.matmul(self);
        }
        acc
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Spectral norm, the largest singular value.
    pub fn norm2(&self) -> f64 {
        singular_values(self).first().copied().unwrap_or(0.0)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix{}x{} ", self.rows, self.cols)?;
        f.debug_list().entries(self.to_rows()).finish()
    }
}

/// Solves `(R^T R + lambda I) x = R^T rhs` by Cholesky. The caller negates
/// for the acceleration coefficients.
pub fn regularized_solve(r: &Matrix, rhs: &Vector, lambda: f64) -> Result<Vector> {
    if r.rows() != rhs.len() {
        return Err(dim_err(r.rows(), rhs.len()));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "regularization parameter must be positive, got {lambda}"
        )));
    }
    if !r.is_finite() || !rhs.is_finite() {
        return Err(Error::NonFinite("least-squares input"));
    }
    let p = r.cols();
    let mut g = r.transpose().matmul(r);
    for i in 0..p {
        g[(i, i)] += lambda;
    }
    let rt_rhs = r.tr_matvec(rhs);
    cholesky_solve(&g, &rt_rhs)
}

/// Solves `G x = y` for symmetric positive definite `G`.
fn cholesky_solve(g: &Matrix, y: &Vector) -> Result<Vector> {
    let n = g.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = g[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) {
            return Err(Error::Singular { column: j, pivot: d });
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = g[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    let mut z = y.clone();
    for i in 0..n {
        for k in 0..i {
            z[i] -= l[(i, k)] * z[k];
        }
        z[i] /= l[(i, i)];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            z[i] -= l[(k, i)] * z[k];
        }
        z[i] /= l[(i, i)];
    }
    Ok(z)
}

pub(crate) fn check_ls_input(r: &Matrix, rhs: &Vector) -> Result<()> {
    if r.rows() != rhs.len() {
        return Err(dim_err(format!("rhs of length {}", r.rows()), rhs.len()));
    }
    if r.rows() == 0 || r.cols() == 0 {
        return Err(dim_err("non-empty matrix", format!("{}x{}", r.rows(), r.cols())));
    }
    if !r.is_finite() || !rhs.is_finite() {
        return Err(Error::NonFinite("least-squares input"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vector_rejects_nan() {
        assert!(Vector::new(vec![1.0, f64::NAN]).is_err());
        assert!(Vector::new(vec![1.0, f64::INFINITY]).is_err());
        assert!(Vector::new(vec![1.0, 2.0]).is_ok());
    }

    #[test]
    fn matrix_checks_shape() {
        assert!(Matrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m[(1, 0)], 3.0);
        assert_eq!(m.transpose()[(0, 1)], 3.0);
    }

    #[test]
    fn norm_does_not_overflow() {
        let v = Vector::from(vec![1e200, 1e200]);
        assert!((v.norm() / 1e200 - 2f64.sqrt()).abs() < 1e-15);
        let tiny = Vector::from(vec![3e-200, 4e-200]);
        assert!((tiny.norm() / 5e-200 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn matrix_power_and_product() {
        let m = Matrix::from_rows(&[vec![2.0 / 3.0, 0.25], vec![0.0, 1.0 / 3.0]]).unwrap();
        let m3 = m.pow(3);
        let direct = m.matmul(&m).matmul(&m);
        assert!(m3.sub(&direct).max_abs() < 1e-16);
        assert_eq!(m.pow(0), Matrix::identity(2));
    }

    #[test]
    fn regularized_scalar_case() {
        let r = Matrix::from_rows(&[vec![1.0], vec![0.0]]).unwrap();
        let x = regularized_solve(&r, &Vector::from(vec![1.0, 0.0]), 1.0).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn regularized_large_lambda_vanishes() {
        let r = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.5, -1.0], vec![3.0, 0.1]]).unwrap();
        let rhs = Vector::from(vec![1.0, -2.0, 0.5]);
        let scale = r.transpose().matmul(&r).norm2();
        let lambda = 1e12 * scale;
        let x = regularized_solve(&r, &rhs, lambda).unwrap();
        assert!(x.norm() <= r.tr_matvec(&rhs).norm() / lambda);
    }

    #[test]
    fn regularized_rejects_nonpositive_lambda() {
        let r = Matrix::identity(2);
        let rhs = Vector::from(vec![1.0, 1.0]);
        assert!(regularized_solve(&r, &rhs, 0.0).is_err());
        assert!(regularized_solve(&r, &rhs, -1.0).is_err());
        assert!(regularized_solve(&r, &Vector::from(vec![1.0]), 1.0).is_err());
    }
}
