use super::{Matrix, Vector, EPS};
use crate::error::{dim_err, Error, Result};

/// Solves `A x = b` by LU with partial pivoting.
///
/// A pivot smaller than `n * eps * max|A|` is treated as singular.
pub fn solve_square(a: &Matrix, b: &Vector) -> Result<Vector> {
    let n = a.rows();
    if !a.is_square() {
        return Err(dim_err("square matrix", format!("{}x{}", a.rows(), a.cols())));
    }
    if b.len() != n {
        return Err(dim_err(n, b.len()));
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::NonFinite("linear system"));
    }
    let tiny = (n.max(1) as f64) * EPS * a.max_abs();
    let mut lu = a.clone();
    let mut x = b.clone();
    for k in 0..n {
        let (p, pivot) = (k..n)
            .map(|i| (i, lu[(i, k)].abs()))
            .fold((k, -1.0), |best, c| if c.1 > best.1 { c } else { best });
        if pivot <= tiny || pivot == 0.0 {
            return Err(Error::Singular { column: k, pivot });
        }
        if p != k {
            for j in 0..n {
                let t = lu[(k, j)];
                lu[(k, j)] = lu[(p, j)];
                lu[(p, j)] = t;
            }
            let t = x[k];
            x[k] = x[p];
            x[p] = t;
        }
        for i in k + 1..n {
            let f = lu[(i, k)] / lu[(k, k)];
            if f == 0.0 {
                continue;
            }
            lu[(i, k)] = f;
            for j in k + 1..n {
                lu[(i, j)] -= f * lu[(k, j)];
            }
            x[i] -= f * x[k];
        }
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in i + 1..n {
            s -= lu[(i, j)] * x[j];
        }
        x[i] = s / lu[(i, i)];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual_ok(a: &Matrix, x: &Vector, b: &Vector) -> bool {
        let r = a.matvec(x).sub(b).norm();
        r <= 1e-12 * (a.norm2() * x.norm() + b.norm())
    }

    #[test]
    fn identity_returns_rhs() {
        let b = Vector::from(vec![0.3, -7.0, 2.5]);
        let x = solve_square(&Matrix::identity(3), &b).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn diagonal_example() {
        let a = Matrix::diag(&[-0.5, 0.5]);
        let x = solve_square(&a, &Vector::from(vec![1.0, -1.0])).unwrap();
        assert_eq!(x.as_slice(), &[-2.0, -2.0]);
    }

    #[test]
    fn upper_triangular_example() {
        let a = Matrix::from_rows(&[vec![1.0 / 3.0, -0.25], vec![0.0, 2.0 / 3.0]]).unwrap();
        let b = Vector::from(vec![1.0 / 3.0, 0.0]);
        let x = solve_square(&a, &b).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && x[1].abs() < 1e-15);
        assert!(residual_ok(&a, &x, &b));
    }

    #[test]
    fn needs_pivoting() {
        let a = Matrix::from_rows(&[vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 3.0], vec![4.0, -3.0, 8.0]])
            .unwrap();
        let b = Vector::from(vec![1.0, 2.0, 3.0]);
        let x = solve_square(&a, &b).unwrap();
        assert!(residual_ok(&a, &x, &b));
    }

    #[test]
    fn singular_is_error() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(
            solve_square(&a, &Vector::from(vec![1.0, 1.0])),
            Err(Error::Singular { .. })
        ));
        assert!(solve_square(&Matrix::zeros(2, 2), &Vector::zeros(2)).is_err());
    }
}
