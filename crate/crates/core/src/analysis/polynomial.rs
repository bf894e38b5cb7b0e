//! Residual polynomials `r_k = p_k(M) r_0` for linear AA(m) traces.

use serde::{Deserialize, Serialize};

use crate::anderson::Trace;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::problems::Problem;

/// Relative tolerance for vanishing coefficients and the `p(0) = 0`,
/// `p(1) = 1` checks, scaled by the coefficient 1-norm.
pub const COEFF_TOL: f64 = 1e-9;

/// Dense monomial-basis polynomial `sum_j c_j lambda^j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualPolynomial {
    coeffs: Vec<f64>,
}

impl ResidualPolynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        Self { coeffs: vec![c] }
    }

    pub fn zero() -> Self {
        Self { coeffs: vec![] }
    }

    /// `lambda^d`
    pub fn monomial(d: usize) -> Self {
        let mut coeffs = vec![0.0; d + 1];
        coeffs[d] = 1.0;
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Index of the highest stored coefficient (0 for the empty polynomial).
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// Degree ignoring trailing exact zeros.
    pub fn effective_degree(&self) -> usize {
        self.coeffs.iter().rposition(|c| *c != 0.0).unwrap_or(0)
    }

    pub fn abs_sum(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs()).sum()
    }

    pub fn eval(&self, lambda: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * lambda + c)
    }

    /// `p(M) v` by Horner's rule.
    pub fn eval_matrix_vec(&self, m: &Matrix, v: &Vector) -> Vector {
        let mut acc = Vector::zeros(v.len());
        for c in self.coeffs.iter().rev() {
            acc = m.matvec(&acc);
            acc.axpy(*c, v);
        }
        acc
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let get = |p: &Self, i: usize| p.coeffs.get(i).copied().unwrap_or(0.0);
        Self::new((0..n).map(|i| get(self, i) + get(other, i)).collect())
    }

    pub fn scale(&self, a: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| a * c).collect())
    }

    /// `lambda * p(lambda)`
    pub fn mul_lambda(&self) -> Self {
        let mut coeffs = Vec::with_capacity(self.coeffs.len() + 1);
        coeffs.push(0.0);
        coeffs.extend_from_slice(&self.coeffs);
        Self { coeffs }
    }

    /// `(|p(1) - 1|, |p(0)|)`, both relative to the coefficient 1-norm.
    pub fn normalization_error(&self) -> (f64, f64) {
        let s = self.abs_sum().max(1.0);
        ((self.eval(1.0) - 1.0).abs() / s, self.eval(0.0).abs() / s)
    }

    /// Max coefficientwise difference, padding the shorter one with zeros.
    pub fn max_coeff_diff(&self, other: &Self) -> f64 {
        self.add(&other.scale(-1.0))
            .coeffs
            .iter()
            .fold(0.0, |m, c| m.max(c.abs()))
    }
}

/// `lambda * ((1 + sum beta) prev[0] - sum_i beta_i prev[i])`, with `prev`
/// listed newest first.
fn aa_combine(beta: &[f64], prev: &[&ResidualPolynomial]) -> ResidualPolynomial {
    let total: f64 = beta.iter().sum();
    let mut p = prev[0].scale(1.0 + total);
    for (i, b) in beta.iter().enumerate() {
        p = p.add(&prev[i + 1].scale(-b));
    }
    p.mul_lambda()
}

/// Residual polynomials `p_0, ..., p_K` from the coefficient history
/// `beta^(0), ..., beta^(K-1)` of a single-guess AA(m) run.
///
/// `p_0 = 1`, `p_1 = lambda`, and for `k >= 1`
/// `p_(k+1) = lambda ((1 + sum_i beta_i) p_k - sum_i beta_i p_(k-i))`
/// with `i = 1..min(k, m)`.
pub fn polynomial_recurrence(betas: &[Vec<f64>], m: usize) -> Result<Vec<ResidualPolynomial>> {
    let mut ps = vec![ResidualPolynomial::constant(1.0)];
    for (k, beta) in betas.iter().enumerate() {
        let want = k.min(m);
        if beta.len() != want {
            return Err(Error::BetaHistory(format!(
                "step {k} has {} coefficients, expected {want}",
                beta.len()
            )));
        }
        let prev: Vec<&ResidualPolynomial> = ps.iter().rev().take(want + 1).collect();
        let next = aa_combine(beta, &prev);
        ps.push(next);
    }
    Ok(ps)
}

/// Coefficient history of the steps actually taken in `trace`.
pub fn step_betas(trace: &Trace) -> Vec<Vec<f64>> {
    let n = trace.records.len().saturating_sub(1);
    trace.records[..n].iter().map(|r| r.beta.clone()).collect()
}

pub fn trace_polynomials(trace: &Trace) -> Result<Vec<ResidualPolynomial>> {
    if trace.is_general_guess() {
        return Err(Error::TraceMode(
            "single-guess trace required; use multi_krylov_polynomials".into(),
        ));
    }
    polynomial_recurrence(&step_betas(trace), trace.m)
}

fn linear_m(problem: &Problem) -> Result<&Matrix> {
    problem
        .as_linear()
        .map(|p| p.iteration_matrix())
        .ok_or_else(|| Error::TraceMode("linear problem required".into()))
}

/// `max_k ||p_k(M) r_0 - r_k|| / ||r_0||` over the whole trace.
pub fn verify_polynomial_trace(trace: &Trace, problem: &Problem) -> Result<f64> {
    let m = linear_m(problem)?;
    let ps = trace_polynomials(trace)?;
    let r0 = &trace.records[0].r;
    let scale = r0.norm();
    if scale == 0.0 {
        return Ok(0.0);
    }
    let dev = ps
        .iter()
        .zip(&trace.records)
        .map(|(p, rec)| p.eval_matrix_vec(m, r0).sub(&rec.r).norm() / scale)
        .fold(0.0, f64::max);
    Ok(dev)
}

/// Splits `p_k = lambda^(s+1) g` for `k = s(m+1) + i`, `1 <= i <= m+1`,
/// after checking that `c_0, ..., c_s` vanish.
pub fn memory_effect_factor(p: &ResidualPolynomial, m: usize, k: usize) -> Result<ResidualPolynomial> {
    if k == 0 {
        return Err(Error::InvalidConfig("memory effect needs k >= 1".into()));
    }
    let s = (k - 1) / (m + 1);
    let tol = COEFF_TOL * p.abs_sum();
    for (index, c) in p.coeffs.iter().enumerate().take(s + 1) {
        if c.abs() > tol {
            return Err(Error::MemoryEffect { index, value: c.abs() });
        }
    }
    let rest = p.coeffs.get(s + 1..).map(<[f64]>::to_vec).unwrap_or_default();
    Ok(ResidualPolynomial::new(rest))
}

/// Table of `p_(t, j)` for `t = 1..=steps`, `j = 0..=m`, such that
/// `r_(t+m) = sum_j p_(t, j)(M) r_j` in a general-guess run.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiKrylovTable {
    pub m: usize,
    /// `rows[t - 1][j]` is `p_(t, j)`.
    pub rows: Vec<Vec<ResidualPolynomial>>,
}

impl MultiKrylovTable {
    pub fn get(&self, t: usize, j: usize) -> &ResidualPolynomial {
        &self.rows[t - 1][j]
    }
}

/// Builds the multi-Krylov table from `beta^(m), beta^(m+1), ...`.
///
/// Entries with `t <= 0` encode the guesses themselves:
/// `p_(1-i, j) = 1` when `j = m + 1 - i` and 0 otherwise. Then for `t >= 1`,
/// with `k = t + m - 1`,
/// `p_(t, j) = lambda ((1 + sum beta^(k)) p_(t-1, j) - sum_i beta_i^(k) p_(t-1-i, j))`.
pub fn multi_krylov_polynomials(betas: &[Vec<f64>], m: usize, steps: usize) -> Result<MultiKrylovTable> {
    if betas.len() < steps {
        return Err(Error::BetaHistory(format!(
            "{steps} steps requested but only {} coefficient vectors given",
            betas.len()
        )));
    }
    // all[t + m] holds p_(t, .) for t = -m ..= steps
    let mut all: Vec<Vec<ResidualPolynomial>> = (1..=m + 1)
        .rev()
        .map(|i| {
            (0..=m)
                .map(|j| {
                    if j == m + 1 - i {
                        ResidualPolynomial::constant(1.0)
                    } else {
                        ResidualPolynomial::zero()
                    }
                })
                .collect()
        })
        .collect();
    for (t, beta) in betas.iter().enumerate().take(steps).map(|(i, b)| (i + 1, b)) {
        if beta.len() != m {
            return Err(Error::BetaHistory(format!(
                "step t = {t} has {} coefficients, expected {m}",
                beta.len()
            )));
        }
        let row: Vec<ResidualPolynomial> = (0..=m)
            .map(|j| {
                let prev: Vec<&ResidualPolynomial> =
                    all.iter().rev().take(m + 1).map(|r| &r[j]).collect();
                aa_combine(beta, &prev)
            })
            .collect();
        all.push(row);
    }
    Ok(MultiKrylovTable {
        m,
        rows: all.split_off(m + 1),
    })
}

/// Checks `sum_j p_(t, j)(M) r_j = r_(t+m)` on a general-guess trace and
/// returns the max deviation relative to `||r_0||`.
pub fn verify_multi_krylov(trace: &Trace, problem: &Problem) -> Result<(MultiKrylovTable, f64)> {
    if !trace.is_general_guess() {
        return Err(Error::TraceMode("general-guess trace required".into()));
    }
    let mmat = linear_m(problem)?;
    let m = trace.m;
    let recs = &trace.records;
    let steps = recs.len().saturating_sub(m + 1);
    let betas: Vec<Vec<f64>> = recs[m..m + steps].iter().map(|r| r.beta.clone()).collect();
    let table = multi_krylov_polynomials(&betas, m, steps)?;
    let scale = recs[0].r.norm().max(f64::MIN_POSITIVE);
    let mut dev: f64 = 0.0;
    for t in 1..=steps {
        let mut sum = Vector::zeros(recs[0].r.len());
        for j in 0..=m {
            sum = sum.add(&table.get(t, j).eval_matrix_vec(mmat, &recs[j].r));
        }
        dev = dev.max(sum.sub(&recs[t + m].r).norm() / scale);
    }
    Ok((table, dev))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_polynomials() {
        let (b1, b2) = (0.37, -0.81);
        let ps = polynomial_recurrence(&[vec![], vec![b1], vec![b2]], 1).unwrap();
        assert_eq!(ps[0].coeffs(), &[1.0]);
        assert_eq!(ps[1].coeffs(), &[0.0, 1.0]);
        assert_eq!(ps[2].coeffs(), &[0.0, -b1, 1.0 + b1]);
        let want = [0.0, 0.0, -((1.0 + b2) * b1 + b2), (1.0 + b2) * (1.0 + b1)];
        for (c, w) in ps[3].coeffs().iter().zip(want) {
            assert!((c - w).abs() < 1e-15);
        }
    }

    #[test]
    fn fp_polynomials_are_powers() {
        let ps = polynomial_recurrence(&vec![vec![]; 6], 0).unwrap();
        for (k, p) in ps.iter().enumerate() {
            assert_eq!(p, &ResidualPolynomial::monomial(k));
        }
    }

    #[test]
    fn wrong_beta_length() {
        assert!(polynomial_recurrence(&[vec![0.1]], 1).is_err());
        assert!(polynomial_recurrence(&[vec![], vec![0.1, 0.2]], 2).is_err());
    }

    #[test]
    fn horner_matches_powers() {
        let m = Matrix::from_rows(&[vec![0.5, 0.2], vec![-0.1, 0.3]]).unwrap();
        let v = Vector::from(vec![1.0, 2.0]);
        let p = ResidualPolynomial::new(vec![0.5, -1.0, 2.0]);
        let direct = v
            .scale(0.5)
            .sub(&m.matvec(&v))
            .add(&m.pow(2).matvec(&v).scale(2.0));
        assert!(p.eval_matrix_vec(&m, &v).sub(&direct).norm() < 1e-15);
        assert_eq!(p.eval(2.0), 0.5 - 2.0 + 8.0);
    }

    #[test]
    fn memory_factor_shifts() {
        let p = ResidualPolynomial::new(vec![0.0, 0.0, 0.3, 0.7]);
        let g = memory_effect_factor(&p, 1, 3).unwrap();
        assert_eq!(g.coeffs(), &[0.3, 0.7]);
        let g = memory_effect_factor(&ResidualPolynomial::monomial(1), 1, 1).unwrap();
        assert_eq!(g.coeffs(), &[1.0]);
        let bad = ResidualPolynomial::new(vec![0.0, 0.2, 0.8]);
        assert_eq!(
            memory_effect_factor(&bad, 1, 3),
            Err(Error::MemoryEffect { index: 1, value: 0.2 })
        );
    }

    #[test]
    fn multi_krylov_first_row() {
        let beta = vec![0.25, -0.6];
        let t = multi_krylov_polynomials(std::slice::from_ref(&beta), 2, 1).unwrap();
        assert_eq!(t.get(1, 0).coeffs(), &[0.0, -beta[1]]);
        assert_eq!(t.get(1, 1).coeffs(), &[0.0, -beta[0]]);
        assert_eq!(t.get(1, 2).coeffs(), &[0.0, 1.0 + beta[0] + beta[1]]);
    }

    #[test]
    fn multi_krylov_base_rows_pick_guesses() {
        // with all beta zero, r_(t+m) = M^t r_m
        let t = multi_krylov_polynomials(&vec![vec![0.0, 0.0, 0.0]; 4], 3, 4).unwrap();
        for s in 1..=4 {
            assert_eq!(t.get(s, 3), &ResidualPolynomial::monomial(s));
            for j in 0..3 {
                assert_eq!(t.get(s, j).effective_degree(), 0);
                assert!(t.get(s, j).coeffs().iter().all(|c| *c == 0.0));
            }
        }
    }
}
