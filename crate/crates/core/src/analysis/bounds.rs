//! Per-step residual reduction bounds for linear AA(1).
//!
//! With `y = ||r_k|| / ||r_(k-1)||` and `phi` the angle between the two
//! residuals, `B(phi, y) = sin^2 phi / (y^2 - 2 y cos phi + 1)` and
//! `sigma_min(M) sqrt(B) <= ||r_(k+1)|| / ||r_k|| <= sigma_max(M) sqrt(B)`.

use serde::{Deserialize, Serialize};

use crate::analysis::aa1::check_aa1;
use crate::anderson::{Trace, STALL_TOL};
use crate::error::{Error, Result};
use crate::linalg::{singular_values_small, Matrix, Vector};

/// Inputs this close to `(0, 1)` are treated as the indeterminate point.
pub const INDETERMINATE_TOL: f64 = 1e-12;

/// Relative slack allowed before a step counts as a bound violation.
pub const BOUND_SLACK: f64 = 1e-9;

pub fn calb(phi: f64, y: f64) -> Result<f64> {
    if !phi.is_finite() || !y.is_finite() {
        return Err(Error::NonFinite("B(phi, y) arguments"));
    }
    if phi.abs() < INDETERMINATE_TOL && (y - 1.0).abs() < INDETERMINATE_TOL {
        return Err(Error::Indeterminate);
    }
    let s = phi.sin();
    let num = s * s;
    let den = y * y - 2.0 * y * phi.cos() + 1.0;
    if num == 0.0 {
        return Ok(0.0);
    }
    Ok((num / den).clamp(0.0, 1.0))
}

/// `B` evaluated straight from `a = r_k`, `b = r_(k-1)`:
/// `(|a|^2 |b|^2 - (a.b)^2) / (|a|^2 |a - b|^2)`.
///
/// The numerator uses the Lagrange identity so nearly parallel residuals do
/// not lose all their digits. `None` when `a = 0` or `a = b`.
pub fn calb_vectors(a: &Vector, b: &Vector) -> Option<f64> {
    let an = a.norm();
    let d = a.sub(b);
    let dn = d.norm();
    if an == 0.0 || dn == 0.0 {
        return None;
    }
    // normalize first to keep the products in range
    let (ua, ub) = (a.scale(1.0 / an), b.scale(1.0 / an));
    let n = ua.len();
    let mut num = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let c = ua[i] * ub[j] - ua[j] * ub[i];
            num += c * c;
        }
    }
    let dd = dn / an;
    Some((num / (dd * dd)).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsRecord {
    pub k: usize,
    /// `None` on the `r_k = r_(k-1)` branch.
    pub b_value: Option<f64>,
    pub lower: f64,
    pub upper: f64,
    /// `||r_(k+1)|| / ||r_k||`
    pub actual: f64,
    pub special_case: bool,
    pub violation: bool,
}

impl BoundsRecord {
    pub fn upper_lower_ratio(&self) -> Option<f64> {
        (self.lower > 0.0).then(|| self.upper / self.lower)
    }
}

fn violates(lower: f64, upper: f64, actual: f64) -> bool {
    actual < lower * (1.0 - BOUND_SLACK) || actual > upper * (1.0 + BOUND_SLACK)
}

/// Evaluates the bounds for every `k >= 1` with a successor in the trace.
pub fn bounds_check(trace: &Trace, m: &Matrix) -> Result<Vec<BoundsRecord>> {
    check_aa1(trace)?;
    let sv = singular_values_small(m)?;
    let rs = trace.residuals();
    let mut out = Vec::new();
    for k in 1..rs.len().saturating_sub(1) {
        let (rk, rkm1, rkp1) = (rs[k], rs[k - 1], rs[k + 1]);
        let rn = rk.norm();
        if rn == 0.0 {
            break;
        }
        let actual = rkp1.norm() / rn;
        let stalled = rk.sub(rkm1).norm() <= STALL_TOL * rn;
        let (b_value, lower, upper) = if stalled {
            (None, sv.sigma_min, sv.sigma_max)
        } else {
            let b = calb_vectors(rk, rkm1).unwrap_or(0.0);
            let sb = b.sqrt();
            (Some(b), sv.sigma_min * sb, sv.sigma_max * sb)
        };
        out.push(BoundsRecord {
            k,
            b_value,
            lower,
            upper,
            actual,
            special_case: stalled,
            violation: violates(lower, upper, actual),
        });
    }
    Ok(out)
}

pub fn count_violations(records: &[BoundsRecord]) -> usize {
    records.iter().filter(|r| r.violation).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn maximum_on_cos_curve() {
        for phi in [0.2, 0.7, 1.1, 1.5] {
            assert!((calb(phi, f64::cos(phi)).unwrap() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_on_axis() {
        for y in [0.1, 0.5, 2.0, 7.0] {
            assert_eq!(calb(0.0, y).unwrap(), 0.0);
            assert!(calb(PI, y).unwrap() < 1e-30);
        }
    }

    #[test]
    fn right_angle_unit_ratio() {
        assert!((calb(PI / 2.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn indeterminate_point() {
        assert_eq!(calb(0.0, 1.0), Err(Error::Indeterminate));
        assert_eq!(calb(1e-13, 1.0 + 1e-13), Err(Error::Indeterminate));
    }

    #[test]
    fn vector_form_matches_angle_form() {
        let a = Vector::from(vec![0.3, -1.2, 0.5]);
        let b = Vector::from(vec![1.0, 0.4, 0.2]);
        let y = a.norm() / b.norm();
        let phi = (a.dot(&b) / (a.norm() * b.norm())).acos();
        let direct = calb(phi, y).unwrap();
        assert!((calb_vectors(&a, &b).unwrap() - direct).abs() < 1e-14);
        assert_eq!(calb_vectors(&a, &a), None);
    }
}
