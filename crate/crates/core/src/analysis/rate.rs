//! r-linear convergence factor estimates from finite traces.

use serde::{Deserialize, Serialize};

use crate::analysis::polynomial::trace_polynomials;
use crate::anderson::{solve, AndersonConfig, Start, Termination, Trace};
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::problems::Problem;

/// Errors at or below `FLOOR_REL * (1 + ||x*||)` are machine-precision noise.
pub const FLOOR_REL: f64 = 1e-13;
pub const MIN_USABLE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum RhoMethod {
    /// `sigma_k` at the last usable k.
    #[default]
    SigmaTail,
    /// `exp` of the least-squares slope of `log ||x_k - x*||` over the
    /// trailing half of the usable records.
    LogSlope,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceEstimate {
    pub rho_hat: f64,
    pub k_used: usize,
    pub method: RhoMethod,
    /// The trace hit the floor before enough records accumulated.
    pub finite: bool,
}

/// `(k, ||x_k - x*||)` for `k >= 1` up to the first record at the floor,
/// plus whether the floor was reached.
pub fn usable_errors(trace: &Trace) -> Result<(Vec<(usize, f64)>, bool)> {
    let xs = trace
        .x_star
        .as_ref()
        .ok_or_else(|| Error::TraceMode("fixed point unknown".into()))?;
    let floor = FLOOR_REL * (1.0 + xs.norm());
    let mut out = Vec::new();
    for rec in trace.records.iter().skip(1) {
        let e = rec.x.sub(xs).norm();
        if e <= floor {
            return Ok((out, true));
        }
        out.push((rec.k, e));
    }
    Ok((out, false))
}

fn log_slope(pts: &[(usize, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mk = pts.iter().map(|p| p.0 as f64).sum::<f64>() / n;
    let ml = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(k, e) in pts {
        let dk = k as f64 - mk;
        sxy += dk * (e.ln() - ml);
        sxx += dk * dk;
    }
    if sxx == 0.0 {
        return 0.0;
    }
    (sxy / sxx).exp()
}

fn from_points(pts: &[(usize, f64)], method: RhoMethod) -> f64 {
    match method {
        RhoMethod::SigmaTail => {
            let (k, e) = *pts.last().unwrap();
            e.powf(1.0 / k as f64)
        }
        RhoMethod::LogSlope => log_slope(&pts[pts.len() / 2..]),
    }
}

pub fn estimate_rho(trace: &Trace, method: RhoMethod) -> Result<ConvergenceEstimate> {
    let (pts, floored) = usable_errors(trace)?;
    let converged = floored || trace.termination == Termination::Converged;
    if pts.len() < MIN_USABLE {
        if converged {
            return Ok(ConvergenceEstimate {
                rho_hat: 0.0,
                k_used: pts.last().map_or(0, |p| p.0),
                method,
                finite: true,
            });
        }
        return Err(Error::TooFewRecords {
            found: pts.len(),
            required: MIN_USABLE,
        });
    }
    Ok(ConvergenceEstimate {
        rho_hat: from_points(&pts, method),
        k_used: pts.last().unwrap().0,
        method,
        finite: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    /// `max_k |beta_k(x0) - beta_k(alpha x0)|` over the compared steps.
    pub beta_dev: f64,
    /// Max coefficientwise difference of the residual polynomials, divided
    /// by `max(1, sum |c_j|)` of the polynomial from `x0`.
    pub poly_dev: f64,
    /// Same difference without the scaling.
    pub poly_dev_abs: f64,
    /// Difference of log-slope estimates fitted over the common usable range.
    pub rho_dev: Option<f64>,
    pub steps: usize,
}

/// Runs AA(1) from `x0` and `alpha x0` on a homogeneous linear problem and
/// compares the coefficient sequences, residual polynomials and rate
/// estimates.
pub fn scaling_invariance_check(problem: &Problem, x0: &Vector, alpha: f64, steps: usize) -> Result<ScalingReport> {
    if alpha == 0.0 || !alpha.is_finite() {
        return Err(Error::InvalidConfig(format!("alpha must be nonzero and finite, got {alpha}")));
    }
    let lin = problem
        .as_linear()
        .ok_or_else(|| Error::TraceMode("linear problem required".into()))?;
    if !lin.is_homogeneous() {
        return Err(Error::InvalidProblem("scaling check needs b = 0".into()));
    }
    let short = AndersonConfig {
        max_iter: steps,
        tol_rel: f64::MIN_POSITIVE,
        ..AndersonConfig::with_m(1)
    };
    let ta = solve(problem, &Start::Single(x0.clone()), &short)?;
    let tb = solve(problem, &Start::Single(x0.scale(alpha)), &short)?;
    let n = ta.len().min(tb.len());
    let mut beta_dev: f64 = 0.0;
    for (ra, rb) in ta.records[..n].iter().zip(&tb.records[..n]) {
        for (a, b) in ra.beta.iter().zip(&rb.beta) {
            beta_dev = beta_dev.max((a - b).abs());
        }
    }
    let pa = trace_polynomials(&ta)?;
    let pb = trace_polynomials(&tb)?;
    let (mut poly_dev, mut poly_dev_abs): (f64, f64) = (0.0, 0.0);
    for (a, b) in pa.iter().zip(&pb) {
        let d = a.max_coeff_diff(b);
        poly_dev_abs = poly_dev_abs.max(d);
        poly_dev = poly_dev.max(d / a.abs_sum().max(1.0));
    }

    let long = AndersonConfig::with_m(1);
    let la = solve(problem, &Start::Single(x0.clone()), &long)?;
    let lb = solve(problem, &Start::Single(x0.scale(alpha)), &long)?;
    let (ea, _) = usable_errors(&la)?;
    let (eb, _) = usable_errors(&lb)?;
    let common = ea.len().min(eb.len());
    let rho_dev = (common >= MIN_USABLE).then(|| {
        let half = common / 2;
        (log_slope(&ea[half..common]) - log_slope(&eb[half..common])).abs()
    });
    Ok(ScalingReport {
        beta_dev,
        poly_dev,
        poly_dev_abs,
        rho_dev,
        steps: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anderson::IterationRecord;

    fn synthetic(rate: f64, n: usize) -> Trace {
        let records = (0..n)
            .map(|k| {
                let x = Vector::from(vec![rate.powi(k as i32), 0.0]);
                IterationRecord {
                    k,
                    r: x.clone(),
                    x,
                    r_norm: 0.0,
                    beta: vec![],
                    y: None,
                    phi: None,
                    sigma: None,
                }
            })
            .collect();
        Trace {
            records,
            termination: Termination::MaxIter,
            m: 0,
            initial_guesses: 1,
            x_star: Some(Vector::zeros(2)),
        }
    }

    #[test]
    fn geometric_sequence() {
        let t = synthetic(0.5, 30);
        let s = estimate_rho(&t, RhoMethod::SigmaTail).unwrap();
        assert!((s.rho_hat - 0.5).abs() < 1e-14);
        assert_eq!(s.k_used, 29);
        let l = estimate_rho(&t, RhoMethod::LogSlope).unwrap();
        assert!((l.rho_hat - 0.5).abs() < 1e-12);
    }

    #[test]
    fn floor_stops_usable_range() {
        let t = synthetic(0.01, 40);
        let (pts, floored) = usable_errors(&t).unwrap();
        assert!(floored);
        assert_eq!(pts.len(), 6);
    }

    #[test]
    fn too_few_records() {
        let t = synthetic(0.9, 5);
        assert!(matches!(
            estimate_rho(&t, RhoMethod::SigmaTail),
            Err(Error::TooFewRecords { found: 4, .. })
        ));
    }

    #[test]
    fn fast_floor_is_finite() {
        let t = synthetic(1e-5, 10);
        let e = estimate_rho(&t, RhoMethod::SigmaTail).unwrap();
        assert!(e.finite);
        assert_eq!(e.rho_hat, 0.0);
    }
}
