//! Windowed Anderson acceleration AA(m).
//!
//! Each step solves the least-squares problem
//! `min || r_k + sum_i beta_i (r_k - r_{k-i}) ||` over the last `min(k, m)`
//! residual differences and sets
//! `x_{k+1} = q(x_k) + sum_i beta_i (q(x_k) - q(x_{k-i}))`.
//! The window slides; it is never restarted. With `m = 0` this is the plain
//! fixed-point iteration.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::linalg::{pseudo_inverse_solve, qr_least_squares, regularized_solve, Matrix, Vector, EPS};
use crate::problems::Problem;

/// Relative size below which a residual difference counts as zero.
pub const STALL_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LsStrategy {
    /// Column-pivoted QR, basic solution when rank deficient.
    Qr,
    /// Minimum-norm solution through the pseudo-inverse.
    PseudoInverse,
    /// Normal equations shifted by `lambda I`.
    Regularized { lambda: f64 },
    /// Normal equations shifted by `epsilon * max(diag(R^T R)) I`, so the
    /// shift follows the size of the residual differences.
    RegularizedRelative { epsilon: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AndersonConfig {
    pub m: usize,
    pub max_iter: usize,
    /// Stop once `||r_k|| <= tol_rel * ||r_0||`.
    pub tol_rel: f64,
    pub ls_strategy: LsStrategy,
}

impl Default for AndersonConfig {
    fn default() -> Self {
        Self {
            m: 1,
            max_iter: 1000,
            tol_rel: 1e-14,
            ls_strategy: LsStrategy::Qr,
        }
    }
}

impl AndersonConfig {
    pub fn with_m(m: usize) -> Self {
        Self { m, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be positive".into()));
        }
        if !(self.tol_rel > 0.0) || !self.tol_rel.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "tol_rel must be positive, got {}",
                self.tol_rel
            )));
        }
        if let LsStrategy::Regularized { lambda } | LsStrategy::RegularizedRelative { epsilon: lambda } =
            self.ls_strategy
        {
            if !(lambda > 0.0) || !lambda.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "regularization requires lambda > 0, got {lambda}"
                )));
            }
        }
        Ok(())
    }
}

/// How the iteration is started.
#[derive(Debug, Clone, PartialEq)]
pub enum Start {
    /// One initial guess; `x_1 = q(x_0)` and the window grows to `m`.
    Single(Vector),
    /// `x_0, ..., x_m` supplied up front; the full window is used from the
    /// first accelerated step.
    General(Vec<Vector>),
}

/// Root-averaged error `||x_k - x*||^(1/k)`, or a marker that the error has
/// reached machine precision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Sigma {
    Value(f64),
    Floor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub x: Vector,
    pub r: Vector,
    pub r_norm: f64,
    /// Coefficients used to form `x_{k+1}`; empty when no accelerated step
    /// was taken from `x_k`.
    pub beta: Vec<f64>,
    /// `||r_k|| / ||r_{k-1}||`
    pub y: Option<f64>,
    /// Angle between `r_k` and `r_{k-1}`, in `[0, pi]`.
    pub phi: Option<f64>,
    pub sigma: Option<Sigma>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Converged,
    MaxIter,
    /// The whole window repeated bitwise, so every later iterate would too.
    StalledWindow,
    NonFinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
    pub m: usize,
    /// Number of supplied initial guesses (1 for `Start::Single`).
    pub initial_guesses: usize,
    pub x_star: Option<Vector>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> &IterationRecord {
        self.records.last().expect("traces hold at least x_0")
    }

    pub fn residuals(&self) -> Vec<&Vector> {
        self.records.iter().map(|r| &r.r).collect()
    }

    pub fn residual_norms(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.r_norm).collect()
    }

    /// `beta^(k)` for each record (empty where no step was taken).
    pub fn betas(&self) -> Vec<&[f64]> {
        self.records.iter().map(|r| r.beta.as_slice()).collect()
    }

    pub fn is_general_guess(&self) -> bool {
        self.initial_guesses > 1
    }
}

#[derive(Debug, Clone)]
struct WindowEntry {
    x: Vector,
    qx: Vector,
    r: Vector,
}

/// Solver state: the iteration counter and the window of the last
/// `min(k, m) + 1` iterates, newest first.
#[derive(Debug, Clone)]
pub struct AndersonState {
    k: usize,
    window: VecDeque<WindowEntry>,
    /// `r_{k-1}`, kept separately because the window holds only `x_k` when m = 0.
    prev_r: Option<Vector>,
}

impl AndersonState {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    pub fn current(&self) -> (&Vector, &Vector) {
        let e = &self.window[0];
        (&e.x, &e.r)
    }

    /// Window residuals `r_k, r_{k-1}, ...`.
    pub fn residuals(&self) -> Vec<Vector> {
        self.window.iter().map(|e| e.r.clone()).collect()
    }

    fn push(&mut self, entry: WindowEntry, capacity: usize) {
        self.prev_r = self.window.front().map(|e| e.r.clone());
        self.window.push_front(entry);
        self.window.truncate(capacity);
        self.k += 1;
    }
}

fn evaluate(problem: &Problem, x: Vector) -> WindowEntry {
    let qx = problem.apply(&x);
    let r = x.sub(&qx);
    WindowEntry { x, qx, r }
}

/// Builds `R_k = [r_k - r_{k-1}, ..., r_k - r_{k-m'}]` from residuals listed
/// newest first.
pub fn difference_matrix(residuals: &[Vector]) -> Matrix {
    let rk = &residuals[0];
    let cols: Vec<Vector> = residuals[1..].iter().map(|ri| rk.sub(ri)).collect();
    Matrix::from_columns(rk.len(), &cols)
}

/// Acceleration coefficients for the residual window `r_k, r_{k-1}, ...`
/// (newest first). For a single difference with `r_k = r_{k-1}` the
/// coefficient is zero.
pub fn compute_beta(residuals: &[Vector], strategy: LsStrategy) -> Result<Vector> {
    if residuals.len() < 2 {
        return Err(dim_err("at least two residuals", residuals.len()));
    }
    let n = residuals[0].len();
    if let Some(bad) = residuals.iter().find(|r| r.len() != n) {
        return Err(dim_err(n, bad.len()));
    }
    if !residuals.iter().all(Vector::is_finite) {
        return Err(Error::NonFinite("residual window"));
    }
    let rk = &residuals[0];
    let r = difference_matrix(residuals);
    if r.cols() == 1 && r.column(0).norm() <= STALL_TOL * rk.norm() {
        return Ok(Vector::zeros(1));
    }
    match strategy {
        LsStrategy::Qr => qr_least_squares(&r, rk),
        LsStrategy::PseudoInverse => Ok(pseudo_inverse_solve(&r, rk)?.scale(-1.0)),
        LsStrategy::Regularized { lambda } => Ok(regularized_solve(&r, rk, lambda)?.scale(-1.0)),
        LsStrategy::RegularizedRelative { epsilon } => {
            let d = (0..r.cols()).map(|j| r.column(j).dot(&r.column(j))).fold(0.0, f64::max);
            if d == 0.0 {
                return Ok(Vector::zeros(r.cols()));
            }
            Ok(regularized_solve(&r, rk, epsilon * d)?.scale(-1.0))
        }
    }
}

fn angle(a: &Vector, b: &Vector) -> Option<f64> {
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    let c = (a.dot(b) / (na * nb)).clamp(-1.0, 1.0);
    Some(c.acos())
}

fn sigma_of(k: usize, x: &Vector, x_star: Option<&Vector>) -> Option<Sigma> {
    let xs = x_star?;
    if k == 0 {
        return None;
    }
    let err = x.sub(xs).norm();
    if err > 1e2 * EPS * xs.norm() + 1e-290 {
        Some(Sigma::Value(err.powf(1.0 / k as f64)))
    } else {
        Some(Sigma::Floor)
    }
}

fn record_for(state: &AndersonState, beta: Vec<f64>, x_star: Option<&Vector>) -> IterationRecord {
    let cur = &state.window[0];
    let r_norm = cur.r.norm();
    let (y, phi) = match &state.prev_r {
        Some(prev) => {
            let pn = prev.norm();
            let y = if pn > 0.0 { Some(r_norm / pn) } else { None };
            (y, angle(&cur.r, prev))
        }
        None => (None, None),
    };
    IterationRecord {
        k: state.k,
        x: cur.x.clone(),
        r: cur.r.clone(),
        r_norm,
        beta,
        y,
        phi,
        sigma: sigma_of(state.k, &cur.x, x_star),
    }
}

/// Initial state holding `x_0` only.
pub fn initial_state(problem: &Problem, x0: &Vector) -> Result<AndersonState> {
    problem.check_dim(x0)?;
    let mut window = VecDeque::new();
    window.push_front(evaluate(problem, x0.clone()));
    Ok(AndersonState {
        k: 0,
        window,
        prev_r: None,
    })
}

/// One AA(m) step from `x_k`. Returns `x_{k+1}` and the record for `x_k`,
/// and advances `state`.
pub fn aa_step(
    problem: &Problem,
    state: &mut AndersonState,
    config: &AndersonConfig,
) -> Result<(Vector, IterationRecord)> {
    let depth = state.window.len() - 1;
    let beta = if depth == 0 {
        Vector::zeros(0)
    } else {
        let res: Vec<Vector> = state.window.iter().map(|e| e.r.clone()).collect();
        compute_beta(&res, config.ls_strategy)?
    };
    let record = record_for(state, beta.as_slice().to_vec(), problem.x_star());
    let q_k = &state.window[0].qx;
    let mut next = q_k.clone();
    for (i, b) in beta.iter().enumerate() {
        let diff = q_k.sub(&state.window[i + 1].qx);
        next.axpy(*b, &diff);
    }
    if !next.is_finite() {
        return Err(Error::NonFinite("iterate"));
    }
    let entry = evaluate(problem, next.clone());
    if !entry.r.is_finite() {
        return Err(Error::NonFinite("residual"));
    }
    state.push(entry, config.m + 1);
    Ok((next, record))
}

fn window_iterates(state: &AndersonState) -> Vec<Vector> {
    state.window.iter().map(|e| e.x.clone()).collect()
}

/// Runs AA(m) until `||r_k|| <= tol_rel ||r_0||`, `max_iter` steps, a frozen
/// window, or a non-finite value.
pub fn solve(problem: &Problem, start: &Start, config: &AndersonConfig) -> Result<Trace> {
    config.validate()?;
    let x_star = problem.x_star();
    let capacity = config.m + 1;
    let guesses = match start {
        Start::Single(x0) => vec![x0.clone()],
        Start::General(xs) => {
            if xs.len() != config.m + 1 {
                return Err(Error::InvalidConfig(format!(
                    "general start needs m + 1 = {} guesses, got {}",
                    config.m + 1,
                    xs.len()
                )));
            }
            xs.clone()
        }
    };
    for g in &guesses {
        problem.check_dim(g)?;
        if !g.is_finite() {
            return Err(Error::NonFinite("initial guess"));
        }
    }
    let mut state = initial_state(problem, &guesses[0])?;
    let mut records = Vec::new();
    for g in guesses.iter().skip(1) {
        records.push(record_for(&state, Vec::new(), x_star));
        state.push(evaluate(problem, g.clone()), capacity);
    }
    let r0_norm = records
        .first()
        .map_or_else(|| state.window[0].r.norm(), |r: &IterationRecord| r.r_norm);
    let threshold = config.tol_rel * r0_norm;

    let termination = loop {
        let r_norm = state.window[0].r.norm();
        if r_norm <= threshold {
            records.push(record_for(&state, Vec::new(), x_star));
            break Termination::Converged;
        }
        if state.k >= config.max_iter {
            records.push(record_for(&state, Vec::new(), x_star));
            break Termination::MaxIter;
        }
        let before = window_iterates(&state);
        match aa_step(problem, &mut state, config) {
            Ok((_, rec)) => records.push(rec),
            Err(Error::NonFinite(_)) => {
                records.push(record_for(&state, Vec::new(), x_star));
                break Termination::NonFinite;
            }
            Err(e) => return Err(e),
        }
        // an identical window can only reproduce itself from here on
        if window_iterates(&state) == before {
            records.push(record_for(&state, Vec::new(), x_star));
            break Termination::StalledWindow;
        }
    };
    Ok(Trace {
        records,
        termination,
        m: config.m,
        initial_guesses: guesses.len(),
        x_star: x_star.cloned(),
    })
}

/// Plain fixed-point iteration `x_{k+1} = q(x_k)` with the same trace schema.
pub fn fp_solve(problem: &Problem, x0: &Vector, max_iter: usize, tol_rel: f64) -> Result<Trace> {
    let config = AndersonConfig {
        m: 0,
        max_iter,
        tol_rel,
        ls_strategy: LsStrategy::Qr,
    };
    solve(problem, &Start::Single(x0.clone()), &config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::builtin;

    fn v2(a: f64, b: f64) -> Vector {
        Vector::from(vec![a, b])
    }

    #[test]
    fn beta_examples() {
        let b = compute_beta(&[v2(1.5, 0.5), v2(1.0, 1.0)], LsStrategy::Qr).unwrap();
        assert!((b[0] + 1.0).abs() < 1e-15);
        let b = compute_beta(&[v2(1.0, 0.0), v2(0.0, 1.0)], LsStrategy::Qr).unwrap();
        assert!((b[0] + 0.5).abs() < 1e-15);
        for s in [
            LsStrategy::Qr,
            LsStrategy::PseudoInverse,
            LsStrategy::Regularized { lambda: 1.0 },
            LsStrategy::RegularizedRelative { epsilon: 1e-16 },
        ] {
            let b = compute_beta(&[v2(0.3, 0.7), v2(0.3, 0.7)], s).unwrap();
            assert_eq!(b.as_slice(), &[0.0]);
        }
    }

    #[test]
    fn beta_rejects_bad_window() {
        assert!(compute_beta(&[v2(1.0, 0.0)], LsStrategy::Qr).is_err());
        assert!(compute_beta(&[v2(1.0, 0.0), Vector::zeros(3)], LsStrategy::Qr).is_err());
        assert!(compute_beta(&[v2(f64::NAN, 0.0), v2(1.0, 0.0)], LsStrategy::Qr).is_err());
    }

    #[test]
    fn strategies_agree_on_full_rank() {
        let res = [v2(0.3, -0.1), v2(0.5, 0.4), v2(-0.2, 0.9)];
        let a = compute_beta(&res, LsStrategy::Qr).unwrap();
        let b = compute_beta(&res, LsStrategy::PseudoInverse).unwrap();
        assert!(a.sub(&b).norm() < 1e-13);
    }

    #[test]
    fn config_validation() {
        let mut c = AndersonConfig::default();
        c.tol_rel = 0.0;
        assert!(c.validate().is_err());
        let c = AndersonConfig {
            ls_strategy: LsStrategy::Regularized { lambda: 0.0 },
            ..AndersonConfig::default()
        };
        assert!(c.validate().is_err());
        let c = AndersonConfig {
            max_iter: 0,
            ..AndersonConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn m_zero_is_fixed_point_iteration() {
        let p = builtin("prob41").unwrap();
        let x0 = v2(0.2, 0.3);
        let t = solve(&p, &Start::Single(x0.clone()), &AndersonConfig { max_iter: 10, ..AndersonConfig::with_m(0) })
            .unwrap();
        let mut x = x0;
        for rec in &t.records {
            assert_eq!(rec.x, x);
            assert!(rec.beta.is_empty());
            x = p.apply(&x);
        }
    }

    #[test]
    fn converged_at_start() {
        let p = builtin("prob41").unwrap();
        let t = solve(&p, &Start::Single(Vector::zeros(2)), &AndersonConfig::with_m(1)).unwrap();
        assert_eq!(t.termination, Termination::Converged);
        assert_eq!(t.len(), 1);
        assert_eq!(t.records[0].k, 0);
    }

    #[test]
    fn window_grows_to_m() {
        let m = Matrix::diag(&[0.1, 0.3, 0.5, 0.7, 0.9, 0.95]);
        let p = Problem::Linear(crate::problems::LinearProblem::new(m, Vector::zeros(6), None).unwrap());
        let cfg = AndersonConfig { max_iter: 6, ..AndersonConfig::with_m(3) };
        let t = solve(&p, &Start::Single(Vector::from(vec![1.0; 6])), &cfg).unwrap();
        let lens: Vec<usize> = t.records.iter().map(|r| r.beta.len()).collect();
        assert_eq!(&lens[..6], &[0, 1, 2, 3, 3, 3]);
    }

    #[test]
    fn general_start_requires_m_plus_one() {
        let p = builtin("prob41").unwrap();
        let cfg = AndersonConfig::with_m(2);
        assert!(solve(&p, &Start::General(vec![v2(1.0, 0.0)]), &cfg).is_err());
        let t = solve(
            &p,
            &Start::General(vec![v2(1.0, 0.0), v2(0.0, 1.0), v2(0.5, 0.5)]),
            &AndersonConfig { max_iter: 5, ..cfg },
        )
        .unwrap();
        assert!(t.records[0].beta.is_empty() && t.records[1].beta.is_empty());
        assert_eq!(t.records[2].beta.len(), 2);
        assert!(t.is_general_guess());
    }

    #[test]
    fn diagnostics_are_consistent() {
        let p = builtin("prob42").unwrap();
        let t = solve(&p, &Start::Single(v2(0.0001, 0.3023)), &AndersonConfig { max_iter: 30, ..AndersonConfig::default() })
            .unwrap();
        for w in t.records.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let y = b.y.unwrap();
            assert!((y - b.r_norm / a.r_norm).abs() < 1e-15);
            let phi = b.phi.unwrap();
            assert!((0.0..=std::f64::consts::PI).contains(&phi));
        }
    }

    #[test]
    fn deterministic() {
        let p = builtin("prob43_nonlinear").unwrap();
        let cfg = AndersonConfig::with_m(2);
        let a = solve(&p, &Start::Single(v2(0.3, -0.2)), &cfg).unwrap();
        let b = solve(&p, &Start::Single(v2(0.3, -0.2)), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn divergence_reports_non_finite() {
        let p = builtin("prob43_nonlinear").unwrap();
        let t = fp_solve(&p, &v2(3.0, 3.0), 1000, 1e-14).unwrap();
        assert_eq!(t.termination, Termination::NonFinite);
        assert!(t.records.iter().all(|r| r.x.is_finite()));
    }
}
