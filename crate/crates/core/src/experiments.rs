//! Batch drivers: Monte Carlo initial guesses, angle and grid sweeps, the
//! two-guess grid search, regularization sweeps and NRBE traces.
//!
//! Every driver produces one row per sweep point in a fixed order, so the
//! result does not depend on how many threads ran it.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{estimate_rho, ls_nrbe, nrbe, RhoMethod};
use crate::anderson::{difference_matrix, fp_solve, solve, AndersonConfig, LsStrategy, Start, Termination, Trace};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::parallel::map_indexed;
use crate::problems::Problem;

pub const HISTOGRAM_BINS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SampleDomain {
    /// Uniform in the square `[lo, hi]^2` around `x*`.
    Box { lo: f64, hi: f64 },
    /// `x* + (cos t, sin t)` with `t` uniform in `[0, 2 pi)`.
    UnitCircle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LambdaScale {
    /// Each value is used as `lambda` directly.
    Absolute,
    /// Each value is `epsilon` in `lambda_k = epsilon * max(diag(R_k^T R_k))`.
    Relative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SweepKind {
    MonteCarlo { trials: usize, seed: u64, domain: SampleDomain },
    Theta { n_angles: usize },
    Grid { nx: usize, ny: usize, x_range: (f64, f64), y_range: (f64, f64) },
    DualGuess { n_theta1: usize, n_theta2: usize, n_alpha: usize, alpha_max: f64 },
    Lambda { lambdas: Vec<f64>, scale: LambdaScale },
    NrbeTrace,
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub problem: Problem,
    pub solver: AndersonConfig,
    pub kind: SweepKind,
    pub method: RhoMethod,
    /// Worker threads; 1 runs sequentially.
    pub jobs: usize,
    /// Starting point for the lambda and NRBE drivers.
    pub x0: Option<Vector>,
}

impl SweepConfig {
    pub fn new(problem: Problem, solver: AndersonConfig, kind: SweepKind) -> Self {
        Self {
            problem,
            solver,
            kind,
            method: RhoMethod::default(),
            jobs: 1,
            x0: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        match &self.kind {
            SweepKind::MonteCarlo { trials, domain, .. } => {
                if *trials == 0 {
                    return bad("trials must be at least 1");
                }
                if let SampleDomain::Box { lo, hi } = domain {
                    if !(lo < hi) {
                        return bad("sample box needs lo < hi");
                    }
                }
            }
            SweepKind::Theta { n_angles } if *n_angles == 0 => return bad("n_angles must be at least 1"),
            SweepKind::Grid { nx, ny, x_range, y_range } => {
                if *nx == 0 || *ny == 0 {
                    return bad("grid counts must be at least 1");
                }
                if !(x_range.0 <= x_range.1) || !(y_range.0 <= y_range.1) {
                    return bad("grid bounds must be ordered");
                }
            }
            SweepKind::DualGuess { n_theta1, n_theta2, n_alpha, alpha_max } => {
                if *n_theta1 == 0 || *n_theta2 == 0 || *n_alpha == 0 {
                    return bad("grid counts must be at least 1");
                }
                if !(*alpha_max > 0.0) {
                    return bad("alpha_max must be positive");
                }
            }
            SweepKind::Lambda { lambdas, .. } => {
                if lambdas.is_empty() {
                    return bad("at least one lambda is required");
                }
                if let Some(l) = lambdas.iter().find(|l| !(**l > 0.0) || !l.is_finite()) {
                    return Err(Error::InvalidConfig(format!("lambda must be positive, got {l}")));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// Column the statistics were taken over.
    pub column: String,
    /// Finite values that entered the statistics.
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Rows whose value was NaN (no estimate) or infinite (diverged).
    pub skipped: usize,
    /// 100 uniform bins on `[0, 1]`; the last bin is closed.
    pub histogram: Vec<u64>,
    /// Finite values outside `[0, 1]`.
    pub out_of_range: usize,
}

impl Summary {
    pub fn of(column: &str, values: impl IntoIterator<Item = f64>) -> Self {
        let mut histogram = vec![0u64; HISTOGRAM_BINS];
        let (mut count, mut sum, mut skipped, mut out_of_range) = (0usize, 0.0, 0usize, 0usize);
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            if !v.is_finite() {
                skipped += 1;
                continue;
            }
            count += 1;
            sum += v;
            min = min.min(v);
            max = max.max(v);
            if (0.0..=1.0).contains(&v) {
                let bin = ((v * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1);
                histogram[bin] += 1;
            } else {
                out_of_range += 1;
            }
        }
        let mean = if count > 0 { sum / count as f64 } else { f64::NAN };
        if count == 0 {
            min = f64::NAN;
            max = f64::NAN;
        }
        Self {
            column: column.to_string(),
            count,
            mean,
            min,
            max,
            skipped,
            histogram,
            out_of_range,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub summary: Summary,
    /// Named scalars that are not per-row, e.g. a reference estimate.
    pub extras: Vec<(String, f64)>,
}

impl SweepResult {
    fn new(columns: &[&str], rows: Vec<Vec<f64>>, summary_col: &str) -> Self {
        let columns: Vec<String> = columns.iter().map(|c| c.to_string()).collect();
        let idx = columns.iter().position(|c| c == summary_col).expect("summary column exists");
        let summary = Summary::of(summary_col, rows.iter().map(|r| r[idx]));
        Self {
            columns,
            rows,
            summary,
            extras: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn extra(&self, name: &str) -> Option<f64> {
        self.extras.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }

    /// Comma-separated rows with a header line, values in round-trip form.
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format_float(*v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// 17 significant digits; NaN becomes an empty field.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

/// `rho_hat`, `finite` flag and iteration count for one trace. Divergence
/// gives an infinite estimate and a missing estimate gives NaN.
fn rho_of(trace: &Trace, method: RhoMethod) -> (f64, f64, f64) {
    let iters = trace.last().k as f64;
    if trace.termination == Termination::NonFinite {
        return (f64::INFINITY, 0.0, iters);
    }
    match estimate_rho(trace, method) {
        Ok(e) => (e.rho_hat, if e.finite { 1.0 } else { 0.0 }, iters),
        Err(_) => (f64::NAN, 0.0, iters),
    }
}

fn run_rho(problem: &Problem, start: Start, cfg: &AndersonConfig, method: RhoMethod) -> (f64, f64, f64) {
    match solve(problem, &start, cfg) {
        Ok(t) => rho_of(&t, method),
        Err(_) => (f64::NAN, 0.0, 0.0),
    }
}

fn require_2d(problem: &Problem) -> Result<Vector> {
    if problem.dim() != 2 {
        return Err(Error::InvalidConfig(format!(
            "this sweep parametrizes the plane; problem has dimension {}",
            problem.dim()
        )));
    }
    problem
        .x_star()
        .cloned()
        .ok_or_else(|| Error::InvalidConfig("sweep needs a problem with known fixed point".into()))
}

/// The initial guess of Monte Carlo trial `index`. Each trial has its own
/// ChaCha stream, so the draw does not depend on other trials.
pub fn monte_carlo_x0(seed: u64, index: usize, domain: SampleDomain, x_star: &Vector) -> Vector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let offset = match domain {
        SampleDomain::Box { lo, hi } => (0..x_star.len()).map(|_| rng.gen_range(lo..hi)).collect(),
        SampleDomain::UnitCircle => {
            let t: f64 = rng.gen_range(0.0..2.0 * PI);
            let mut v = vec![0.0; x_star.len()];
            v[0] = t.cos();
            if v.len() > 1 {
                v[1] = t.sin();
            }
            v
        }
    };
    x_star.add(&Vector::from(offset))
}

pub const MONTE_CARLO_COLUMNS: [&str; 9] = [
    "trial", "x0_1", "x0_2", "rho_aa", "finite_aa", "iters_aa", "rho_fp", "beta_min", "beta_max",
];

/// One Monte Carlo row; exposed so tests can run trials in any order.
pub fn monte_carlo_trial(cfg: &SweepConfig, index: usize) -> Vec<f64> {
    let SweepKind::MonteCarlo { seed, domain, .. } = cfg.kind else {
        panic!("monte_carlo_trial needs a Monte Carlo sweep");
    };
    let xs = cfg.problem.x_star().cloned().unwrap_or_else(|| Vector::zeros(cfg.problem.dim()));
    let x0 = monte_carlo_x0(seed, index, domain, &xs);
    let (rho_aa, fin, iters, bmin, bmax) = match solve(&cfg.problem, &Start::Single(x0.clone()), &cfg.solver) {
        Ok(t) => {
            let (r, f, i) = rho_of(&t, cfg.method);
            let betas = t.records.iter().flat_map(|r| r.beta.iter().copied());
            let (lo, hi) = betas.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            (r, f, i, lo, hi)
        }
        Err(_) => (f64::NAN, 0.0, 0.0, f64::NAN, f64::NAN),
    };
    let rho_fp = fp_solve(&cfg.problem, &x0, cfg.solver.max_iter, cfg.solver.tol_rel)
        .map_or(f64::NAN, |t| rho_of(&t, cfg.method).0);
    let get = |i: usize| x0.as_slice().get(i).copied().unwrap_or(f64::NAN);
    let fix = |v: f64| if v.is_finite() { v } else { f64::NAN };
    vec![index as f64, get(0), get(1), rho_aa, fin, iters, rho_fp, fix(bmin), fix(bmax)]
}

pub fn run_monte_carlo(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let SweepKind::MonteCarlo { trials, .. } = cfg.kind else {
        return Err(Error::InvalidConfig("expected a Monte Carlo sweep".into()));
    };
    if cfg.problem.x_star().is_none() {
        return Err(Error::InvalidConfig("Monte Carlo sweep needs a known fixed point".into()));
    }
    let rows = map_indexed(trials, cfg.jobs, |i| monte_carlo_trial(cfg, i));
    Ok(aggregate_monte_carlo(rows))
}

/// Builds the result from trial rows given in any order.
pub fn aggregate_monte_carlo(mut rows: Vec<Vec<f64>>) -> SweepResult {
    rows.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let mut res = SweepResult::new(&MONTE_CARLO_COLUMNS, rows, "rho_aa");
    let fp = Summary::of("rho_fp", res.rows.iter().map(|r| r[6]));
    res.extras.push(("rho_fp_mean".into(), fp.mean));
    res.extras.push(("rho_fp_min".into(), fp.min));
    res.extras.push(("rho_fp_max".into(), fp.max));
    let bmin = res.rows.iter().map(|r| r[7]).filter(|v| v.is_finite()).fold(f64::INFINITY, f64::min);
    res.extras.push(("beta_min".into(), bmin));
    res
}

pub fn run_theta_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let SweepKind::Theta { n_angles } = cfg.kind else {
        return Err(Error::InvalidConfig("expected a theta sweep".into()));
    };
    let xs = require_2d(&cfg.problem)?;
    let rows = map_indexed(n_angles, cfg.jobs, |i| {
        let theta = 2.0 * PI * i as f64 / n_angles as f64;
        let x0 = xs.add(&Vector::from(vec![theta.cos(), theta.sin()]));
        let (rho, fin, iters) = run_rho(&cfg.problem, Start::Single(x0), &cfg.solver, cfg.method);
        vec![theta, rho, fin, iters]
    });
    Ok(SweepResult::new(&["theta", "rho_hat", "finite", "iters"], rows, "rho_hat"))
}

fn linspace(lo: f64, hi: f64, n: usize, i: usize) -> f64 {
    if n == 1 {
        lo
    } else {
        lo + (hi - lo) * i as f64 / (n - 1) as f64
    }
}

pub fn run_grid_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let SweepKind::Grid { nx, ny, x_range, y_range } = cfg.kind else {
        return Err(Error::InvalidConfig("expected a grid sweep".into()));
    };
    require_2d(&cfg.problem)?;
    let rows = map_indexed(nx * ny, cfg.jobs, |idx| {
        let (i, j) = (idx / ny, idx % ny);
        let x = linspace(x_range.0, x_range.1, nx, i);
        let y = linspace(y_range.0, y_range.1, ny, j);
        let (rho, fin, iters) = run_rho(&cfg.problem, Start::Single(Vector::from(vec![x, y])), &cfg.solver, cfg.method);
        vec![x, y, rho, fin, iters]
    });
    Ok(SweepResult::new(&["x", "y", "rho_hat", "finite", "iters"], rows, "rho_hat"))
}

/// General-guess AA(1) from `x_0 = x* + (cos t1, sin t1)` and
/// `x_1 = x* + alpha (cos t2, sin t2)` over `t = 2 pi k / n` and
/// `alpha = alpha_max k / n_alpha`, `k = 1..=n_alpha`.
pub fn run_dual_guess_search(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let SweepKind::DualGuess { n_theta1, n_theta2, n_alpha, alpha_max } = cfg.kind else {
        return Err(Error::InvalidConfig("expected a dual-guess sweep".into()));
    };
    let xs = require_2d(&cfg.problem)?;
    let solver = AndersonConfig { m: 1, ..cfg.solver.clone() };
    let total = n_theta1 * n_theta2 * n_alpha;
    let rows = map_indexed(total, cfg.jobs, |idx| {
        let ia = idx % n_alpha;
        let i2 = (idx / n_alpha) % n_theta2;
        let i1 = idx / (n_alpha * n_theta2);
        let t1 = 2.0 * PI * i1 as f64 / n_theta1 as f64;
        let t2 = 2.0 * PI * i2 as f64 / n_theta2 as f64;
        let alpha = alpha_max * (ia + 1) as f64 / n_alpha as f64;
        let x0 = xs.add(&Vector::from(vec![t1.cos(), t1.sin()]));
        let x1 = xs.add(&Vector::from(vec![alpha * t2.cos(), alpha * t2.sin()]));
        let (rho, fin, iters) = run_rho(&cfg.problem, Start::General(vec![x0, x1]), &solver, cfg.method);
        vec![t1, t2, alpha, rho, fin, iters]
    });
    Ok(SweepResult::new(
        &["theta1", "theta2", "alpha", "rho_hat", "finite", "iters"],
        rows,
        "rho_hat",
    ))
}

fn sweep_x0(cfg: &SweepConfig) -> Result<Vector> {
    match &cfg.x0 {
        Some(x) => {
            cfg.problem.check_dim(x)?;
            Ok(x.clone())
        }
        None => Err(Error::InvalidConfig("this sweep needs an initial guess".into())),
    }
}

/// AA(1) with regularized coefficients for each lambda. Also records the
/// unregularized estimate (`rho_unregularized`) and, in absolute mode,
/// `scale = ||r_0||^2`.
pub fn run_lambda_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let SweepKind::Lambda { lambdas, scale } = &cfg.kind else {
        return Err(Error::InvalidConfig("expected a lambda sweep".into()));
    };
    let x0 = sweep_x0(cfg)?;
    let base = AndersonConfig { m: 1, ..cfg.solver.clone() };
    let rows = map_indexed(lambdas.len(), cfg.jobs, |i| {
        let l = lambdas[i];
        let ls_strategy = match scale {
            LambdaScale::Absolute => LsStrategy::Regularized { lambda: l },
            LambdaScale::Relative => LsStrategy::RegularizedRelative { epsilon: l },
        };
        let c = AndersonConfig { ls_strategy, ..base.clone() };
        let (rho, fin, iters) = run_rho(&cfg.problem, Start::Single(x0.clone()), &c, cfg.method);
        vec![l, rho, fin, iters]
    });
    let mut res = SweepResult::new(&["lambda", "rho_hat", "finite", "iters"], rows, "rho_hat");
    let plain = AndersonConfig { ls_strategy: LsStrategy::Qr, ..base };
    let (rho0, _, _) = run_rho(&cfg.problem, Start::Single(x0.clone()), &plain, cfg.method);
    res.extras.push(("rho_unregularized".into(), rho0));
    let r0 = crate::problems::residual(&cfg.problem, &x0)?;
    res.extras.push(("scale".into(), r0.dot(&r0)));
    Ok(res)
}

/// Per-iteration NRBE of the linear system `A x = b` and of each step's
/// least-squares problem.
pub fn run_nrbe_trace(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let lin = cfg
        .problem
        .as_linear()
        .ok_or_else(|| Error::InvalidConfig("NRBE trace needs a linear problem".into()))?;
    let x0 = sweep_x0(cfg)?;
    let trace = solve(&cfg.problem, &Start::Single(x0), &cfg.solver)?;
    let (a, b) = (lin.system_matrix(), lin.rhs());
    let rows = nrbe_rows(&trace, a, b)?;
    let mut res = SweepResult::new(&["k", "r_norm", "nrbe_system", "nrbe_ls"], rows, "nrbe_system");
    let ls = Summary::of("nrbe_ls", res.rows.iter().map(|r| r[3]));
    res.extras.push(("nrbe_ls_max".into(), ls.max));
    res.extras.push(("nrbe_system_final".into(), res.rows.last().map_or(f64::NAN, |r| r[2])));
    Ok(res)
}

fn nrbe_rows(trace: &Trace, a: &Matrix, b: &Vector) -> Result<Vec<Vec<f64>>> {
    let rs = trace.residuals();
    let mut rows = Vec::with_capacity(trace.len());
    for (k, rec) in trace.records.iter().enumerate() {
        let sys = nrbe(a, b, &rec.x)?;
        let ls = if rec.beta.is_empty() {
            f64::NAN
        } else {
            let window = &rs[k - rec.beta.len()..=k];
            let newest_first: Vec<Vector> = window.iter().rev().map(|v| (*v).clone()).collect();
            let r_mat = difference_matrix(&newest_first);
            ls_nrbe(&r_mat, &rec.r, &Vector::from(rec.beta.clone()))?
        };
        rows.push(vec![k as f64, rec.r_norm, sys, ls]);
    }
    Ok(rows)
}
