//! `aam`: run AA(m), its verification checks and the experiment sweeps.
//!
//! Every subcommand prints a single JSON report on stdout. Tabular data goes
//! to the CSV file named by `--out` (`--trace` for `solve` and `fp`).
//! Exit status is 0 on success, 1 for usage or input errors and 2 when the
//! computation fails or a check does not hold.

mod args;
mod csv;

use std::fs;
use std::path::Path;
use std::process::ExitCode;

use aam_core::analysis::{
    aa1_residual_recursion, bounds_check, count_violations, estimate_rho, lk_recursion, memory_effect_factor,
    scaling_invariance_check, trace_polynomials, verify_lk_against_trace, verify_multi_krylov,
    verify_polynomial_trace, BoundsRecord,
};
use aam_core::anderson::{fp_solve, solve, AndersonConfig, Start, Termination, Trace};
use aam_core::experiments::{
    run_dual_guess_search, run_grid_sweep, run_lambda_sweep, run_monte_carlo, run_nrbe_trace, run_theta_sweep,
    SweepConfig, SweepKind, SweepResult,
};
use aam_core::krylov::gmres;
use aam_core::{Error, Problem};
use clap::Parser;
use serde_json::{json, Value};

use args::{Cli, Command, ProblemArgs, SolverArgs, SweepArgs};

// Thresholds used by the check subcommands.
const GMRES_SLACK: f64 = 1e-10;
const POLY_TOL: f64 = 1e-8;
const RECURSION_TOL: f64 = 1e-11;
const LK_TOL: f64 = 1e-9;
const RANK_TOL: f64 = 1e-10;
const SCALING_TOL: f64 = 1e-9;

#[derive(Debug)]
enum Failure {
    Usage(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Numerical(_) => 2,
        }
    }
}

/// Errors from loading inputs are usage errors regardless of kind.
fn input(e: Error) -> Failure {
    Failure::Usage(e.to_string())
}

/// Classifies errors raised while computing.
fn compute(e: Error) -> Failure {
    match e {
        Error::DimensionMismatch { .. }
        | Error::InvalidConfig(_)
        | Error::InvalidProblem(_)
        | Error::UnknownBuiltin { .. }
        | Error::Parse(_)
        | Error::TraceMode(_) => Failure::Usage(e.to_string()),
        _ => Failure::Numerical(e.to_string()),
    }
}

type Outcome = Result<(Value, bool), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok((report, ok)) => {
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            if ok {
                ExitCode::SUCCESS
            } else {
                eprintln!("error: check failed");
                ExitCode::from(2)
            }
        }
        Err(f) => {
            match &f {
                Failure::Usage(m) | Failure::Numerical(m) => eprintln!("error: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}

fn run(cmd: Command) -> Outcome {
    match cmd {
        Command::Solve { problem, solver, guesses, trace } => cmd_solve(&problem, &solver, guesses, trace.as_deref()),
        Command::Fp { problem, max_iter, tol, trace } => cmd_fp(&problem, max_iter, tol, trace.as_deref()),
        Command::GmresCompare { problem, m, iters, out } => cmd_gmres(&problem, m, iters, out.as_deref()),
        Command::Bounds { problem, iters, out } => cmd_bounds(&problem, iters, out.as_deref()),
        Command::PolyVerify { problem, m, steps, out } => cmd_poly(&problem, m, steps, out.as_deref()),
        Command::LkVerify { problem, steps, out } => cmd_lk(&problem, steps, out.as_deref()),
        Command::ScalingCheck { problem, alpha, steps } => cmd_scaling(&problem, alpha, steps),
        Command::Nrbe { problem, solver, out } => {
            let (p, x0) = problem.load_with_x0()?;
            let mut cfg = SweepConfig::new(p, solver.config()?, SweepKind::NrbeTrace);
            cfg.x0 = Some(x0);
            sweep_report(run_nrbe_trace(&cfg), out.as_deref())
        }
        Command::MonteCarlo { problem, solver, sweep, trials, seed, domain, lo, hi, out } => {
            let kind = SweepKind::MonteCarlo { trials, seed, domain: args::domain(domain, lo, hi) };
            let cfg = sweep_config(&problem, &solver, &sweep, kind)?;
            sweep_report(run_monte_carlo(&cfg), out.as_deref())
        }
        Command::SweepTheta { problem, solver, sweep, n_angles, out } => {
            let cfg = sweep_config(&problem, &solver, &sweep, SweepKind::Theta { n_angles })?;
            sweep_report(run_theta_sweep(&cfg), out.as_deref())
        }
        Command::SweepGrid { problem, solver, sweep, nx, ny, x_range, y_range, out } => {
            let kind = SweepKind::Grid {
                nx,
                ny,
                x_range: args::pair(&x_range)?,
                y_range: args::pair(&y_range)?,
            };
            let cfg = sweep_config(&problem, &solver, &sweep, kind)?;
            sweep_report(run_grid_sweep(&cfg), out.as_deref())
        }
        Command::DualGuess { problem, solver, sweep, n_theta1, n_theta2, n_alpha, alpha_max, out } => {
            let kind = SweepKind::DualGuess { n_theta1, n_theta2, n_alpha, alpha_max };
            let cfg = sweep_config(&problem, &solver, &sweep, kind)?;
            sweep_report(run_dual_guess_search(&cfg), out.as_deref())
        }
        Command::SweepLambda { problem, solver, sweep, lambdas, scale, out } => {
            let kind = SweepKind::Lambda { lambdas, scale: scale.into() };
            let mut cfg = sweep_config(&problem, &solver, &sweep, kind)?;
            cfg.x0 = Some(problem.load_with_x0()?.1);
            sweep_report(run_lambda_sweep(&cfg), out.as_deref())
        }
    }
}

fn write_file(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    if let Some(p) = path {
        fs::write(p, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", p.display())))?;
    }
    Ok(())
}

fn linear_m(p: &Problem) -> Result<aam_core::Matrix, Failure> {
    p.as_linear()
        .map(|l| l.iteration_matrix().clone())
        .ok_or_else(|| Failure::Usage("this subcommand needs a linear problem".into()))
}

fn exhaustive(m: usize, max_iter: usize) -> AndersonConfig {
    AndersonConfig {
        max_iter,
        tol_rel: f64::MIN_POSITIVE,
        ..AndersonConfig::with_m(m)
    }
}

fn termination_name(t: Termination) -> &'static str {
    match t {
        Termination::Converged => "converged",
        Termination::MaxIter => "max_iter",
        Termination::StalledWindow => "stalled_window",
        Termination::NonFinite => "non_finite",
    }
}

fn trace_report(t: &Trace) -> Value {
    let est = estimate_rho(t, Default::default()).ok();
    json!({
        "termination": termination_name(t.termination),
        "iterations": t.last().k,
        "r_norm_initial": t.records[0].r_norm,
        "r_norm_final": t.last().r_norm,
        "x_final": t.last().x.as_slice(),
        "rho_hat": est.map(|e| e.rho_hat),
        "rho_finite": est.map(|e| e.finite),
    })
}

/// Bounds per record when the trace is a linear single-guess AA(1) run.
fn bounds_for(t: &Trace, p: &Problem) -> Option<Vec<BoundsRecord>> {
    let m = p.as_linear()?.iteration_matrix();
    bounds_check(t, m).ok()
}

fn cmd_solve(pa: &ProblemArgs, sa: &SolverArgs, guesses: Option<String>, trace_path: Option<&Path>) -> Outcome {
    let cfg = sa.config()?;
    let (p, start) = match guesses {
        Some(g) => (pa.load()?, Start::General(args::vectors(&g)?)),
        None => {
            let (p, x0) = pa.load_with_x0()?;
            (p, Start::Single(x0))
        }
    };
    let t = solve(&p, &start, &cfg).map_err(compute)?;
    write_file(trace_path, &csv::trace(&t, bounds_for(&t, &p).as_deref()))?;
    let mut report = trace_report(&t);
    if t.is_general_guess() && p.as_linear().is_some() {
        let dev = verify_multi_krylov(&t, &p).map_err(compute)?.1;
        report["multi_krylov_deviation"] = json!(dev);
    }
    Ok((report, t.termination != Termination::NonFinite))
}

fn cmd_fp(pa: &ProblemArgs, max_iter: usize, tol: f64, trace_path: Option<&Path>) -> Outcome {
    let (p, x0) = pa.load_with_x0()?;
    let t = fp_solve(&p, &x0, max_iter, tol).map_err(compute)?;
    write_file(trace_path, &csv::trace(&t, None))?;
    Ok((trace_report(&t), t.termination != Termination::NonFinite))
}

fn cmd_gmres(pa: &ProblemArgs, m: usize, iters: usize, out: Option<&Path>) -> Outcome {
    let (p, x0) = pa.load_with_x0()?;
    let lin = p
        .as_linear()
        .ok_or_else(|| Failure::Usage("gmres-compare needs a linear problem".into()))?;
    let g = gmres(lin.system_matrix(), lin.rhs(), &x0, iters).map_err(compute)?;
    let t = solve(&p, &Start::Single(x0), &exhaustive(m, iters)).map_err(compute)?;
    let r0 = t.records[0].r_norm.max(f64::MIN_POSITIVE);
    let mut rows = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for rec in &t.records {
        let gk = g.norm_at(rec.k);
        worst = worst.max((gk - rec.r_norm) / r0);
        rows.push(vec![rec.k as f64, rec.r_norm, gk]);
    }
    write_file(out, &csv::table(&["k", "aa_r_norm", "gmres_r_norm"], &rows))?;
    let ok = worst <= GMRES_SLACK;
    Ok((
        json!({ "steps": t.len(), "max_excess_rel": worst, "gmres_breakdown": g.breakdown, "dominates": ok }),
        ok,
    ))
}

fn cmd_bounds(pa: &ProblemArgs, iters: usize, out: Option<&Path>) -> Outcome {
    let (p, x0) = pa.load_with_x0()?;
    let m = linear_m(&p)?;
    let t = solve(&p, &Start::Single(x0), &exhaustive(1, iters)).map_err(compute)?;
    let recs = bounds_check(&t, &m).map_err(compute)?;
    let rows: Vec<Vec<f64>> = recs
        .iter()
        .map(|r| {
            vec![
                r.k as f64,
                r.b_value.unwrap_or(f64::NAN),
                r.lower,
                r.upper,
                r.actual,
                r.special_case as u8 as f64,
                r.violation as u8 as f64,
            ]
        })
        .collect();
    write_file(
        out,
        &csv::table(&["k", "B", "lower", "upper", "actual", "special_case", "violation"], &rows),
    )?;
    let violations = count_violations(&recs);
    let ratio = recs.iter().filter_map(|r| r.upper_lower_ratio()).fold(f64::NAN, f64::max);
    Ok((
        json!({
            "steps": recs.len(),
            "violations": violations,
            "special_cases": recs.iter().filter(|r| r.special_case).count(),
            "max_upper_lower_ratio": ratio,
        }),
        violations == 0,
    ))
}

fn cmd_poly(pa: &ProblemArgs, m: usize, steps: usize, out: Option<&Path>) -> Outcome {
    let (p, x0) = pa.load_with_x0()?;
    let t = solve(&p, &Start::Single(x0), &exhaustive(m, steps)).map_err(compute)?;
    let dev = verify_polynomial_trace(&t, &p).map_err(compute)?;
    let ps = trace_polynomials(&t).map_err(compute)?;
    let mut rows = Vec::new();
    let mut norm_err: f64 = 0.0;
    let mut memory_ok = true;
    for (k, poly) in ps.iter().enumerate() {
        for (j, c) in poly.coeffs().iter().enumerate() {
            rows.push(vec![k as f64, j as f64, *c]);
        }
        if k >= 1 {
            let (e1, e0) = poly.normalization_error();
            norm_err = norm_err.max(e1).max(e0);
            memory_ok &= memory_effect_factor(poly, m, k).is_ok();
        }
    }
    write_file(out, &csv::table(&["k", "j", "coefficient"], &rows))?;
    let ok = dev <= POLY_TOL && memory_ok;
    Ok((
        json!({
            "steps": ps.len().saturating_sub(1),
            "max_deviation": dev,
            "max_normalization_error": norm_err,
            "memory_effect": memory_ok,
        }),
        ok,
    ))
}

fn cmd_lk(pa: &ProblemArgs, steps: usize, out: Option<&Path>) -> Outcome {
    let (p, x0) = pa.load_with_x0()?;
    let m = linear_m(&p)?;
    let t = solve(&p, &Start::Single(x0), &exhaustive(1, steps)).map_err(compute)?;
    let rs = t.residuals();
    let r0 = rs[0].norm().max(f64::MIN_POSITIVE);
    let ls = lk_recursion(&m, rs[0], t.len() - 1).map_err(compute)?;
    let lk_dev = verify_lk_against_trace(&ls, &t).map_err(compute)?;
    let mut rows = Vec::new();
    let (mut rec_dev, mut rank): (f64, f64) = (0.0, 0.0);
    for l in &ls {
        let k = l.k;
        let dev_lk = l.l.matvec(rs[0]).sub(rs[k]).norm() / r0;
        let ratio = l.third_singular_ratio();
        if k >= 2 {
            rank = rank.max(ratio);
        }
        let dev_rec = if k >= 2 && rs[k - 1].norm() > 0.0 {
            let pred = aa1_residual_recursion(rs[k - 1], rs[k - 2], &m).map_err(compute)?;
            pred.sub(rs[k]).norm() / rs[k - 1].norm()
        } else {
            f64::NAN
        };
        if dev_rec.is_finite() {
            rec_dev = rec_dev.max(dev_rec);
        }
        rows.push(vec![k as f64, dev_lk, dev_rec, ratio]);
    }
    write_file(out, &csv::table(&["k", "lk_deviation", "recursion_deviation", "sigma3_ratio"], &rows))?;
    let ok = lk_dev <= LK_TOL && rec_dev <= RECURSION_TOL && rank <= RANK_TOL;
    Ok((
        json!({
            "steps": ls.len() - 1,
            "lk_deviation": lk_dev,
            "recursion_deviation": rec_dev,
            "max_sigma3_ratio": rank,
        }),
        ok,
    ))
}

fn cmd_scaling(pa: &ProblemArgs, alpha: f64, steps: usize) -> Outcome {
    let (p, x0) = pa.load_with_x0()?;
    let r = scaling_invariance_check(&p, &x0, alpha, steps).map_err(compute)?;
    let ok = r.beta_dev <= SCALING_TOL && r.poly_dev <= SCALING_TOL;
    Ok((
        json!({
            "alpha": alpha,
            "steps": r.steps,
            "beta_deviation": r.beta_dev,
            "polynomial_deviation": r.poly_dev,
            "polynomial_deviation_abs": r.poly_dev_abs,
            "rho_deviation": r.rho_dev,
        }),
        ok,
    ))
}

fn sweep_config(pa: &ProblemArgs, sa: &SolverArgs, sw: &SweepArgs, kind: SweepKind) -> Result<SweepConfig, Failure> {
    let mut cfg = SweepConfig::new(pa.load()?, sa.config()?, kind);
    cfg.jobs = sw.jobs;
    cfg.method = sw.method.into();
    Ok(cfg)
}

fn sweep_report(res: aam_core::Result<SweepResult>, out: Option<&Path>) -> Outcome {
    let res = res.map_err(compute)?;
    write_file(out, &res.to_csv())?;
    let extras: serde_json::Map<String, Value> = res.extras.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
    Ok((
        json!({
            "rows": res.rows.len(),
            "summary": res.summary,
            "extras": extras,
        }),
        true,
    ))
}
