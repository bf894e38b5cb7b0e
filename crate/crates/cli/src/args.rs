use std::path::{Path, PathBuf};

use aam_core::analysis::RhoMethod;
use aam_core::anderson::{AndersonConfig, LsStrategy};
use aam_core::experiments::{LambdaScale, SampleDomain};
use aam_core::problems::{builtin, default_x0, ProblemSpec};
use aam_core::{Problem, Vector};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::{input, Failure};

#[derive(Debug, Parser)]
#[command(name = "aam", version, about = "Anderson acceleration AA(m): solver, checks and sweeps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Comma-separated decimals, e.g. `0.2,-0.3`.
fn parse_vec(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("bad number `{t}`: {e}")))
        .collect()
}

#[derive(Debug, Args)]
pub struct ProblemArgs {
    /// `builtin:NAME` or a path to a JSON problem file
    #[arg(long)]
    pub problem: String,
    /// Initial guess; defaults to the builtin's standard starting point
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
}

impl ProblemArgs {
    pub fn load(&self) -> Result<Problem, Failure> {
        match self.problem.strip_prefix("builtin:") {
            Some(name) => builtin(name).map_err(input),
            None => ProblemSpec::from_file(Path::new(&self.problem))
                .and_then(|s| s.build())
                .map_err(input),
        }
    }

    pub fn load_with_x0(&self) -> Result<(Problem, Vector), Failure> {
        let p = self.load()?;
        let x0 = match &self.x0 {
            Some(v) => Vector::new(v.clone()).map_err(input)?,
            None => self
                .problem
                .strip_prefix("builtin:")
                .and_then(default_x0)
                .ok_or_else(|| Failure::Usage("--x0 is required for this problem".into()))?,
        };
        if x0.len() != p.dim() {
            return Err(Failure::Usage(format!(
                "--x0 has {} entries, problem dimension is {}",
                x0.len(),
                p.dim()
            )));
        }
        Ok((p, x0))
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LsArg {
    Qr,
    Pinv,
    Regularized,
    RegularizedRelative,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Window size
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    /// Stop when ||r_k|| <= tol ||r_0||
    #[arg(long, default_value_t = 1e-14)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = LsArg::Qr)]
    pub ls: LsArg,
    /// lambda, or epsilon for the relative variant
    #[arg(long)]
    pub lambda: Option<f64>,
}

impl SolverArgs {
    pub fn config(&self) -> Result<AndersonConfig, Failure> {
        let need = || {
            self.lambda
                .ok_or_else(|| Failure::Usage("--lambda is required with a regularized --ls".into()))
        };
        let ls_strategy = match self.ls {
            LsArg::Qr => LsStrategy::Qr,
            LsArg::Pinv => LsStrategy::PseudoInverse,
            LsArg::Regularized => LsStrategy::Regularized { lambda: need()? },
            LsArg::RegularizedRelative => LsStrategy::RegularizedRelative { epsilon: need()? },
        };
        let cfg = AndersonConfig {
            m: self.m,
            max_iter: self.max_iter,
            tol_rel: self.tol,
            ls_strategy,
        };
        cfg.validate().map_err(input)?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    SigmaTail,
    LogSlope,
}

impl From<MethodArg> for RhoMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::SigmaTail => RhoMethod::SigmaTail,
            MethodArg::LogSlope => RhoMethod::LogSlope,
        }
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Worker threads
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Convergence factor estimator
    #[arg(long, value_enum, default_value_t = MethodArg::SigmaTail)]
    pub method: MethodArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DomainArg {
    Circle,
    Box,
}

pub fn domain(d: DomainArg, lo: f64, hi: f64) -> SampleDomain {
    match d {
        DomainArg::Circle => SampleDomain::UnitCircle,
        DomainArg::Box => SampleDomain::Box { lo, hi },
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScaleArg {
    Absolute,
    Relative,
}

impl From<ScaleArg> for LambdaScale {
    fn from(s: ScaleArg) -> Self {
        match s {
            ScaleArg::Absolute => LambdaScale::Absolute,
            ScaleArg::Relative => LambdaScale::Relative,
        }
    }
}

pub fn pair(v: &[f64]) -> Result<(f64, f64), Failure> {
    match v {
        [a, b] => Ok((*a, *b)),
        _ => Err(Failure::Usage(format!("expected two values, got {}", v.len()))),
    }
}

/// Semicolon-separated vectors, e.g. `1,0;0.5,0.5`.
pub fn vectors(s: &str) -> Result<Vec<Vector>, Failure> {
    s.split(';')
        .map(|part| {
            let v = parse_vec(part).map_err(Failure::Usage)?;
            Vector::new(v).map_err(input)
        })
        .collect()
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run AA(m) and optionally write the per-iteration trace
    Solve {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// m + 1 initial guesses separated by `;` (replaces --x0)
        #[arg(long, allow_hyphen_values = true)]
        guesses: Option<String>,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Plain fixed-point iteration
    Fp {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value_t = 1000)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-14)]
        tol: f64,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Compare AA(m) residuals with GMRES on A = I - M
    GmresCompare {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long, default_value_t = 25)]
        iters: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-step AA(1) residual bounds on a linear problem
    Bounds {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value_t = 100)]
        iters: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check residual polynomials against the solver residuals
    PolyVerify {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long, default_value_t = 30)]
        steps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the coefficient-free AA(1) forms and the rank-two matrices L_k
    LkVerify {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value_t = 10)]
        steps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare runs from x0 and alpha x0 on a problem with b = 0
    ScalingCheck {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, default_value_t = 30)]
        steps: usize,
    },
    /// Normwise relative backward errors along an AA run
    Nrbe {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random initial guesses around x*
    MonteCarlo {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        sweep: SweepArgs,
        #[arg(long, default_value_t = 5000)]
        trials: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = DomainArg::Circle)]
        domain: DomainArg,
        #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
        lo: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        hi: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// x0 = x* + (cos t, sin t) for evenly spaced t
    SweepTheta {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        sweep: SweepArgs,
        #[arg(long, default_value_t = 50)]
        n_angles: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rectangular grid of initial guesses
    SweepGrid {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        sweep: SweepArgs,
        #[arg(long, default_value_t = 101)]
        nx: usize,
        #[arg(long, default_value_t = 101)]
        ny: usize,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-1,1")]
        x_range: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-1,1")]
        y_range: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// General-guess AA(1) over two angles and a radius
    DualGuess {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        sweep: SweepArgs,
        #[arg(long, default_value_t = 50)]
        n_theta1: usize,
        #[arg(long, default_value_t = 50)]
        n_theta2: usize,
        #[arg(long, default_value_t = 50)]
        n_alpha: usize,
        #[arg(long, default_value_t = 10.0)]
        alpha_max: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regularized AA(1) over a list of lambda values
    SweepLambda {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        sweep: SweepArgs,
        #[arg(long, value_delimiter = ',', default_value = "1e-16,1e-14,1e-12,1e-8,1e-4,1e-2,1")]
        lambdas: Vec<f64>,
        #[arg(long, value_enum, default_value_t = ScaleArg::Absolute)]
        scale: ScaleArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}
