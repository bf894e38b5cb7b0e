//! Windowed Anderson acceleration AA(m) for fixed-point problems, with the
//! tools to check its linear-case theory numerically.
//!
//! * [`anderson`]: the AA(m) solver and plain fixed-point iteration.
//! * [`linalg`]: small dense kernels (LU, pivoted QR, Jacobi SVD).
//! * [`krylov`]: reference GMRES.
//! * [`analysis`]: residual polynomials, AA(1) closed forms and bounds,
//!   rate estimates, backward errors.
//! * [`experiments`]: seeded sweeps over initial guesses and parameters,
//!   optionally multi-threaded through [`parallel`].
//! * [`problems`]: linear and nonlinear fixed-point maps and named builtins.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod anderson;
pub mod error;
pub mod experiments;
pub mod krylov;
pub mod linalg;
pub mod parallel;
pub mod problems;

pub use anderson::{
    compute_beta, fp_solve, solve, AndersonConfig, IterationRecord, LsStrategy, Sigma, Start,
    Termination, Trace,
};
pub use error::{Error, Result};
pub use linalg::{Matrix, Vector};
pub use problems::{builtin, LinearProblem, NonlinearProblem, Problem, ProblemSpec};
