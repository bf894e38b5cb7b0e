//! Numerical checks of the linear AA(m) theory on solver traces.

pub mod aa1;
pub mod bounds;
pub mod nrbe;
pub mod polynomial;
pub mod rate;

pub use aa1::{aa1_residual_recursion, lk_recursion, verify_aa1_recursion, verify_lk_against_trace, RankTwoUpdate};
pub use bounds::{bounds_check, calb, calb_vectors, count_violations, BoundsRecord};
pub use nrbe::{ls_nrbe, nrbe};
pub use polynomial::{
    memory_effect_factor, multi_krylov_polynomials, polynomial_recurrence, trace_polynomials,
    verify_multi_krylov, verify_polynomial_trace, MultiKrylovTable, ResidualPolynomial,
};
pub use rate::{estimate_rho, scaling_invariance_check, ConvergenceEstimate, RhoMethod, ScalingReport};
