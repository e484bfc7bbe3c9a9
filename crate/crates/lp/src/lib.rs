//! Dense linear programming for small, highly degenerate problems.
//!
//! Problems are maximizations over nonnegative variables with optional upper
//! bounds. The same bounded-variable two-phase primal simplex runs over
//! `f64` (with tolerances) and over [`BigRational`] (exactly); the exact
//! backend is the oracle used to certify floating results.

mod program;
mod scalar;
mod simplex;

pub use num::BigRational;
pub use program::{Comparator, Constraint, ExactProgram, LinearProgram};
pub use scalar::LpScalar;
pub use simplex::{solve, solve_exact, solve_with, LpSolution, LpStatus, Pricing, SolverOptions};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LpError {
    #[error("malformed linear program: {0}")]
    Malformed(String),
    #[error("simplex did not terminate within {iterations} iterations")]
    Stalled { iterations: usize },
    #[error("optimal basis found but residual {residual:e} exceeds tolerance; retry with the exact solver")]
    Inaccurate { residual: f64 },
}
