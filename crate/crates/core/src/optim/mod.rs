//! Dense solvers: ∞-norm linear fitting (LP) and Euclidean projection onto a
//! polyhedron (strictly convex QP). Sizes here are tiny (tens of rows), so
//! both run on dense tableaus with deterministic pivoting.

mod lp;
mod qp;
pub(crate) mod simplex;

pub use lp::{solve_inf_norm_fit, LpResult, LpStatus, LP_GAP_TOL};
pub use qp::{solve_projection_qp, QpResult, QpStatus, QP_TOL};
