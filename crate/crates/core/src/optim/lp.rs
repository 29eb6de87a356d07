use nalgebra::{DMatrix, DVector};

use super::simplex::{solve_standard_form, SimplexStatus};
use crate::error::{invalid, mismatch, Error, Result};
use crate::model::numerical_rank;

/// Largest duality gap accepted as an optimality certificate.
pub const LP_GAP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    /// `O` is column-rank deficient; `x` is one of many minimizers.
    Degenerate,
}

/// Result of an ∞-norm (Chebyshev) fit `min_x ‖Ox − Y‖∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpResult {
    pub x: DVector<f64>,
    /// Optimal residual `‖Ox − Y‖∞`, evaluated at the returned `x`.
    pub d_lower: f64,
    pub status: LpStatus,
    /// Primal residual minus the dual objective; nonnegative up to rounding.
    pub duality_gap: f64,
}

/// Minimizes `‖Ox − Y‖∞` over `x`.
///
/// The epigraph LP `min d s.t. −d1 ≤ Ox − Y ≤ d1` is solved through its dual
///
/// ```text
///     max Yᵀ(μ − λ)  s.t.  Oᵀ(μ − λ) = 0,  1ᵀ(μ + λ) = 1,  μ, λ ≥ 0
/// ```
///
/// which has only `n + 1` rows. The fitted state is minus the simplex
/// multipliers of the first `n` rows, and the gap between the primal residual
/// at that state and the dual objective certifies optimality.
pub fn solve_inf_norm_fit(o: &DMatrix<f64>, y: &DVector<f64>) -> Result<LpResult> {
    let (k, n) = o.shape();
    if k == 0 || n == 0 {
        return Err(invalid("∞-norm fit needs a nonempty matrix"));
    }
    if y.len() != k {
        return Err(mismatch(format!("O has {k} rows but Y has {}", y.len())));
    }

    let mut a = DMatrix::zeros(n + 1, 2 * k);
    let mut c = DVector::zeros(2 * k);
    for j in 0..k {
        for i in 0..n {
            a[(i, j)] = o[(j, i)];
            a[(i, k + j)] = -o[(j, i)];
        }
        a[(n, j)] = 1.0;
        a[(n, k + j)] = 1.0;
        c[j] = -y[j];
        c[k + j] = y[j];
    }
    let mut b = DVector::zeros(n + 1);
    b[n] = 1.0;

    let sol = solve_standard_form(&a, &b, &c)?;
    if sol.status != SimplexStatus::Optimal {
        // The dual is feasible and bounded for every finite (O, Y).
        return Err(Error::Numerical(format!("∞-norm fit dual returned {:?}", sol.status)));
    }
    let x = DVector::from_iterator(n, sol.dual.iter().take(n).map(|v| -v));
    let d_lower = (o * &x - y).amax();
    let duality_gap = d_lower + sol.objective;
    if duality_gap.abs() > 1e-6 * (1.0 + d_lower) {
        return Err(Error::Numerical(format!("∞-norm fit duality gap {duality_gap:e}")));
    }
    let status = if numerical_rank(o) < n { LpStatus::Degenerate } else { LpStatus::Optimal };
    Ok(LpResult { x, d_lower, status, duality_gap })
}
