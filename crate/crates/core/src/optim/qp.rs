use nalgebra::{DMatrix, DVector};

use crate::error::{mismatch, Result};

/// Feasibility / stationarity tolerance on normalized constraints.
pub const QP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpResult {
    pub u: DVector<f64>,
    pub status: QpStatus,
    /// Indices (into the rows of `G`) of the constraints in the final active set.
    pub active_set: Vec<usize>,
    /// Multipliers matching `active_set`, in the units of the original rows.
    pub multipliers: Vec<f64>,
}

/// Euclidean projection of `u_nom` onto `{u : Gu ≥ h}`.
///
/// Dual active-set method of Goldfarb and Idnani specialised to an identity
/// Hessian: start from the unconstrained minimizer `u_nom`, repeatedly add
/// the most violated constraint and drop active constraints whose multiplier
/// would turn negative. A constraint whose normal lies in the cone spanned by
/// non-positive combinations of the active normals is a Farkas certificate
/// and ends the solve with [`QpStatus::Infeasible`].
///
/// Rows are normalized internally; a zero row `0 ≥ h_j` is infeasible iff
/// `h_j > 0`.
pub fn solve_projection_qp(u_nom: &DVector<f64>, g: &DMatrix<f64>, h: &DVector<f64>) -> Result<QpResult> {
    let m = u_nom.len();
    let c = h.len();
    if g.nrows() != c || (c > 0 && g.ncols() != m) {
        return Err(mismatch(format!(
            "G is {}x{}, expected {c}x{m}",
            g.nrows(),
            g.ncols()
        )));
    }

    let infeasible = |u: DVector<f64>| QpResult {
        u,
        status: QpStatus::Infeasible,
        active_set: Vec::new(),
        multipliers: Vec::new(),
    };

    let mut normals: Vec<DVector<f64>> = Vec::with_capacity(c);
    let mut bounds = Vec::with_capacity(c);
    let mut scales = Vec::with_capacity(c);
    for j in 0..c {
        let row = g.row(j).transpose();
        let norm = row.norm();
        if norm <= 1e-14 {
            if h[j] > QP_TOL {
                return Ok(infeasible(u_nom.clone()));
            }
            normals.push(DVector::zeros(m));
            bounds.push(f64::NEG_INFINITY);
            scales.push(0.0);
        } else {
            normals.push(row / norm);
            bounds.push(h[j] / norm);
            scales.push(norm);
        }
    }

    let mut u = u_nom.clone();
    let mut active: Vec<usize> = Vec::new();
    let mut lambda: Vec<f64> = Vec::new();
    let max_outer = 20 * (c + m) + 100;

    for _ in 0..max_outer {
        // Most violated constraint, lowest index on ties.
        let mut pick: Option<(usize, f64)> = None;
        for j in 0..c {
            if bounds[j] == f64::NEG_INFINITY || active.contains(&j) {
                continue;
            }
            let slack = normals[j].dot(&u) - bounds[j];
            if slack < -QP_TOL && pick.is_none_or(|(_, s)| slack < s) {
                pick = Some((j, slack));
            }
        }
        let Some((p, _)) = pick else {
            let multipliers = active
                .iter()
                .zip(&lambda)
                .map(|(&j, &l)| l / scales[j])
                .collect();
            return Ok(QpResult { u, status: QpStatus::Optimal, active_set: active, multipliers });
        };
        let np = &normals[p];
        let mut lambda_p = 0.0;

        loop {
            let (z, r) = step_directions(&normals, &active, np, m);
            let slack = np.dot(&u) - bounds[p];

            let mut partial: Option<(usize, f64)> = None;
            for (idx, &rj) in r.iter().enumerate() {
                if rj > 1e-12 {
                    let t = lambda[idx] / rj;
                    if partial.is_none_or(|(_, best)| t < best) {
                        partial = Some((idx, t));
                    }
                }
            }
            let zn = z.dot(np);
            let full = if z.norm() > 1e-12 && zn > 1e-14 { Some(-slack / zn) } else { None };

            match (full, partial) {
                (None, None) => return Ok(infeasible(u)),
                (None, Some((drop, t))) => {
                    for (l, rj) in lambda.iter_mut().zip(&r) {
                        *l -= t * rj;
                    }
                    lambda_p += t;
                    active.remove(drop);
                    lambda.remove(drop);
                }
                (Some(tf), partial) => {
                    let (t, drop) = match partial {
                        Some((idx, tp)) if tp < tf => (tp, Some(idx)),
                        _ => (tf, None),
                    };
                    u += &z * t;
                    for (l, rj) in lambda.iter_mut().zip(&r) {
                        *l -= t * rj;
                    }
                    lambda_p += t;
                    match drop {
                        Some(idx) => {
                            active.remove(idx);
                            lambda.remove(idx);
                        }
                        None => {
                            active.push(p);
                            lambda.push(lambda_p);
                            break;
                        }
                    }
                }
            }
        }
    }
    Ok(infeasible(u))
}

/// Primal step `z = (I − N(NᵀN)⁻¹Nᵀ) n_p` and dual step `r = (NᵀN)⁻¹Nᵀ n_p`
/// for the active normals `N`.
fn step_directions(
    normals: &[DVector<f64>],
    active: &[usize],
    np: &DVector<f64>,
    m: usize,
) -> (DVector<f64>, DVector<f64>) {
    if active.is_empty() {
        return (np.clone(), DVector::zeros(0));
    }
    let n = DMatrix::from_columns(&active.iter().map(|&j| normals[j].clone()).collect::<Vec<_>>());
    let gram = n.transpose() * &n;
    let rhs = n.transpose() * np;
    let r = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => gram.pseudo_inverse(1e-12).map(|p| p * &rhs).unwrap_or_else(|_| DVector::zeros(active.len())),
    };
    let z = np - &n * &r;
    debug_assert_eq!(z.len(), m);
    (z, r)
}
