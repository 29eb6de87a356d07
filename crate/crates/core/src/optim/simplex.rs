//! Dense two-phase tableau simplex for `min cᵀz  s.t.  Az = b, z ≥ 0`.
//!
//! Pivoting follows Bland's rule (lowest eligible column enters, ties in the
//! ratio test go to the lowest basic variable), so the iteration is finite
//! and bitwise deterministic. Every row carries an artificial column; at the
//! end those columns hold `B⁻¹`, from which the simplex multipliers are read.

use nalgebra::{DMatrix, DVector};

use crate::error::{mismatch, Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-11;
const MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum SimplexStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub(crate) struct SimplexSolution {
    pub status: SimplexStatus,
    /// Primal point (valid when `status == Optimal`).
    pub z: DVector<f64>,
    /// Simplex multipliers `y` with `Aᵀy ≤ c` at optimality.
    pub dual: DVector<f64>,
    pub objective: f64,
}

struct Tableau {
    rows: usize,
    /// Structural column count; artificials occupy `cols..cols + rows`.
    cols: usize,
    /// `rows × (cols + rows + 1)`, last column is the right-hand side.
    t: DMatrix<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn rhs(&self) -> usize {
        self.cols + self.rows
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let width = self.t.ncols();
        let p = self.t[(row, col)];
        for j in 0..width {
            self.t[(row, j)] /= p;
        }
        for i in 0..self.rows {
            if i == row {
                continue;
            }
            let f = self.t[(i, col)];
            if f == 0.0 {
                continue;
            }
            for j in 0..width {
                let v = self.t[(row, j)];
                if v != 0.0 {
                    self.t[(i, j)] -= f * v;
                }
            }
            self.t[(i, col)] = 0.0;
        }
        self.basis[row] = col;
    }

    fn reduced_costs(&self, cost: &[f64], allowed: usize) -> Vec<f64> {
        (0..allowed)
            .map(|j| {
                let mut r = cost[j];
                for i in 0..self.rows {
                    r -= cost[self.basis[i]] * self.t[(i, j)];
                }
                r
            })
            .collect()
    }

    /// Runs Bland's-rule iterations over columns `0..allowed`.
    /// Returns `false` when an improving column has no positive entry.
    fn optimize(&mut self, cost: &[f64], allowed: usize, pivots: &mut usize) -> Result<bool> {
        loop {
            let reduced = self.reduced_costs(cost, allowed);
            let Some(enter) = reduced.iter().position(|&r| r < -COST_TOL) else {
                return Ok(true);
            };
            let rhs = self.rhs();
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.t[(i, enter)];
                if a <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.t[(i, rhs)].max(0.0) / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - 1e-14 * (1.0 + lr.abs())
                            || (ratio <= lr + 1e-14 * (1.0 + lr.abs()) && self.basis[i] < self.basis[li])
                        {
                            Some((i, ratio))
                        } else {
                            Some((li, lr))
                        }
                    }
                };
            }
            let Some((row, _)) = leave else {
                return Ok(false);
            };
            self.pivot(row, enter);
            *pivots += 1;
            if *pivots > MAX_PIVOTS {
                return Err(Error::Numerical("simplex pivot limit exceeded".into()));
            }
        }
    }
}

/// Solves `min cᵀz  s.t.  Az = b, z ≥ 0`.
pub(crate) fn solve_standard_form(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    c: &DVector<f64>,
) -> Result<SimplexSolution> {
    let (rows, cols) = a.shape();
    if b.len() != rows || c.len() != cols {
        return Err(mismatch(format!(
            "standard form A is {rows}x{cols}, b has {}, c has {}",
            b.len(),
            c.len()
        )));
    }

    let sign: Vec<f64> = b.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
    let mut t = DMatrix::zeros(rows, cols + rows + 1);
    for i in 0..rows {
        for j in 0..cols {
            t[(i, j)] = sign[i] * a[(i, j)];
        }
        t[(i, cols + i)] = 1.0;
        t[(i, cols + rows)] = sign[i] * b[i];
    }
    let mut tab = Tableau { rows, cols, t, basis: (cols..cols + rows).collect() };
    let mut pivots = 0;

    // Phase 1: drive the artificials to zero.
    let mut phase1 = vec![0.0; cols + rows];
    for v in phase1.iter_mut().skip(cols) {
        *v = 1.0;
    }
    tab.optimize(&phase1, cols + rows, &mut pivots)?;
    let rhs = tab.rhs();
    let infeasibility: f64 = (0..rows)
        .filter(|&i| tab.basis[i] >= cols)
        .map(|i| tab.t[(i, rhs)])
        .sum();
    let scale = 1.0 + b.amax();
    if infeasibility > 1e-9 * scale {
        return Ok(SimplexSolution {
            status: SimplexStatus::Infeasible,
            z: DVector::zeros(cols),
            dual: DVector::zeros(rows),
            objective: f64::INFINITY,
        });
    }

    // Pivot remaining artificials out; rows with no structural entry are redundant.
    for i in 0..rows {
        if tab.basis[i] < cols {
            continue;
        }
        if let Some(j) = (0..cols).find(|&j| tab.t[(i, j)].abs() > 1e-9) {
            tab.pivot(i, j);
        }
    }

    // Phase 2 over structural columns only.
    let mut phase2 = vec![0.0; cols + rows];
    phase2[..cols].copy_from_slice(c.as_slice());
    let bounded = tab.optimize(&phase2, cols, &mut pivots)?;

    let mut z = DVector::zeros(cols);
    for i in 0..rows {
        if tab.basis[i] < cols {
            z[tab.basis[i]] = tab.t[(i, rhs)];
        }
    }
    let mut dual = DVector::zeros(rows);
    for j in 0..rows {
        let mut y = 0.0;
        for i in 0..rows {
            y += phase2[tab.basis[i]] * tab.t[(i, cols + j)];
        }
        dual[j] = sign[j] * y;
    }
    let objective = c.dot(&z);
    Ok(SimplexSolution {
        status: if bounded { SimplexStatus::Optimal } else { SimplexStatus::Unbounded },
        z,
        dual,
        objective,
    })
}
