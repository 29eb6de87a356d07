//! CBF safety filters.
//!
//! Both filters project the nominal command onto a polyhedron in input
//! space. The baseline filter trusts a single state estimate; the secure
//! filter writes one constraint block per plausible ball, tightened by
//! `Δ_Γ` so that the discrete CBF condition holds for every state inside the
//! ball.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, mismatch, Result};
use crate::model::{inf_norm, DataWindow, LinearSystem, SafetySpec};
use crate::optim::{solve_projection_qp, QpStatus};
use crate::ssr::{PlausibleBall, SecureReconstructor, SsrConfig};

/// Constraints with slack below this at the solution count as active.
pub const ACTIVE_SLACK: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FilterMode {
    NominalPassed,
    Filtered,
    Fallback,
}

impl FilterMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FilterMode::NominalPassed => "nominal",
            FilterMode::Filtered => "filtered",
            FilterMode::Fallback => "fallback",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "nominal" => Some(FilterMode::NominalPassed),
            "filtered" => Some(FilterMode::Filtered),
            "fallback" => Some(FilterMode::Fallback),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub u_safe: DVector<f64>,
    pub mode: FilterMode,
    pub constraints_built: usize,
    /// Smallest `(Gu − h)_j` at `u_safe`; `+∞` without constraints.
    pub margin: f64,
}

/// How the robustification margin is bounded.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum DeltaBound {
    /// `‖H(A − (1−γ)I)‖∞ · radius`, identical for every row.
    #[default]
    MatrixNorm,
    /// `‖row_j(H(A − (1−γ)I))‖₁ · radius` per row. Never looser.
    PerRow,
}

/// Zero velocity command.
pub fn fallback_policy(m: usize) -> DVector<f64> {
    DVector::zeros(m)
}

fn margin(g: &DMatrix<f64>, h: &DVector<f64>, u: &DVector<f64>) -> f64 {
    if h.is_empty() {
        return f64::INFINITY;
    }
    (g * u - h).min()
}

fn project(u_nom: &DVector<f64>, g: &DMatrix<f64>, h: &DVector<f64>) -> Result<FilterOutcome> {
    let constraints_built = h.len();
    let qp = solve_projection_qp(u_nom, g, h)?;
    if qp.status == QpStatus::Infeasible {
        let u_safe = fallback_policy(u_nom.len());
        let margin = margin(g, h, &u_safe);
        return Ok(FilterOutcome { u_safe, mode: FilterMode::Fallback, constraints_built, margin });
    }
    let margin = margin(g, h, &qp.u);
    let mode = if qp.active_set.is_empty() && margin >= ACTIVE_SLACK {
        FilterMode::NominalPassed
    } else {
        FilterMode::Filtered
    };
    Ok(FilterOutcome { u_safe: qp.u, mode, constraints_built, margin })
}

/// Discrete CBF-QP around a single state estimate:
/// `min ‖u − u_nom‖²  s.t.  H(Ax + Bu) + q ≥ (1−γ)(Hx + q)`.
pub fn baseline_cbf_filter(
    sys: &LinearSystem,
    spec: &SafetySpec,
    x: &DVector<f64>,
    u_nom: &DVector<f64>,
) -> Result<FilterOutcome> {
    check_dims(sys, spec, u_nom)?;
    if x.len() != sys.n() {
        return Err(mismatch(format!("state estimate has {} entries, expected {}", x.len(), sys.n())));
    }
    let hmat = spec.h();
    let g = hmat * sys.b();
    let barrier = spec.barrier(x);
    let h = barrier * (1.0 - spec.gamma()) - hmat * (sys.a() * x) - spec.q();
    project(u_nom, &g, &h)
}

fn check_dims(sys: &LinearSystem, spec: &SafetySpec, u_nom: &DVector<f64>) -> Result<()> {
    if spec.h().ncols() != sys.n() {
        return Err(mismatch(format!("H has {} columns, expected n = {}", spec.h().ncols(), sys.n())));
    }
    if u_nom.len() != sys.m() {
        return Err(mismatch(format!("u_nom has {} entries, expected m = {}", u_nom.len(), sys.m())));
    }
    Ok(())
}

/// `H(A − (1−γ)I)`.
pub fn cbf_drift_matrix(spec: &SafetySpec, sys: &LinearSystem) -> DMatrix<f64> {
    let n = sys.n();
    spec.h() * (sys.a() - DMatrix::identity(n, n) * (1.0 - spec.gamma()))
}

/// `Δ_Γ = ‖H(A − (1−γ)I)‖∞ · ‖A‖∞^l · d_e / m(O_Γ)`.
pub fn delta_gamma(spec: &SafetySpec, sys: &LinearSystem, l: usize, d_e: f64, m_o: f64) -> Result<f64> {
    if !(m_o > 0.0) {
        return Err(invalid(format!("minimum modulus must be positive, got {m_o}")));
    }
    if !(d_e >= 0.0) {
        return Err(invalid(format!("d_e must be nonnegative, got {d_e}")));
    }
    Ok(inf_norm(&cbf_drift_matrix(spec, sys)) * inf_norm(sys.a()).powi(l as i32) * d_e / m_o)
}

/// Stacked robust CBF rows `HB u ≥ −H(A − (1−γ)I)x_c − γq + Δ` for every ball.
pub fn robust_constraints(
    sys: &LinearSystem,
    spec: &SafetySpec,
    balls: &[PlausibleBall],
    bound: DeltaBound,
) -> (DMatrix<f64>, DVector<f64>) {
    let drift = cbf_drift_matrix(spec, sys);
    let hb = spec.h() * sys.b();
    let rows = spec.h().nrows();
    let row_norms: Vec<f64> = drift.row_iter().map(|r| r.iter().map(|v| v.abs()).sum()).collect();
    let full_norm = row_norms.iter().copied().fold(0.0, f64::max);

    let mut g = DMatrix::zeros(rows * balls.len(), sys.m());
    let mut h = DVector::zeros(rows * balls.len());
    for (k, ball) in balls.iter().enumerate() {
        let drift_c = &drift * &ball.center;
        for j in 0..rows {
            let delta = match bound {
                DeltaBound::MatrixNorm => full_norm * ball.radius,
                DeltaBound::PerRow => row_norms[j] * ball.radius,
            };
            g.row_mut(k * rows + j).copy_from(&hb.row(j));
            h[k * rows + j] = -drift_c[j] - spec.gamma() * spec.q()[j] + delta;
        }
    }
    (g, h)
}

/// Projection of `u_nom` onto the robust CBF constraints of all balls; an
/// empty ball set or an infeasible QP yields the fallback command.
pub fn secure_safety_filter(
    sys: &LinearSystem,
    spec: &SafetySpec,
    balls: &[PlausibleBall],
    u_nom: &DVector<f64>,
    bound: DeltaBound,
) -> Result<FilterOutcome> {
    check_dims(sys, spec, u_nom)?;
    if balls.is_empty() {
        return Ok(FilterOutcome {
            u_safe: fallback_policy(sys.m()),
            mode: FilterMode::Fallback,
            constraints_built: 0,
            margin: f64::INFINITY,
        });
    }
    let (g, h) = robust_constraints(sys, spec, balls, bound);
    project(u_nom, &g, &h)
}

/// Result of one secure filter step.
#[derive(Debug, Clone, PartialEq)]
pub struct SecureStep {
    pub outcome: FilterOutcome,
    pub balls: Vec<PlausibleBall>,
}

/// Stateful secure filter: owns the data window and the reconstructor
/// caches, and remembers the last command it returned so the window can be
/// advanced with the input that was actually applied.
#[derive(Debug, Clone)]
pub struct SecureFilter {
    recon: SecureReconstructor,
    spec: SafetySpec,
    window: DataWindow,
    bound: DeltaBound,
    last_u: Option<DVector<f64>>,
}

impl SecureFilter {
    pub fn new(sys: LinearSystem, spec: SafetySpec, cfg: SsrConfig) -> Result<Self> {
        if spec.h().ncols() != sys.n() {
            return Err(mismatch(format!("H has {} columns, expected n = {}", spec.h().ncols(), sys.n())));
        }
        let window = DataWindow::new(cfg.l);
        Ok(Self { recon: SecureReconstructor::new(sys, cfg)?, spec, window, bound: DeltaBound::default(), last_u: None })
    }

    pub fn with_delta_bound(mut self, bound: DeltaBound) -> Self {
        self.bound = bound;
        self
    }

    pub fn reconstructor(&self) -> &SecureReconstructor {
        &self.recon
    }
    pub fn spec(&self) -> &SafetySpec {
        &self.spec
    }
    pub fn window(&self) -> &DataWindow {
        &self.window
    }
    pub fn is_ready(&self) -> bool {
        self.window.is_full()
    }

    /// Records `y(t)`, pairing it with the previously returned command.
    pub fn observe(&mut self, y: DVector<f64>) -> Result<()> {
        if y.len() != self.recon.system().p() {
            return Err(mismatch(format!("measurement has {} entries, expected p = {}", y.len(), self.recon.system().p())));
        }
        let u_prev = self.last_u.take();
        self.window.observe(u_prev.as_ref(), y)
    }

    /// Overrides the command recorded for the next [`observe`](Self::observe).
    pub fn set_applied_input(&mut self, u: DVector<f64>) {
        self.last_u = Some(u);
    }

    /// Filters `u_nom` against the current window. Before the window is
    /// full this returns the fallback command with no balls.
    pub fn filter(&mut self, u_nom: &DVector<f64>) -> Result<SecureStep> {
        let sys = self.recon.system();
        let step = if self.window.is_full() {
            let balls = self.recon.plausible_balls(&self.window)?;
            let outcome = secure_safety_filter(sys, &self.spec, &balls, u_nom, self.bound)?;
            SecureStep { outcome, balls }
        } else {
            check_dims(sys, &self.spec, u_nom)?;
            SecureStep {
                outcome: FilterOutcome {
                    u_safe: fallback_policy(sys.m()),
                    mode: FilterMode::Fallback,
                    constraints_built: 0,
                    margin: f64::INFINITY,
                },
                balls: Vec::new(),
            }
        };
        self.last_u = Some(step.outcome.u_safe.clone());
        Ok(step)
    }

    pub fn reset(&mut self) {
        self.window.clear();
        self.last_u = None;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_system() -> (LinearSystem, SafetySpec) {
        let sys = LinearSystem::new(
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 0.05),
            DMatrix::from_element(1, 1, 1.0),
            0.05,
        )
        .unwrap();
        // x ≤ 6
        let spec = SafetySpec::new(DMatrix::from_element(1, 1, -1.0), DVector::from_element(1, 6.0), 0.5).unwrap();
        (sys, spec)
    }

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(x)
    }

    #[test]
    fn baseline_passes_interior_nominal() {
        let (sys, spec) = scalar_system();
        let out = baseline_cbf_filter(&sys, &spec, &v(&[0.0]), &v(&[0.5])).unwrap();
        assert_eq!(out.mode, FilterMode::NominalPassed);
        assert_eq!(out.u_safe, v(&[0.5]));
    }

    #[test]
    fn baseline_at_boundary_blocks_outward_motion() {
        // h(x) = 6 − x = 0 at x = 6, so h(x⁺) ≥ 0.5·0 forces u ≤ 0.
        let (sys, spec) = scalar_system();
        let out = baseline_cbf_filter(&sys, &spec, &v(&[6.0]), &v(&[1.0])).unwrap();
        assert_eq!(out.mode, FilterMode::Filtered);
        assert!(out.u_safe[0].abs() < 1e-12);
        // x = 5: 6 − 5 − 0.05u ≥ 0.5 → u ≤ 10
        let out = baseline_cbf_filter(&sys, &spec, &v(&[5.0]), &v(&[20.0])).unwrap();
        assert!((out.u_safe[0] - 10.0).abs() < 1e-9);
        assert!(out.margin.abs() < 1e-9);
    }

    #[test]
    fn delta_formula() {
        let sys = LinearSystem::new(
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            1.0,
        )
        .unwrap();
        let spec = SafetySpec::new(DMatrix::from_element(1, 1, 1.0), DVector::from_element(1, 0.0), 0.5).unwrap();
        assert!((delta_gamma(&spec, &sys, 0, 0.1, 1.0).unwrap() - 0.05).abs() < 1e-15);
        assert_eq!(delta_gamma(&spec, &sys, 0, 0.0, 1.0).unwrap(), 0.0);
        let d1 = delta_gamma(&spec, &sys, 3, 0.1, 0.7).unwrap();
        let d2 = delta_gamma(&spec, &sys, 3, 0.2, 0.7).unwrap();
        assert!((d2 - 2.0 * d1).abs() < 1e-15);
        assert!(delta_gamma(&spec, &sys, 0, 0.1, 0.0).is_err());
    }

    #[test]
    fn fallback_is_zero() {
        assert_eq!(fallback_policy(2), v(&[0.0, 0.0]));
        assert_eq!(fallback_policy(2), fallback_policy(2));
    }

    #[test]
    fn empty_balls_fall_back() {
        let (sys, spec) = scalar_system();
        let out = secure_safety_filter(&sys, &spec, &[], &v(&[1.0]), DeltaBound::MatrixNorm).unwrap();
        assert_eq!(out.mode, FilterMode::Fallback);
        assert_eq!(out.u_safe, v(&[0.0]));
    }

    #[test]
    fn mode_strings_round_trip() {
        for m in [FilterMode::NominalPassed, FilterMode::Filtered, FilterMode::Fallback] {
            assert_eq!(FilterMode::parse(m.as_str()), Some(m));
        }
    }
}
