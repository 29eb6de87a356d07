//! Secure state reconstruction under bounded measurement noise.
//!
//! For every set `Γ` of `p − s` sensors that might be attack free, an
//! ∞-norm fit of the window's input-corrected outputs gives a candidate
//! initial state and its residual `d̲^Γ`. Candidates whose residual exceeds
//! the noise bound cannot be explained by noise alone and are dropped. Each
//! survivor is inflated to an ∞-norm ball that contains every initial state
//! consistent with `Γ`, then pushed forward through the dynamics to the
//! current time.
//!
//! Sensor indices are 0-based throughout the library.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result};
use crate::model::{
    check_sparse_observability, check_window, inf_norm, matrix_power, minimum_modulus, sensor_stacks,
    stack_rows, stacked_inputs, DataWindow, LinearSystem, MinimumModulus, StackedSensorData,
};
use crate::optim::{solve_inf_norm_fit, LpResult};

/// Slack added to `d_max` in the survival test so that exactly consistent
/// data (`d̲^Γ` equal to `d_max` up to rounding) is not pruned.
pub const PRUNE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsrConfig {
    /// Maximum number of attacked sensors.
    pub s: usize,
    /// Window length minus one.
    pub l: usize,
    /// ∞-norm bound on the measurement noise.
    pub d_max: f64,
}

impl SsrConfig {
    pub fn validate(&self, sys: &LinearSystem) -> Result<()> {
        if self.s >= sys.p() {
            return Err(invalid(format!("s = {} must be smaller than p = {}", self.s, sys.p())));
        }
        if self.l + 1 < sys.n() {
            return Err(invalid(format!("window length l+1 = {} is shorter than n = {}", self.l + 1, sys.n())));
        }
        if !(self.d_max >= 0.0 && self.d_max.is_finite()) {
            return Err(invalid(format!("d_max must be finite and nonnegative, got {}", self.d_max)));
        }
        if !check_sparse_observability(sys, self.s)? {
            return Err(invalid(format!("system is not {}-sparse observable", self.s)));
        }
        Ok(())
    }
}

/// All size-`(p − s)` subsets of `0..p` in lexicographic order.
pub fn enumerate_combinations(p: usize, s: usize) -> Vec<Vec<usize>> {
    let k = p.saturating_sub(s);
    let mut out = Vec::new();
    if k == 0 || s >= p {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let Some(pos) = (0..k).rev().find(|&i| idx[i] != i + p - k) else {
            return out;
        };
        idx[pos] += 1;
        for j in pos + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// ∞-norm fit of the initial state to the sensors in `gamma`.
pub fn reconstruct_combination(stacked: &StackedSensorData, gamma: &[usize]) -> Result<LpResult> {
    if gamma.is_empty() || gamma.iter().any(|&i| i >= stacked.o.len()) {
        return Err(invalid(format!("sensor set {gamma:?} is empty or out of range")));
    }
    let o = stack_rows(&stacked.o, gamma);
    let y = DVector::from_iterator(o.nrows(), gamma.iter().flat_map(|&i| stacked.y[i].iter().copied()));
    solve_inf_norm_fit(&o, &y)
}

/// One surviving sensor combination, over-approximated by an ∞-norm ball.
#[derive(Debug, Clone, PartialEq)]
pub struct PlausibleBall {
    pub gamma_set: Vec<usize>,
    /// Centre propagated to the current time.
    pub center: DVector<f64>,
    /// `‖A‖∞^l · d_e / m(O_Γ)`.
    pub radius: f64,
    /// LP solution at the start of the window.
    pub initial_center: DVector<f64>,
    /// `d_e / m(O_Γ)`.
    pub initial_radius: f64,
    pub d_lower: f64,
    /// `d_max + d̲^Γ`.
    pub d_e: f64,
    pub min_modulus: f64,
}

/// Outcome of the LP for one combination, kept or not.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinationReport {
    pub gamma_set: Vec<usize>,
    pub fit: LpResult,
    pub kept: bool,
}

#[derive(Debug, Clone)]
struct Combination {
    gamma: Vec<usize>,
    o: DMatrix<f64>,
    modulus: MinimumModulus,
}

/// Reconstructor with all window-independent quantities precomputed:
/// per-sensor stacks, every `O_Γ` and its minimum modulus, `A^l` and the
/// input-to-state map of the window.
#[derive(Debug, Clone)]
pub struct SecureReconstructor {
    sys: LinearSystem,
    cfg: SsrConfig,
    sensor_o: Vec<DMatrix<f64>>,
    sensor_f: Vec<DMatrix<f64>>,
    combos: Vec<Combination>,
    a_pow_l: DMatrix<f64>,
    input_map: DMatrix<f64>,
    a_norm_pow_l: f64,
}

impl SecureReconstructor {
    pub fn new(sys: LinearSystem, cfg: SsrConfig) -> Result<Self> {
        cfg.validate(&sys)?;
        let (sensor_o, sensor_f) = sensor_stacks(&sys, cfg.l);
        let combos = enumerate_combinations(sys.p(), cfg.s)
            .into_iter()
            .map(|gamma| {
                let o = stack_rows(&sensor_o, &gamma);
                let modulus = minimum_modulus(&o)?;
                Ok(Combination { gamma, o, modulus })
            })
            .collect::<Result<Vec<_>>>()?;
        let (n, m, l) = (sys.n(), sys.m(), cfg.l);
        let a_pow_l = matrix_power(sys.a(), l);
        let mut input_map = DMatrix::zeros(n, m * (l + 1));
        for k in 0..l {
            let blk = matrix_power(sys.a(), l - 1 - k) * sys.b();
            input_map.view_mut((0, k * m), (n, m)).copy_from(&blk);
        }
        let a_norm_pow_l = inf_norm(sys.a()).powi(l as i32);
        Ok(Self { sys, cfg, sensor_o, sensor_f, combos, a_pow_l, input_map, a_norm_pow_l })
    }

    pub fn system(&self) -> &LinearSystem {
        &self.sys
    }
    pub fn config(&self) -> &SsrConfig {
        &self.cfg
    }
    pub fn combinations(&self) -> impl Iterator<Item = &[usize]> {
        self.combos.iter().map(|c| c.gamma.as_slice())
    }
    /// Cached `m(O_Γ)` for each combination, in enumeration order.
    pub fn minimum_moduli(&self) -> impl Iterator<Item = MinimumModulus> + '_ {
        self.combos.iter().map(|c| c.modulus)
    }
    /// `‖A‖∞^l`.
    pub fn propagation_gain(&self) -> f64 {
        self.a_norm_pow_l
    }

    pub fn stacked(&self, w: &DataWindow) -> Result<StackedSensorData> {
        self.check(w)?;
        let l = self.cfg.l;
        let u = stacked_inputs(w, self.sys.m());
        let y = (0..self.sys.p())
            .map(|i| DVector::from_iterator(l + 1, w.outputs().iter().map(|y| y[i])) - &self.sensor_f[i] * &u)
            .collect();
        Ok(StackedSensorData { o: self.sensor_o.clone(), f: self.sensor_f.clone(), y, u })
    }

    fn check(&self, w: &DataWindow) -> Result<()> {
        if w.l() != self.cfg.l {
            return Err(invalid(format!("window depth {} does not match l = {}", w.l(), self.cfg.l)));
        }
        check_window(&self.sys, w)
    }

    /// `A^l x0 + Σ_k A^{l−1−k} B u(t−l+k)`.
    pub fn propagate(&self, x0: &DVector<f64>, w: &DataWindow) -> DVector<f64> {
        &self.a_pow_l * x0 + &self.input_map * stacked_inputs(w, self.sys.m())
    }

    /// LP results for every combination with the keep decision.
    pub fn evaluate(&self, w: &DataWindow) -> Result<Vec<CombinationReport>> {
        let st = self.stacked(w)?;
        self.combos
            .iter()
            .map(|c| {
                let y = DVector::from_iterator(c.o.nrows(), c.gamma.iter().flat_map(|&i| st.y[i].iter().copied()));
                let fit = solve_inf_norm_fit(&c.o, &y)?;
                let kept = !c.modulus.degenerate && fit.d_lower <= self.cfg.d_max + PRUNE_TOL;
                Ok(CombinationReport { gamma_set: c.gamma.clone(), fit, kept })
            })
            .collect()
    }

    /// Current-time plausible balls; empty when every combination is pruned.
    pub fn plausible_balls(&self, w: &DataWindow) -> Result<Vec<PlausibleBall>> {
        let reports = self.evaluate(w)?;
        Ok(reports
            .into_iter()
            .zip(&self.combos)
            .filter(|(r, _)| r.kept)
            .map(|(r, c)| {
                let d_e = self.cfg.d_max + r.fit.d_lower;
                let initial_radius = d_e / c.modulus.value;
                PlausibleBall {
                    center: self.propagate(&r.fit.x, w),
                    radius: self.a_norm_pow_l * initial_radius,
                    initial_center: r.fit.x,
                    initial_radius,
                    d_lower: r.fit.d_lower,
                    d_e,
                    min_modulus: c.modulus.value,
                    gamma_set: r.gamma_set,
                }
            })
            .collect())
    }

    /// Direct test of the plausible-initial-state definition: some `Γ` with
    /// `‖O_i x0 − Y_i‖∞ ≤ d_max` for every `i ∈ Γ`.
    pub fn membership(&self, w: &DataWindow, x0: &DVector<f64>) -> Result<bool> {
        let st = self.stacked(w)?;
        Ok(self.combos.iter().any(|c| self.member_of(&st, &c.gamma, x0)))
    }

    /// The membership test restricted to one combination.
    pub fn member_of(&self, st: &StackedSensorData, gamma: &[usize], x0: &DVector<f64>) -> bool {
        gamma.iter().all(|&i| (&st.o[i] * x0 - &st.y[i]).amax() <= self.cfg.d_max)
    }
}

/// One-shot form of [`SecureReconstructor::plausible_balls`].
pub fn plausible_balls(sys: &LinearSystem, cfg: &SsrConfig, w: &DataWindow) -> Result<Vec<PlausibleBall>> {
    SecureReconstructor::new(sys.clone(), *cfg)?.plausible_balls(w)
}

/// One-shot form of [`SecureReconstructor::membership`].
pub fn membership_oracle(sys: &LinearSystem, cfg: &SsrConfig, w: &DataWindow, x0: &DVector<f64>) -> Result<bool> {
    SecureReconstructor::new(sys.clone(), *cfg)?.membership(w, x0)
}
