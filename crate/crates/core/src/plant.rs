//! Ground-truth plant, bounded measurement noise and the nominal
//! waypoint-tracking controller.

use nalgebra::DVector;
use rand::{Rng, RngExt};

use crate::error::{invalid, Result};
use crate::model::LinearSystem;

/// Planar drone state `(x₁, v₁, x₂, v₂)` at step `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    pub x: DVector<f64>,
    pub t: usize,
}

impl PlantState {
    pub fn new(x: DVector<f64>) -> Self {
        Self { x, t: 0 }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x[0], self.x[2]]
    }
}

/// Advances the plant one sample and returns the clean output `Cx(t+1)`.
pub fn plant_step(sys: &LinearSystem, st: &PlantState, u: &DVector<f64>) -> (PlantState, DVector<f64>) {
    let x = sys.step(&st.x, u);
    let y = sys.output(&x);
    (PlantState { x, t: st.t + 1 }, y)
}

/// I.i.d. uniform noise on `[−d_max, d_max]` for each of `p` sensors.
pub fn sample_noise<R: Rng + ?Sized>(d_max: f64, p: usize, rng: &mut R) -> DVector<f64> {
    if d_max == 0.0 {
        return DVector::zeros(p);
    }
    DVector::from_fn(p, |_, _| rng.random_range(-d_max..=d_max))
}

/// Cyclic waypoint list with a saturated proportional velocity law.
#[derive(Debug, Clone, PartialEq)]
pub struct WaypointPlan {
    pub waypoints: Vec<[f64; 2]>,
    pub active: usize,
    pub capture_radius: f64,
    pub gain: f64,
    pub v_max: f64,
}

impl WaypointPlan {
    pub fn new(waypoints: Vec<[f64; 2]>, capture_radius: f64, gain: f64, v_max: f64) -> Result<Self> {
        if waypoints.is_empty() {
            return Err(invalid("waypoint plan needs at least one waypoint"));
        }
        if !(capture_radius > 0.0) {
            return Err(invalid(format!("capture radius must be positive, got {capture_radius}")));
        }
        if !(gain > 0.0) {
            return Err(invalid(format!("controller gain must be positive, got {gain}")));
        }
        if !(v_max > 0.0) {
            return Err(invalid(format!("v_max must be positive, got {v_max}")));
        }
        Ok(Self { waypoints, active: 0, capture_radius, gain, v_max })
    }

    pub fn target(&self) -> [f64; 2] {
        self.waypoints[self.active]
    }
}

/// Output of one controller evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct NominalCommand {
    pub u_nom: DVector<f64>,
    pub plan: WaypointPlan,
    /// Whether the active waypoint was captured (and the plan advanced).
    pub captured: bool,
}

/// `u = clamp(gain · (w − position), ±v_max)` toward the active waypoint;
/// the plan advances once the estimate is within the capture radius.
pub fn nominal_controller(plan: &WaypointPlan, x_est: &DVector<f64>) -> NominalCommand {
    let w = plan.target();
    let err = [w[0] - x_est[0], w[1] - x_est[2]];
    let u_nom = DVector::from_iterator(2, err.iter().map(|e| (plan.gain * e).clamp(-plan.v_max, plan.v_max)));
    let mut plan = plan.clone();
    let captured = err[0].hypot(err[1]) <= plan.capture_radius;
    if captured {
        plan.active = (plan.active + 1) % plan.waypoints.len();
    }
    NominalCommand { u_nom, plan, captured }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::drone_model;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rest_is_equilibrium() {
        let sys = drone_model(0.3, 0.05).unwrap();
        let st = PlantState::new(DVector::from_vec(vec![1.0, 0.0, -2.0, 0.0]));
        let (next, y) = plant_step(&sys, &st, &DVector::zeros(2));
        assert_eq!(next.x, st.x);
        assert_eq!(next.t, 1);
        assert_eq!(y.rows(0, 4), y.rows(4, 4));
    }

    #[test]
    fn step_response_matches_first_order_lag() {
        let tau = 0.3;
        let sys = drone_model(tau, 0.05).unwrap();
        let mut st = PlantState::new(DVector::zeros(4));
        let u = DVector::from_vec(vec![1.0, 0.0]);
        let mut prev = 0.0;
        for k in 1..=100 {
            st = plant_step(&sys, &st, &u).0;
            let t = 0.05 * k as f64;
            let v_exact = 1.0 - (-t / tau).exp();
            let x_exact = t - tau * (1.0 - (-t / tau).exp());
            assert!((st.x[1] - v_exact).abs() < 1e-12);
            assert!((st.x[0] - x_exact).abs() < 1e-12);
            assert!(st.x[1] > prev && st.x[1] < 1.0);
            prev = st.x[1];
        }
    }

    #[test]
    fn noise_support_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(sample_noise(0.0, 8, &mut rng), DVector::zeros(8));
        let mut worst: f64 = 0.0;
        for _ in 0..100_000 / 8 {
            worst = worst.max(sample_noise(0.05, 8, &mut rng).amax());
        }
        assert!(worst <= 0.05);
        let a = sample_noise(0.1, 8, &mut ChaCha8Rng::seed_from_u64(9));
        let b = sample_noise(0.1, 8, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn controller_cases() {
        let plan = WaypointPlan::new(vec![[5.7, 5.7], [-5.7, 5.7]], 0.3, 1.0, 2.0).unwrap();
        let cmd = nominal_controller(&plan, &DVector::zeros(4));
        assert_eq!(cmd.u_nom, DVector::from_vec(vec![2.0, 2.0]));
        assert!(!cmd.captured);
        let at = DVector::from_vec(vec![5.7, 0.0, 5.7, 0.0]);
        let cmd = nominal_controller(&plan, &at);
        assert_eq!(cmd.u_nom, DVector::zeros(2));
        assert!(cmd.captured);
        assert_eq!(cmd.plan.active, 1);
        let far = DVector::from_vec(vec![-100.0, 0.0, 3.0, 0.0]);
        assert_eq!(nominal_controller(&plan, &far).u_nom.amax(), 2.0);
        assert!(WaypointPlan::new(vec![[0.0, 0.0]], 0.0, 1.0, 1.0).is_err());
    }
}
