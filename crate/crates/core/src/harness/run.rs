use std::time::Instant;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{EstimateSource, ScenarioConfig};
use super::trace::TraceRecord;
use crate::attack::{apply_attack, phase_of, Phase};
use crate::error::Result;
use crate::filter::{baseline_cbf_filter, fallback_policy, FilterMode, FilterOutcome, SecureFilter};
use crate::model::{drone_model, LinearSystem, SafetySpec};
use crate::plant::{nominal_controller, plant_step, sample_noise, PlantState, WaypointPlan};
use crate::ssr::SsrConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Record wall-clock solve times. When off the column is all zeros and
    /// traces are bitwise reproducible.
    pub record_timing: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { record_timing: true }
    }
}

/// Everything a closed-loop run needs, built once from a scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    /// Model used by the filters.
    pub model: LinearSystem,
    /// Model used to simulate the drone.
    pub plant: LinearSystem,
    pub spec: SafetySpec,
    pub ssr: SsrConfig,
}

impl Scenario {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        let model = drone_model(config.tau_s, config.ts)?;
        let plant = match config.plant_tau_s {
            Some(t) => drone_model(t, config.ts)?,
            None => model.clone(),
        };
        let spec = SafetySpec::axis_box(4, &[(0, config.bounds[0]), (2, config.bounds[1])], config.gamma)?;
        let ssr = SsrConfig { s: config.s, l: config.l, d_max: config.d_max };
        ssr.validate(&model)?;
        Ok(Self { config, model, plant, spec, ssr })
    }
}

fn estimate(src: EstimateSource, y: &DVector<f64>) -> DVector<f64> {
    match src {
        EstimateSource::Average => (y.rows(0, 4) + y.rows(4, 4)) * 0.5,
        EstimateSource::FirstCopy => y.rows(0, 4).into_owned(),
    }
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Vec<TraceRecord>> {
    run_scenario_with(cfg, RunOptions::default())
}

/// Simulates `cfg.horizon` steps of the three-phase experiment.
///
/// Phases 1 and 2 run the nominal controller behind the baseline CBF filter
/// fed with the raw estimate; phase 3 hands control to the secure filter.
/// The secure filter's window is fed throughout, so it is ready at the
/// phase switch; after a `phase3_reset` the baseline filter covers the
/// first `l` steps while the window refills. Solver failures are recorded
/// as fallback steps rather than aborting the run.
pub fn run_scenario_with(cfg: &ScenarioConfig, opts: RunOptions) -> Result<Vec<TraceRecord>> {
    let sc = Scenario::new(cfg.clone())?;
    let mut noise_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    noise_rng.set_stream(0);
    let mut attack_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    attack_rng.set_stream(1);

    let x0 = DVector::from_row_slice(&cfg.x0);
    let mut state = PlantState::new(x0.clone());
    let mut plan = WaypointPlan::new(cfg.waypoints.clone(), cfg.capture_radius, cfg.gain, cfg.v_max)?;
    let mut secure = SecureFilter::new(sc.model.clone(), sc.spec.clone(), sc.ssr)?.with_delta_bound(cfg.delta_bound);
    let mut trace = Vec::with_capacity(cfg.horizon);

    for t in 0..cfg.horizon {
        let phase = phase_of(t, &cfg.schedule);
        if cfg.phase3_reset && t == cfg.schedule.phase3_start {
            state = PlantState { x: x0.clone(), t };
            secure.reset();
        }

        let y_clean = sc.plant.output(&state.x);
        let mut y = match &cfg.attack {
            Some(a) if a.target_sensor <= y_clean.len() => {
                apply_attack(a, &y_clean, y_clean[a.target_sensor - 1], t, &mut attack_rng)?
            }
            _ => y_clean.clone(),
        };
        y += sample_noise(cfg.d_max, y.len(), &mut noise_rng);
        secure.observe(y.clone())?;

        let x_est = estimate(cfg.estimate, &y);
        let cmd = nominal_controller(&plan, &x_est);
        plan = cmd.plan;

        let started = Instant::now();
        let (outcome, ball_count) = if phase == Phase::Three && secure.is_ready() {
            match secure.filter(&cmd.u_nom) {
                Ok(step) => (step.outcome, step.balls.len()),
                Err(_) => (fallback_outcome(sc.model.m()), 0),
            }
        } else {
            let out = baseline_cbf_filter(&sc.model, &sc.spec, &x_est, &cmd.u_nom)
                .unwrap_or_else(|_| fallback_outcome(sc.model.m()));
            (out, 0)
        };
        let elapsed = started.elapsed();
        secure.set_applied_input(outcome.u_safe.clone());

        let min_h = sc.spec.min_barrier(&state.x);
        trace.push(TraceRecord {
            t,
            phase,
            true_state: [state.x[0], state.x[1], state.x[2], state.x[3]],
            measured_y: std::array::from_fn(|i| y[i]),
            u_nom: [cmd.u_nom[0], cmd.u_nom[1]],
            u_safe: [outcome.u_safe[0], outcome.u_safe[1]],
            mode: outcome.mode,
            ball_count,
            min_h,
            solve_time_us: if opts.record_timing { elapsed.as_micros() as u64 } else { 0 },
            waypoint_captured: cmd.captured,
        });

        state = plant_step(&sc.plant, &state, &outcome.u_safe).0;
    }
    Ok(trace)
}

fn fallback_outcome(m: usize) -> FilterOutcome {
    FilterOutcome { u_safe: fallback_policy(m), mode: FilterMode::Fallback, constraints_built: 0, margin: f64::NAN }
}
