//! Scenario files.
//!
//! A scenario is a flat list of `section.key = value` lines (TOML dotted
//! keys), e.g.
//!
//! ```text
//! model.tau_s = 0.3
//! geofence.x1 = [-6.0, 6.0]
//! controller.waypoints = [[5.7, 5.7], [-5.7, 5.7], [-5.7, -5.7], [5.7, -5.7]]
//! attack.kind = "constant"
//! ```
//!
//! The full schema is documented in `scenarios/README.md`. Syntax and type
//! errors are [`ConfigError::Parse`]; well-formed files that break a model
//! precondition are [`ConfigError::Validation`] with one entry per field.

use std::fmt;
use std::path::Path;

use serde::Deserialize;

use crate::attack::{AttackKind, AttackSpec, PhaseSchedule};
use crate::filter::DeltaBound;

#[derive(Debug, Clone, PartialEq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid scenario:\n{}", .0.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n"))]
    Validation(Vec<FieldError>),
}

impl ConfigError {
    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            ConfigError::Io { .. } => 1,
            ConfigError::Parse(_) => 2,
            ConfigError::Validation(_) => 3,
        }
    }
}

/// Which measurements feed the nominal controller and the baseline filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EstimateSource {
    /// Mean of the two redundant state copies.
    #[default]
    Average,
    /// First copy only (sensors 1–4).
    FirstCopy,
}

impl EstimateSource {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "average" => Some(Self::Average),
            "copy1" => Some(Self::FirstCopy),
            _ => None,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Self::Average => "average",
            Self::FirstCopy => "copy1",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub tau_s: f64,
    pub ts: f64,
    /// Time constant of the simulated plant when it differs from the filter model.
    pub plant_tau_s: Option<f64>,
    pub l: usize,
    pub s: usize,
    pub d_max: f64,
    pub gamma: f64,
    pub delta_bound: DeltaBound,
    /// Safe box `[lo, hi]` for `x₁` and `x₂`.
    pub bounds: [[f64; 2]; 2],
    pub waypoints: Vec<[f64; 2]>,
    pub gain: f64,
    pub capture_radius: f64,
    pub v_max: f64,
    pub estimate: EstimateSource,
    pub attack: Option<AttackSpec>,
    pub schedule: PhaseSchedule,
    /// Put the plant back at `x0` and restart the data window when phase 3 begins.
    pub phase3_reset: bool,
    pub horizon: usize,
    pub seed: u64,
    pub x0: [f64; 4],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: RawModel,
    ssr: RawSsr,
    filter: RawFilter,
    geofence: RawGeofence,
    controller: RawController,
    attack: Option<RawAttack>,
    schedule: RawSchedule,
    run: RawRun,
    plant: Option<RawPlant>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    tau_s: f64,
    ts: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSsr {
    l: usize,
    s: usize,
    d_max: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFilter {
    gamma: f64,
    delta_bound: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeofence {
    x1: [f64; 2],
    x2: [f64; 2],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawController {
    waypoints: Vec<[f64; 2]>,
    gain: Option<f64>,
    capture_radius: Option<f64>,
    v_max: Option<f64>,
    estimate: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAttack {
    kind: String,
    sensor: usize,
    param: f64,
    start: usize,
    end: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    phase2_start: usize,
    phase3_start: usize,
    phase3_reset: Option<bool>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    horizon: usize,
    seed: u64,
    x0: Option<[f64; 4]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlant {
    tau_s: f64,
}

pub const DEFAULT_GAIN: f64 = 1.0;
pub const DEFAULT_CAPTURE_RADIUS: f64 = 0.3;
pub const DEFAULT_V_MAX: f64 = 2.0;

pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let mut errs = Vec::new();
    let mut fail = |field: &str, message: String| errs.push(FieldError { field: field.into(), message });

    let positive = |v: f64| v > 0.0 && v.is_finite();
    if !positive(raw.model.tau_s) {
        fail("model.tau_s", format!("must be positive, got {}", raw.model.tau_s));
    }
    if !positive(raw.model.ts) {
        fail("model.ts", format!("must be positive, got {}", raw.model.ts));
    }
    if let Some(p) = &raw.plant {
        if !positive(p.tau_s) {
            fail("plant.tau_s", format!("must be positive, got {}", p.tau_s));
        }
    }
    if raw.ssr.l + 1 < 4 {
        fail("ssr.l", format!("window length l+1 = {} must be at least n = 4", raw.ssr.l + 1));
    }
    if raw.ssr.s >= 8 {
        fail("ssr.s", format!("must be smaller than p = 8, got {}", raw.ssr.s));
    } else if raw.ssr.s > 1 {
        // Two copies per state: removing both copies of one coordinate loses observability.
        fail("ssr.s", format!("the duplicated drone model is only 1-sparse observable, got {}", raw.ssr.s));
    }
    if !(raw.ssr.d_max >= 0.0 && raw.ssr.d_max.is_finite()) {
        fail("ssr.d_max", format!("must be finite and nonnegative, got {}", raw.ssr.d_max));
    }
    if !(raw.filter.gamma > 0.0 && raw.filter.gamma < 1.0) {
        fail("filter.gamma", format!("must lie in (0, 1), got {}", raw.filter.gamma));
    }
    let delta_bound = match raw.filter.delta_bound.as_deref() {
        None | Some("matrix-norm") => DeltaBound::MatrixNorm,
        Some("per-row") => DeltaBound::PerRow,
        Some(other) => {
            fail("filter.delta_bound", format!("expected \"matrix-norm\" or \"per-row\", got {other:?}"));
            DeltaBound::MatrixNorm
        }
    };

    let bounds = [raw.geofence.x1, raw.geofence.x2];
    for (name, [lo, hi]) in ["geofence.x1", "geofence.x2"].iter().zip(bounds) {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            fail(name, format!("box [{lo}, {hi}] is empty"));
        }
    }
    let inside = |p: [f64; 2]| (0..2).all(|a| bounds[a][0] <= p[a] && p[a] <= bounds[a][1]);

    let c = &raw.controller;
    if c.waypoints.len() != 4 {
        fail("controller.waypoints", format!("expected 4 waypoints, got {}", c.waypoints.len()));
    }
    for (k, w) in c.waypoints.iter().enumerate() {
        if !inside(*w) {
            fail("controller.waypoints", format!("waypoint {} ({}, {}) lies outside the geofence", k + 1, w[0], w[1]));
        }
    }
    let gain = c.gain.unwrap_or(DEFAULT_GAIN);
    let capture_radius = c.capture_radius.unwrap_or(DEFAULT_CAPTURE_RADIUS);
    let v_max = c.v_max.unwrap_or(DEFAULT_V_MAX);
    for (name, v) in [("controller.gain", gain), ("controller.capture_radius", capture_radius), ("controller.v_max", v_max)] {
        if !positive(v) {
            fail(name, format!("must be positive, got {v}"));
        }
    }
    let estimate = match c.estimate.as_deref() {
        None => EstimateSource::default(),
        Some(s) => EstimateSource::parse(s).unwrap_or_else(|| {
            fail("controller.estimate", format!("expected \"average\" or \"copy1\", got {s:?}"));
            EstimateSource::default()
        }),
    };

    let attack = raw.attack.as_ref().and_then(|a| {
        let kind = AttackKind::parse(&a.kind);
        if kind.is_none() {
            fail("attack.kind", format!("expected constant, noise, scale or shift, got {:?}", a.kind));
        }
        if !(1..=8).contains(&a.sensor) {
            fail("attack.sensor", format!("must be in 1..=8, got {}", a.sensor));
        }
        if a.start > a.end {
            fail("attack.end", format!("attack ends at {} before it starts at {}", a.end, a.start));
        }
        if !a.param.is_finite() || (kind == Some(AttackKind::Noise) && a.param < 0.0) {
            fail("attack.param", format!("invalid value {}", a.param));
        }
        kind.and_then(|k| AttackSpec::new(k, a.sensor, a.param, a.start, a.end).ok())
    });

    let schedule = PhaseSchedule::new(raw.schedule.phase2_start, raw.schedule.phase3_start).unwrap_or_else(|e| {
        fail("schedule.phase3_start", e.to_string());
        PhaseSchedule { phase2_start: 1, phase3_start: 2 }
    });

    if raw.run.horizon == 0 {
        fail("run.horizon", "must be positive".into());
    }
    let x0 = raw.run.x0.unwrap_or([0.0; 4]);
    if x0.iter().any(|v| !v.is_finite()) || !inside([x0[0], x0[2]]) {
        fail("run.x0", format!("initial position ({}, {}) must lie inside the geofence", x0[0], x0[2]));
    }

    if !errs.is_empty() {
        return Err(ConfigError::Validation(errs));
    }
    Ok(ScenarioConfig {
        tau_s: raw.model.tau_s,
        ts: raw.model.ts,
        plant_tau_s: raw.plant.map(|p| p.tau_s),
        l: raw.ssr.l,
        s: raw.ssr.s,
        d_max: raw.ssr.d_max,
        gamma: raw.filter.gamma,
        delta_bound,
        bounds,
        waypoints: raw.controller.waypoints,
        gain,
        capture_radius,
        v_max,
        estimate,
        attack,
        schedule,
        phase3_reset: raw.schedule.phase3_reset.unwrap_or(false),
        horizon: raw.run.horizon,
        seed: raw.run.seed,
        x0,
    })
}

fn fmt_f(v: f64) -> String {
    // Debug keeps a decimal point on integral values, so the value stays a TOML float.
    format!("{v:?}")
}

impl ScenarioConfig {
    /// Serializes back to the scenario file format; `parse_config` of the
    /// result reproduces `self`.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        line("model.tau_s", fmt_f(self.tau_s));
        line("model.ts", fmt_f(self.ts));
        if let Some(t) = self.plant_tau_s {
            line("plant.tau_s", fmt_f(t));
        }
        line("ssr.l", self.l.to_string());
        line("ssr.s", self.s.to_string());
        line("ssr.d_max", fmt_f(self.d_max));
        line("filter.gamma", fmt_f(self.gamma));
        line(
            "filter.delta_bound",
            match self.delta_bound {
                DeltaBound::MatrixNorm => "\"matrix-norm\"".into(),
                DeltaBound::PerRow => "\"per-row\"".into(),
            },
        );
        line("geofence.x1", format!("[{}, {}]", fmt_f(self.bounds[0][0]), fmt_f(self.bounds[0][1])));
        line("geofence.x2", format!("[{}, {}]", fmt_f(self.bounds[1][0]), fmt_f(self.bounds[1][1])));
        let wps: Vec<String> =
            self.waypoints.iter().map(|w| format!("[{}, {}]", fmt_f(w[0]), fmt_f(w[1]))).collect();
        line("controller.waypoints", format!("[{}]", wps.join(", ")));
        line("controller.gain", fmt_f(self.gain));
        line("controller.capture_radius", fmt_f(self.capture_radius));
        line("controller.v_max", fmt_f(self.v_max));
        line("controller.estimate", format!("\"{}\"", self.estimate.as_str()));
        if let Some(a) = &self.attack {
            line("attack.kind", format!("\"{}\"", a.kind.as_str()));
            line("attack.sensor", a.target_sensor.to_string());
            line("attack.param", fmt_f(a.param));
            line("attack.start", a.start_step.to_string());
            line("attack.end", a.end_step.to_string());
        }
        line("schedule.phase2_start", self.schedule.phase2_start.to_string());
        line("schedule.phase3_start", self.schedule.phase3_start.to_string());
        line("schedule.phase3_reset", self.phase3_reset.to_string());
        line("run.horizon", self.horizon.to_string());
        line("run.seed", self.seed.to_string());
        line("run.x0", format!("[{}]", self.x0.iter().map(|v| fmt_f(*v)).collect::<Vec<_>>().join(", ")));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
model.tau_s = 0.3
model.ts = 0.05
ssr.l = 3
ssr.s = 1
ssr.d_max = 0.05
filter.gamma = 0.2
geofence.x1 = [-6.0, 6.0]
geofence.x2 = [-6.0, 6.0]
controller.waypoints = [[5.7, 5.7], [-5.7, 5.7], [-5.7, -5.7], [5.7, -5.7]]
schedule.phase2_start = 400
schedule.phase3_start = 800
run.horizon = 1600
run.seed = 1
"#;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.gain, DEFAULT_GAIN);
        assert_eq!(cfg.capture_radius, DEFAULT_CAPTURE_RADIUS);
        assert_eq!(cfg.v_max, DEFAULT_V_MAX);
        assert!(cfg.attack.is_none());
        assert!(!cfg.phase3_reset);
        assert_eq!(cfg.x0, [0.0; 4]);
        assert_eq!(parse_config(&cfg.to_config_string()).unwrap(), cfg);
    }

    #[test]
    fn gamma_out_of_range_is_validation_error() {
        let text = MINIMAL.replace("filter.gamma = 0.2", "filter.gamma = 1.5");
        match parse_config(&text) {
            Err(ConfigError::Validation(errs)) => {
                assert_eq!(errs.len(), 1);
                assert_eq!(errs[0].field, "filter.gamma");
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn all_violations_reported() {
        let text = MINIMAL
            .replace("model.ts = 0.05", "model.ts = -1.0")
            .replace("ssr.l = 3", "ssr.l = 1")
            .replace("[5.7, 5.7],", "[7.0, 5.7],");
        let Err(ConfigError::Validation(errs)) = parse_config(&text) else { panic!() };
        let fields: Vec<_> = errs.iter().map(|e| e.field.as_str()).collect();
        assert_eq!(fields, vec!["model.ts", "ssr.l", "controller.waypoints"]);
    }

    #[test]
    fn syntax_and_type_errors_are_parse_errors() {
        assert!(matches!(parse_config("model.tau_s = = 1"), Err(ConfigError::Parse(_))));
        let text = MINIMAL.replace("ssr.l = 3", "ssr.l = \"three\"");
        assert!(matches!(parse_config(&text), Err(ConfigError::Parse(_))));
        let text = format!("{MINIMAL}\nrun.speed = 3\n");
        assert!(matches!(parse_config(&text), Err(ConfigError::Parse(_))));
        assert_eq!(ConfigError::Parse(String::new()).exit_code(), 2);
        assert_eq!(ConfigError::Validation(vec![]).exit_code(), 3);
    }
}
