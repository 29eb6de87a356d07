//! Closed-loop three-phase experiments: scenario files, simulation, CSV
//! traces, JSON summaries and SVG plots.

mod config;
mod plot;
mod run;
mod summary;
mod trace;

pub use config::{
    load_config, parse_config, ConfigError, EstimateSource, FieldError, ScenarioConfig, DEFAULT_CAPTURE_RADIUS,
    DEFAULT_GAIN, DEFAULT_V_MAX,
};
pub use plot::render_svg;
pub use run::{run_scenario, run_scenario_with, RunOptions, Scenario};
pub use summary::{summarize, PhaseStats, Summary, VIOLATION_TOL};
pub use trace::{read_trace, write_trace, TraceRecord, TRACE_HEADER};
