use serde::{Deserialize, Serialize};

use super::trace::TraceRecord;
use crate::error::{invalid, Result};
use crate::filter::FilterMode;

/// A step counts as a violation when `min_h` drops below `-VIOLATION_TOL`.
pub const VIOLATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseStats {
    /// 1, 2 or 3; 0 for the whole run.
    pub phase: u8,
    pub steps: usize,
    pub min_h: f64,
    pub violation_steps: usize,
    pub fallback_steps: usize,
    pub median_solve_time_us: f64,
    pub max_solve_time_us: u64,
    pub waypoint_captures: usize,
    #[serde(skip)]
    solve_times: Vec<u64>,
}

impl PhaseStats {
    fn empty(phase: u8) -> Self {
        Self {
            phase,
            steps: 0,
            min_h: f64::INFINITY,
            violation_steps: 0,
            fallback_steps: 0,
            median_solve_time_us: 0.0,
            max_solve_time_us: 0,
            waypoint_captures: 0,
            solve_times: Vec::new(),
        }
    }

    fn push(&mut self, r: &TraceRecord) {
        self.steps += 1;
        self.min_h = self.min_h.min(r.min_h);
        self.violation_steps += usize::from(r.min_h < -VIOLATION_TOL);
        self.fallback_steps += usize::from(r.mode == FilterMode::Fallback);
        self.max_solve_time_us = self.max_solve_time_us.max(r.solve_time_us);
        self.waypoint_captures += usize::from(r.waypoint_captured);
        self.solve_times.push(r.solve_time_us);
    }

    fn finish(&mut self) {
        self.solve_times.sort_unstable();
        self.median_solve_time_us = median(&self.solve_times);
    }

    /// Combines statistics of two disjoint step sets.
    pub fn merge(&self, other: &PhaseStats) -> PhaseStats {
        let mut solve_times = [self.solve_times.as_slice(), other.solve_times.as_slice()].concat();
        solve_times.sort_unstable();
        PhaseStats {
            phase: if self.phase == other.phase { self.phase } else { 0 },
            steps: self.steps + other.steps,
            min_h: self.min_h.min(other.min_h),
            violation_steps: self.violation_steps + other.violation_steps,
            fallback_steps: self.fallback_steps + other.fallback_steps,
            median_solve_time_us: median(&solve_times),
            max_solve_time_us: self.max_solve_time_us.max(other.max_solve_time_us),
            waypoint_captures: self.waypoint_captures + other.waypoint_captures,
            solve_times,
        }
    }
}

fn median(sorted: &[u64]) -> f64 {
    match sorted.len() {
        0 => 0.0,
        n if n % 2 == 1 => sorted[n / 2] as f64,
        n => (sorted[n / 2 - 1] as f64 + sorted[n / 2] as f64) / 2.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub overall: PhaseStats,
    /// Phases present in the trace, in order.
    pub phases: Vec<PhaseStats>,
}

impl Summary {
    pub fn phase(&self, n: u8) -> Option<&PhaseStats> {
        self.phases.iter().find(|p| p.phase == n)
    }
}

pub fn summarize(trace: &[TraceRecord]) -> Result<Summary> {
    if trace.is_empty() {
        return Err(invalid("cannot summarize an empty trace"));
    }
    let mut phases: Vec<PhaseStats> = Vec::new();
    for r in trace {
        let n = r.phase.number();
        let idx = match phases.iter().position(|p| p.phase == n) {
            Some(i) => i,
            None => {
                phases.push(PhaseStats::empty(n));
                phases.len() - 1
            }
        };
        phases[idx].push(r);
    }
    phases.sort_by_key(|p| p.phase);
    for p in &mut phases {
        p.finish();
    }
    let mut overall = phases[1..].iter().fold(phases[0].clone(), |acc, p| acc.merge(p));
    overall.phase = 0;
    Ok(Summary { overall, phases })
}
