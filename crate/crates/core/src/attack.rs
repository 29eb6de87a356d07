//! Sensor spoofing signals and the three-phase experiment schedule.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackKind {
    /// Replace the reading with `param`.
    Constant,
    /// Add zero-mean Gaussian noise with standard deviation `param`.
    Noise,
    /// Replace the reading with `param ×` the true value.
    Scale,
    /// Add the offset `param`.
    Shift,
}

impl AttackKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "constant" => Some(Self::Constant),
            "noise" => Some(Self::Noise),
            "scale" => Some(Self::Scale),
            "shift" => Some(Self::Shift),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Constant => "constant",
            Self::Noise => "noise",
            Self::Scale => "scale",
            Self::Shift => "shift",
        }
    }
}

/// Attack on one sensor, active on the closed step interval `[start_step, end_step]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackSpec {
    pub kind: AttackKind,
    /// 1-based sensor index, as printed in traces and configs.
    pub target_sensor: usize,
    pub param: f64,
    pub start_step: usize,
    pub end_step: usize,
}

impl AttackSpec {
    pub fn new(kind: AttackKind, target_sensor: usize, param: f64, start_step: usize, end_step: usize) -> Result<Self> {
        if target_sensor == 0 {
            return Err(invalid("attack target sensor is 1-based; 0 is not a sensor"));
        }
        if start_step > end_step {
            return Err(invalid(format!("attack start {start_step} is after its end {end_step}")));
        }
        if !param.is_finite() || (kind == AttackKind::Noise && param < 0.0) {
            return Err(invalid(format!("attack parameter {param} is not valid for {}", kind.as_str())));
        }
        Ok(Self { kind, target_sensor, param, start_step, end_step })
    }

    pub fn is_active(&self, t: usize) -> bool {
        (self.start_step..=self.end_step).contains(&t)
    }
}

/// Applies the attack to `y` at step `t`. `true_component` is the clean value
/// of the targeted channel. The generator is only drawn from while a noise
/// attack is active.
pub fn apply_attack<R: Rng + ?Sized>(
    spec: &AttackSpec,
    y: &DVector<f64>,
    true_component: f64,
    t: usize,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let i = spec
        .target_sensor
        .checked_sub(1)
        .filter(|&i| i < y.len())
        .ok_or_else(|| invalid(format!("attack sensor {} outside 1..={}", spec.target_sensor, y.len())))?;
    let mut out = y.clone();
    if !spec.is_active(t) {
        return Ok(out);
    }
    match spec.kind {
        AttackKind::Constant => out[i] = spec.param,
        AttackKind::Noise => {
            let normal = Normal::new(0.0, spec.param).map_err(|e| invalid(e.to_string()))?;
            out[i] += normal.sample(rng);
        }
        AttackKind::Scale => out[i] = spec.param * true_component,
        AttackKind::Shift => out[i] += spec.param,
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    /// Nominal controller behind the baseline filter, no attack.
    One = 1,
    /// Attack active, baseline filter still in charge.
    Two = 2,
    /// Secure safety filter in charge.
    Three = 3,
}

impl Phase {
    pub fn number(self) -> u8 {
        self as u8
    }

    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(Self::One),
            2 => Some(Self::Two),
            3 => Some(Self::Three),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhaseSchedule {
    pub phase2_start: usize,
    pub phase3_start: usize,
}

impl PhaseSchedule {
    pub fn new(phase2_start: usize, phase3_start: usize) -> Result<Self> {
        if !(0 < phase2_start && phase2_start < phase3_start) {
            return Err(invalid(format!(
                "phase boundaries must satisfy 0 < {phase2_start} < {phase3_start}"
            )));
        }
        Ok(Self { phase2_start, phase3_start })
    }
}

/// Half-open phase intervals: `[0, p2)`, `[p2, p3)`, `[p3, ∞)`.
pub fn phase_of(t: usize, sched: &PhaseSchedule) -> Phase {
    if t < sched.phase2_start {
        Phase::One
    } else if t < sched.phase3_start {
        Phase::Two
    } else {
        Phase::Three
    }
}
