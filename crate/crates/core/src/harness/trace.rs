use std::io::{Read, Write};

use crate::attack::Phase;
use crate::error::{invalid, Result};
use crate::filter::FilterMode;

/// One simulation step.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: usize,
    pub phase: Phase,
    pub true_state: [f64; 4],
    pub measured_y: [f64; 8],
    pub u_nom: [f64; 2],
    pub u_safe: [f64; 2],
    pub mode: FilterMode,
    /// Plausible balls used by the secure filter; 0 outside phase 3.
    pub ball_count: usize,
    /// Smallest barrier value at the true state.
    pub min_h: f64,
    pub solve_time_us: u64,
    pub waypoint_captured: bool,
}

pub const TRACE_HEADER: [&str; 23] = [
    "t",
    "phase",
    "true_state_1",
    "true_state_2",
    "true_state_3",
    "true_state_4",
    "measured_y_1",
    "measured_y_2",
    "measured_y_3",
    "measured_y_4",
    "measured_y_5",
    "measured_y_6",
    "measured_y_7",
    "measured_y_8",
    "u_nom_1",
    "u_nom_2",
    "u_safe_1",
    "u_safe_2",
    "mode",
    "ball_count",
    "min_h",
    "solve_time_us",
    "waypoint_captured",
];

fn header() -> &'static [&'static str] {
    &TRACE_HEADER
}

fn csv_err(e: csv::Error) -> crate::Error {
    invalid(format!("trace csv: {e}"))
}

/// Floats use Rust's shortest round-trip formatting, so reading a written
/// trace reproduces it exactly.
pub fn write_trace<W: Write>(out: W, trace: &[TraceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header()).map_err(csv_err)?;
    for r in trace {
        let mut row: Vec<String> = vec![r.t.to_string(), r.phase.number().to_string()];
        row.extend(r.true_state.iter().map(f64::to_string));
        row.extend(r.measured_y.iter().map(f64::to_string));
        row.extend(r.u_nom.iter().map(f64::to_string));
        row.extend(r.u_safe.iter().map(f64::to_string));
        row.push(r.mode.as_str().to_string());
        row.push(r.ball_count.to_string());
        row.push(r.min_h.to_string());
        row.push(r.solve_time_us.to_string());
        row.push(u8::from(r.waypoint_captured).to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| invalid(format!("trace csv: {e}")))?;
    Ok(())
}

pub fn read_trace<R: Read>(input: R) -> Result<Vec<TraceRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let hdr = rd.headers().map_err(csv_err)?.clone();
    if hdr.iter().ne(header().iter().copied()) {
        return Err(invalid(format!("unexpected trace header: {}", hdr.iter().collect::<Vec<_>>().join(","))));
    }
    let mut out = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let at = |i: usize| rec.get(i).unwrap_or("");
        let bad = |i: usize| invalid(format!("trace row {}: bad {} value {:?}", line + 1, header()[i], at(i)));
        let f = |i: usize| at(i).parse::<f64>().map_err(|_| bad(i));
        let phase = at(1).parse::<u8>().ok().and_then(Phase::from_number).ok_or_else(|| bad(1))?;
        out.push(TraceRecord {
            t: at(0).parse().map_err(|_| bad(0))?,
            phase,
            true_state: [f(2)?, f(3)?, f(4)?, f(5)?],
            measured_y: [f(6)?, f(7)?, f(8)?, f(9)?, f(10)?, f(11)?, f(12)?, f(13)?],
            u_nom: [f(14)?, f(15)?],
            u_safe: [f(16)?, f(17)?],
            mode: FilterMode::parse(at(18)).ok_or_else(|| bad(18))?,
            ball_count: at(19).parse().map_err(|_| bad(19))?,
            min_h: f(20)?,
            solve_time_us: at(21).parse().map_err(|_| bad(21))?,
            waypoint_captured: match at(22) {
                "0" => false,
                "1" => true,
                _ => return Err(bad(22)),
            },
        });
    }
    Ok(out)
}
