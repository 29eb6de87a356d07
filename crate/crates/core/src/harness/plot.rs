use std::fmt::Write;

use super::trace::TraceRecord;
use crate::attack::Phase;

const SIZE: f64 = 600.0;
const PAD: f64 = 40.0;

fn colour(p: Phase) -> &'static str {
    match p {
        Phase::One => "#1f77b4",
        Phase::Two => "#d62728",
        Phase::Three => "#2ca02c",
    }
}

/// Top-down view of the true `(x₁, x₂)` trajectory, coloured by phase, with
/// the safe box drawn when given.
pub fn render_svg(trace: &[TraceRecord], safe_box: Option<[[f64; 2]; 2]>) -> String {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    let mut extend = |p: [f64; 2]| {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    };
    for r in trace {
        extend([r.true_state[0], r.true_state[2]]);
    }
    if let Some(b) = safe_box {
        extend([b[0][0], b[1][0]]);
        extend([b[0][1], b[1][1]]);
    }
    if !lo[0].is_finite() {
        lo = [-1.0; 2];
        hi = [1.0; 2];
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-9) * 1.1;
    let mid = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
    let scale = (SIZE - 2.0 * PAD) / span;
    let px = |x: f64| SIZE / 2.0 + (x - mid[0]) * scale;
    let py = |y: f64| SIZE / 2.0 - (y - mid[1]) * scale;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if let Some(b) = safe_box {
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black" stroke-dasharray="6 4"/>"#,
            px(b[0][0]),
            py(b[1][1]),
            (b[0][1] - b[0][0]) * scale,
            (b[1][1] - b[1][0]) * scale
        );
    }
    let mut k = 0;
    while k < trace.len() {
        let phase = trace[k].phase;
        let start = k.saturating_sub(1);
        while k < trace.len() && trace[k].phase == phase {
            k += 1;
        }
        let pts: Vec<String> = trace[start..k]
            .iter()
            .map(|r| format!("{:.2},{:.2}", px(r.true_state[0]), py(r.true_state[2])))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            pts.join(" "),
            colour(phase)
        );
    }
    for (i, p) in [Phase::One, Phase::Two, Phase::Three].into_iter().enumerate() {
        let y = 18.0 + 16.0 * i as f64;
        let _ = writeln!(s, r#"<line x1="10" y1="{y}" x2="30" y2="{y}" stroke="{}" stroke-width="3"/>"#, colour(p));
        let _ = writeln!(
            s,
            r#"<text x="36" y="{}" font-family="sans-serif" font-size="12">phase {}</text>"#,
            y + 4.0,
            p.number()
        );
    }
    s.push_str("</svg>\n");
    s
}
