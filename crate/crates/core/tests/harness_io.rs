use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use securefilter::attack::Phase;
use securefilter::filter::FilterMode;
use securefilter::harness::{
    load_config, parse_config, read_trace, render_svg, run_scenario, run_scenario_with, summarize, write_trace,
    ConfigError, RunOptions, Summary, TraceRecord,
};

fn root() -> &'static Path {
    Path::new(env!("CARGO_MANIFEST_DIR"))
}

fn golden(name: &str) -> PathBuf {
    root().join("tests/golden").join(name)
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_securefilter"))
}

fn no_timing() -> RunOptions {
    RunOptions { record_timing: false }
}

#[test]
fn bundled_scenarios_load() {
    let sitl = load_config(root().join("scenarios/sitl.cfg")).unwrap();
    assert_eq!(sitl.bounds, [[-6.0, 6.0], [-6.0, 6.0]]);
    assert_eq!(sitl.waypoints, vec![[5.7, 5.7], [-5.7, 5.7], [-5.7, -5.7], [5.7, -5.7]]);
    assert_eq!(sitl.d_max, 0.05);
    let attack = sitl.attack.unwrap();
    assert_eq!((attack.target_sensor, attack.param), (1, 2.0));

    let hw = load_config(root().join("scenarios/hardware.cfg")).unwrap();
    assert_eq!(hw.bounds, [[-3.0, 3.0], [-3.0, 3.0]]);
    assert!(hw.waypoints.iter().all(|w| w[0].abs() == 2.8 && w[1].abs() == 2.8));

    for entry in fs::read_dir(root().join("scenarios")).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "cfg") {
            let cfg = load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert_eq!(parse_config(&cfg.to_config_string()).unwrap(), cfg);
        }
    }
}

#[test]
fn config_errors_are_distinguished() {
    let text = fs::read_to_string(root().join("scenarios/sitl.cfg")).unwrap();
    match parse_config(&text.replace("filter.gamma = 0.2", "filter.gamma = 1.5")) {
        Err(ConfigError::Validation(errs)) => assert!(errs.iter().any(|e| e.field == "filter.gamma")),
        other => panic!("expected a validation error, got {other:?}"),
    }
    assert!(matches!(parse_config("model.tau_s = ["), Err(ConfigError::Parse(_))));
    assert!(matches!(load_config("/nonexistent.cfg"), Err(ConfigError::Io { .. })));
}

fn assert_traces_close(a: &[TraceRecord], b: &[TraceRecord]) {
    assert_eq!(a.len(), b.len());
    let close = |x: &[f64], y: &[f64]| x.iter().zip(y).all(|(p, q)| (p - q).abs() <= 1e-9);
    for (r, g) in a.iter().zip(b) {
        assert_eq!((r.t, r.phase, r.mode, r.ball_count, r.waypoint_captured), (g.t, g.phase, g.mode, g.ball_count, g.waypoint_captured));
        assert!(close(&r.true_state, &g.true_state), "state differs at t = {}", r.t);
        assert!(close(&r.measured_y, &g.measured_y), "measurement differs at t = {}", r.t);
        assert!(close(&r.u_nom, &g.u_nom) && close(&r.u_safe, &g.u_safe), "input differs at t = {}", r.t);
        assert!((r.min_h - g.min_h).abs() <= 1e-9);
    }
}

#[test]
fn golden_trace_and_summary() {
    let cfg = load_config(golden("short.cfg")).unwrap();
    let trace = run_scenario_with(&cfg, no_timing()).unwrap();
    let expected = read_trace(fs::File::open(golden("short_trace.csv")).unwrap()).unwrap();
    assert_traces_close(&trace, &expected);

    let summary = summarize(&trace).unwrap();
    let expected: Summary = serde_json::from_str(&fs::read_to_string(golden("short_summary.json")).unwrap()).unwrap();
    assert_eq!(summary.phases.len(), expected.phases.len());
    for (s, e) in summary.phases.iter().chain([&summary.overall]).zip(expected.phases.iter().chain([&expected.overall])) {
        assert_eq!((s.phase, s.steps, s.violation_steps, s.fallback_steps, s.waypoint_captures), (e.phase, e.steps, e.violation_steps, e.fallback_steps, e.waypoint_captures));
        assert!((s.min_h - e.min_h).abs() <= 1e-9);
    }
}

#[test]
fn trace_csv_round_trips_exactly() {
    let cfg = load_config(golden("short.cfg")).unwrap();
    let trace = run_scenario(&cfg).unwrap();
    let mut buf = Vec::new();
    write_trace(&mut buf, &trace).unwrap();
    assert_eq!(read_trace(buf.as_slice()).unwrap(), trace);
    assert!(read_trace("t,phase\n1,1\n".as_bytes()).is_err());
}

#[test]
fn same_seed_same_trace() {
    let cfg = load_config(golden("short.cfg")).unwrap();
    let a = run_scenario_with(&cfg, no_timing()).unwrap();
    let b = run_scenario_with(&cfg, no_timing()).unwrap();
    assert_eq!(a, b);
    let mut other = cfg.clone();
    other.seed += 1;
    assert_ne!(run_scenario_with(&other, no_timing()).unwrap(), a);
}

#[test]
fn violating_run_summary() {
    let cfg = load_config(golden("short.cfg")).unwrap();
    let s = summarize(&run_scenario(&cfg).unwrap()).unwrap();
    assert!(s.phase(2).unwrap().violation_steps > 0);
    assert_eq!(s.phase(3).unwrap().violation_steps, 0);
    assert_eq!(s.overall.steps, 240);
    assert!(summarize(&[]).is_err());
}

#[test]
fn safe_run_has_no_violations() {
    let text = fs::read_to_string(golden("short.cfg")).unwrap();
    let text: String = text.lines().filter(|l| !l.starts_with("attack.")).map(|l| format!("{l}\n")).collect();
    let trace = run_scenario(&parse_config(&text).unwrap()).unwrap();
    let s = summarize(&trace).unwrap();
    assert_eq!(s.overall.violation_steps, 0);
    assert!(trace.iter().filter(|r| r.phase == Phase::Three).all(|r| r.mode != FilterMode::Fallback));
}

#[test]
fn svg_has_box_and_phase_paths() {
    let cfg = load_config(golden("short.cfg")).unwrap();
    let trace = run_scenario_with(&cfg, no_timing()).unwrap();
    let svg = render_svg(&trace, Some(cfg.bounds));
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("<polyline").count(), 3);
    assert!(svg.contains("stroke-dasharray"));
}

#[test]
fn cli_run_summarize_plot() {
    let out = tempfile::tempdir().unwrap();
    let run = |dir: &Path| {
        cli().args(["run", golden("short.cfg").to_str().unwrap(), "--no-timing", "--out"]).arg(dir).output().unwrap()
    };
    let first = out.path().join("a");
    let second = out.path().join("b");
    assert!(run(&first).status.success());
    assert!(run(&second).status.success());
    let bytes = |d: &Path, f: &str| fs::read(d.join(f)).unwrap();
    assert_eq!(bytes(&first, "trace.csv"), bytes(&second, "trace.csv"));
    assert_eq!(bytes(&first, "summary.json"), bytes(&second, "summary.json"));

    let summary = cli().arg("summarize").arg(first.join("trace.csv")).output().unwrap();
    assert!(summary.status.success());
    let printed: Summary = serde_json::from_slice(&summary.stdout).unwrap();
    let written: Summary = serde_json::from_slice(&bytes(&first, "summary.json")).unwrap();
    assert_eq!(printed, written);

    let svg = out.path().join("plot.svg");
    let plot = cli().arg("plot").arg(first.join("trace.csv")).arg("--out").arg(&svg).output().unwrap();
    assert!(plot.status.success());
    assert!(fs::read_to_string(&svg).unwrap().contains("stroke-dasharray"));

    let reseeded = out.path().join("c");
    let st = cli()
        .args(["run", golden("short.cfg").to_str().unwrap(), "--no-timing", "--seed", "99", "--out"])
        .arg(&reseeded)
        .output()
        .unwrap();
    assert!(st.status.success());
    assert_ne!(bytes(&reseeded, "trace.csv"), bytes(&first, "trace.csv"));
    assert_eq!(load_config(reseeded.join("scenario.cfg")).unwrap().seed, 99);
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad_syntax = dir.path().join("syntax.cfg");
    fs::write(&bad_syntax, "model.tau_s = [").unwrap();
    let bad_value = dir.path().join("value.cfg");
    let text = fs::read_to_string(golden("short.cfg")).unwrap();
    fs::write(&bad_value, text.replace("filter.gamma = 0.2", "filter.gamma = 1.5")).unwrap();

    let code = |cfg: &Path| cli().arg("run").arg(cfg).arg("--out").arg(dir.path()).output().unwrap();
    let parse = code(&bad_syntax);
    assert_eq!(parse.status.code(), Some(2));
    let invalid = code(&bad_value);
    assert_eq!(invalid.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&invalid.stderr).contains("filter.gamma"));
    assert_eq!(code(&dir.path().join("missing.cfg")).status.code(), Some(1));
}

#[test]
fn cli_selftest_passes() {
    let out = cli().args(["selftest", "--trials", "40"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().all(|l| l.starts_with("PASS")));
    assert_eq!(stdout.lines().count(), 4);
}
