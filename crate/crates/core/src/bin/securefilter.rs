use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use securefilter::harness::{
    load_config, read_trace, render_svg, run_scenario_with, summarize, write_trace, ConfigError, RunOptions,
};
use securefilter::selftest::run_selftest;

#[derive(Parser)]
#[command(name = "securefilter", version, about = "Secure CBF safety filter under sparse sensor attacks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write trace.csv, summary.json and scenario.cfg.
    Run {
        config: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Write zero solve times so traces are byte-for-byte reproducible.
        #[arg(long)]
        no_timing: bool,
    },
    /// Print per-phase statistics of a trace as JSON.
    Summarize { trace: PathBuf },
    /// Draw the trajectory of a trace as SVG.
    Plot {
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Scenario for the safe box; defaults to scenario.cfg next to the trace.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Compare the solvers against brute-force oracles.
    Selftest {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<securefilter::Error> for Failure {
    fn from(e: securefilter::Error) -> Self {
        Failure { code: 1, message: e.to_string() }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure { code: e.exit_code() as u8, message: e.to_string() }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| Failure { code: 1, message: format!("{}: {e}", path.display()) }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run { config, seed, out, no_timing } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let trace = run_scenario_with(&cfg, RunOptions { record_timing: !no_timing })?;
            let summary = summarize(&trace)?;
            fs::create_dir_all(&out).map_err(io_err(&out))?;
            let trace_path = out.join("trace.csv");
            write_trace(BufWriter::new(File::create(&trace_path).map_err(io_err(&trace_path))?), &trace)?;
            let summary_path = out.join("summary.json");
            fs::write(&summary_path, to_json(&summary) + "\n").map_err(io_err(&summary_path))?;
            let cfg_path = out.join("scenario.cfg");
            fs::write(&cfg_path, cfg.to_config_string()).map_err(io_err(&cfg_path))?;
            for p in &summary.phases {
                println!(
                    "phase {}: steps={} min_h={:.6} violations={} fallbacks={} median_us={}",
                    p.phase, p.steps, p.min_h, p.violation_steps, p.fallback_steps, p.median_solve_time_us
                );
            }
            println!("wrote {}", out.display());
        }
        Command::Summarize { trace } => {
            let records = read_trace(BufReader::new(File::open(&trace).map_err(io_err(&trace))?))?;
            println!("{}", to_json(&summarize(&records)?));
        }
        Command::Plot { trace, out, config } => {
            let records = read_trace(BufReader::new(File::open(&trace).map_err(io_err(&trace))?))?;
            let cfg_path = config.or_else(|| {
                let p = trace.parent().unwrap_or(Path::new(".")).join("scenario.cfg");
                p.exists().then_some(p)
            });
            let bounds = match cfg_path {
                Some(p) => Some(load_config(&p)?.bounds),
                None => None,
            };
            fs::write(&out, render_svg(&records, bounds)).map_err(io_err(&out))?;
        }
        Command::Selftest { seed, trials } => {
            let mut failed = 0;
            for c in run_selftest(seed, trials) {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                failed += usize::from(!c.passed);
            }
            if failed > 0 {
                return Err(Failure { code: 1, message: format!("{failed} self-check(s) failed") });
            }
        }
    }
    Ok(())
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("summary serializes")
}
