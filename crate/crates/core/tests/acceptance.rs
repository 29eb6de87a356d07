//! Acceptance gates. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use securefilter::attack::Phase;
use securefilter::filter::{robust_constraints, DeltaBound, FilterMode};
use securefilter::harness::{load_config, run_scenario, TraceRecord};
use securefilter::model::{drone_model, DataWindow, LinearSystem, SafetySpec};
use securefilter::optim::{solve_inf_norm_fit, solve_projection_qp, QpStatus};
use securefilter::plant::{nominal_controller, sample_noise, WaypointPlan};
use securefilter::selftest::{inf_norm_fit_by_vertices, projection_by_enumeration};
use securefilter::ssr::{SecureReconstructor, SsrConfig};
use securefilter::SecureFilter;

struct Outcome {
    passed: bool,
    detail: String,
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn phase_min(trace: &[TraceRecord], phase: Phase) -> f64 {
    trace.iter().filter(|r| r.phase == phase).map(|r| r.min_h).fold(f64::INFINITY, f64::min)
}

fn run_file(name: &str) -> (Vec<TraceRecord>, Duration) {
    let cfg = load_config(scenario(name)).expect("bundled scenario loads");
    let started = Instant::now();
    let trace = run_scenario(&cfg).expect("scenario runs");
    (trace, started.elapsed())
}

/// Phase 2 violates, phase 3 stays safe, whole run under a minute.
fn attack_reproduction(name: &str) -> Outcome {
    let (trace, elapsed) = run_file(name);
    let p2 = phase_min(&trace, Phase::Two);
    let p3 = phase_min(&trace, Phase::Three);
    Outcome {
        passed: p2 < 0.0 && p3 >= -1e-6 && elapsed < Duration::from_secs(60),
        detail: format!("{name}: phase 2 min_h {p2:.4}, phase 3 min_h {p3:.4}, runtime {:.2}s", elapsed.as_secs_f64()),
    }
}

fn no_violation_anywhere(names: &[&str]) -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for name in names {
        let (trace, _) = run_file(name);
        let min = trace.iter().map(|r| r.min_h).fold(f64::INFINITY, f64::min);
        passed &= min >= -1e-6;
        parts.push(format!("{name}: min_h {min:.4}"));
    }
    Outcome { passed, detail: parts.join(", ") }
}

fn ssr_exactness() -> Outcome {
    let sys = drone_model(0.3, 0.05).unwrap();
    let l = 3;
    let recon = SecureReconstructor::new(sys.clone(), SsrConfig { s: 1, l, d_max: 0.0 }).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst_center, mut wrong_survivors, mut skipped) = (0.0f64, 0usize, 0usize);
    for _ in 0..100 {
        let attacked = rng.random_range(0..sys.p());
        let (w, x_now) = window_and_state(&sys, l, attacked, &mut rng);
        let reports = recon.evaluate(&w).unwrap();
        // Gate only on windows where every attacked combination is inconsistent by more than 1e-6.
        if reports.iter().any(|r| r.gamma_set.contains(&attacked) && r.fit.d_lower <= 1e-6) {
            skipped += 1;
            continue;
        }
        let balls = recon.plausible_balls(&w).unwrap();
        let expected: Vec<usize> = (0..sys.p()).filter(|&i| i != attacked).collect();
        if balls.len() != 1 || balls[0].gamma_set != expected {
            wrong_survivors += 1;
        }
        for b in &balls {
            worst_center = worst_center.max((&b.center - &x_now).amax());
        }
    }
    Outcome {
        passed: worst_center <= 1e-8 && wrong_survivors == 0 && skipped == 0,
        detail: format!(
            "worst center error {worst_center:.2e}, windows with wrong survivors {wrong_survivors}, inconclusive windows {skipped}"
        ),
    }
}

/// Builds the window `y(t−l)…y(t)`, `u(t−l)…u(t−1)` and returns `x(t)`.
fn window_and_state<R: Rng>(sys: &LinearSystem, l: usize, attacked: usize, rng: &mut R) -> (DataWindow, DVector<f64>) {
    let mut x = DVector::from_fn(sys.n(), |_, _| rng.random_range(-5.0..5.0));
    let mut w = DataWindow::new(l);
    let mut u_prev: Option<DVector<f64>> = None;
    for k in 0..=l {
        let mut y = sys.output(&x);
        let magnitude = rng.random_range(0.5..2.0);
        y[attacked] += if rng.random_bool(0.5) { magnitude } else { -magnitude };
        w.observe(u_prev.as_ref(), y).unwrap();
        if k < l {
            let u = DVector::from_fn(sys.m(), |_, _| rng.random_range(-2.0..2.0));
            x = sys.step(&x, &u);
            u_prev = Some(u);
        }
    }
    (w, x)
}

fn lemma_grid() -> Outcome {
    let sys = LinearSystem::new(
        DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]),
        DMatrix::from_row_slice(2, 1, &[0.005, 0.1]),
        DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]),
        0.1,
    )
    .unwrap();
    let d_max = 0.2;
    let cfg = SsrConfig { s: 1, l: 1, d_max };
    let recon = SecureReconstructor::new(sys.clone(), cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut misses, mut members, mut true_missing) = (0usize, 0usize, 0usize);
    for trial in 0..4 {
        let x0 = DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
        let attacked = trial % 3;
        let u = DVector::from_element(1, rng.random_range(-1.0..1.0));
        let x1 = sys.step(&x0, &u);
        let noisy = |x: &DVector<f64>, rng: &mut ChaCha8Rng| {
            let mut y = sys.output(x) + sample_noise(d_max, 3, rng);
            y[attacked] += 1.5;
            y
        };
        let mut w = DataWindow::new(1);
        w.observe(None, noisy(&x0, &mut rng)).unwrap();
        w.observe(Some(&u), noisy(&x1, &mut rng)).unwrap();
        let st = recon.stacked(&w).unwrap();
        let balls = recon.plausible_balls(&w).unwrap();
        if !recon.membership(&w, &x0).unwrap() {
            true_missing += 1;
        }
        for i in 0..=400 {
            for j in 0..=400 {
                let x = DVector::from_vec(vec![-2.0 + 0.01 * i as f64, -2.0 + 0.01 * j as f64]);
                for gamma in recon.combinations() {
                    if !recon.member_of(&st, gamma, &x) {
                        continue;
                    }
                    members += 1;
                    let covered = balls.iter().any(|b| {
                        b.gamma_set == gamma && (&x - &b.initial_center).amax() <= b.initial_radius + 1e-9
                    });
                    misses += usize::from(!covered);
                }
            }
        }
    }
    Outcome {
        passed: misses == 0 && true_missing == 0 && members > 0,
        detail: format!("{members} plausible grid points, {misses} outside their ball, true state missed {true_missing} times"),
    }
}

fn robust_sufficiency() -> Outcome {
    let sys = drone_model(0.3, 0.05).unwrap();
    let spec = SafetySpec::axis_box(4, &[(0, [-6.0, 6.0]), (2, [-6.0, 6.0])], 0.2).unwrap();
    let recon = SecureReconstructor::new(sys.clone(), SsrConfig { s: 1, l: 3, d_max: 0.05 }).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut pairs, mut violations, mut worst) = (0usize, 0usize, f64::INFINITY);
    let hmat = spec.h();
    while pairs < 200 {
        // A ball from a real noisy window so its radius follows the reconstruction bound.
        let x0 = DVector::from_vec(vec![
            rng.random_range(-5.5..5.5),
            rng.random_range(-2.0..2.0),
            rng.random_range(-5.5..5.5),
            rng.random_range(-2.0..2.0),
        ]);
        let mut w = DataWindow::new(3);
        let mut x = x0.clone();
        let mut u_prev = None;
        for k in 0..4 {
            w.observe(u_prev.as_ref(), sys.output(&x) + sample_noise(0.05, 8, &mut rng)).unwrap();
            if k < 3 {
                let u = DVector::from_fn(2, |_, _| rng.random_range(-2.0..2.0));
                x = sys.step(&x, &u);
                u_prev = Some(u);
            }
        }
        let balls = recon.plausible_balls(&w).unwrap();
        let Some(ball) = balls.get(rng.random_range(0..balls.len().max(1))) else { continue };
        let (g, h) = robust_constraints(&sys, &spec, std::slice::from_ref(ball), DeltaBound::MatrixNorm);
        let target = DVector::from_fn(2, |_, _| rng.random_range(-3.0..3.0));
        let qp = solve_projection_qp(&target, &g, &h).unwrap();
        if qp.status != QpStatus::Optimal {
            continue;
        }
        let u = qp.u;
        if (&g * &u - &h).min() < -1e-9 {
            continue;
        }
        pairs += 1;
        for k in 0..1000 {
            let offset = DVector::from_fn(4, |_, _| {
                if k < 16 {
                    if rng.random_bool(0.5) { 1.0 } else { -1.0 }
                } else {
                    rng.random_range(-1.0..=1.0)
                }
            });
            let xs = &ball.center + offset * ball.radius;
            let lhs = hmat * sys.step(&xs, &u) + spec.q();
            let rhs = (hmat * &xs + spec.q()) * (1.0 - spec.gamma());
            let slack = (lhs - rhs).min();
            worst = worst.min(slack);
            violations += usize::from(slack < -1e-9);
        }
    }
    Outcome { passed: violations == 0, detail: format!("{pairs} pairs, {violations} violations, worst slack {worst:.3e}") }
}

fn solver_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut lp_worst, mut lp_done) = (0.0f64, 0usize);
    while lp_done < 500 {
        let n = rng.random_range(1..=4);
        let k = rng.random_range(n..=10);
        let o = DMatrix::from_fn(k, n, |_, _| rng.random_range(-2.0..2.0));
        let y = DVector::from_fn(k, |_, _| rng.random_range(-5.0..5.0));
        let Some(oracle) = inf_norm_fit_by_vertices(&o, &y) else { continue };
        let err = match solve_inf_norm_fit(&o, &y) {
            Ok(fit) => (fit.d_lower - oracle).abs(),
            Err(_) => f64::INFINITY,
        };
        lp_worst = lp_worst.max(err);
        lp_done += 1;
    }
    let (mut qp_worst, mut infeasible) = (0.0f64, 0usize);
    for _ in 0..500 {
        let c = rng.random_range(0..=10);
        let g = DMatrix::from_fn(c, 2, |_, _| rng.random_range(-1.0..1.0));
        let h = DVector::from_fn(c, |_, _| rng.random_range(-1.0..0.5));
        let u_nom = DVector::from_fn(2, |_, _| rng.random_range(-3.0..3.0));
        let err = match (solve_projection_qp(&u_nom, &g, &h), projection_by_enumeration(&u_nom, &g, &h)) {
            (Ok(r), Some(u)) if r.status == QpStatus::Optimal => (r.u - u).amax(),
            (Ok(r), None) if r.status == QpStatus::Infeasible => {
                infeasible += 1;
                0.0
            }
            _ => f64::INFINITY,
        };
        qp_worst = qp_worst.max(err);
    }
    Outcome {
        passed: lp_worst <= 1e-7 && qp_worst <= 1e-7,
        detail: format!(
            "LP worst objective error {lp_worst:.2e} over 500, QP worst solution error {qp_worst:.2e} over 500 ({infeasible} infeasible)"
        ),
    }
}

fn theorem_runs() -> Outcome {
    let model = drone_model(0.3, 0.05).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut violations, mut fallback_mid_run, mut worst) = (0usize, 0usize, f64::INFINITY);
    for _ in 0..100 {
        let half = rng.random_range(2.0..8.0);
        let spec = SafetySpec::axis_box(4, &[(0, [-half, half]), (2, [-half, half])], rng.random_range(0.05..0.5)).unwrap();
        let d_max = rng.random_range(0.0..0.1);
        let mut filter = SecureFilter::new(model.clone(), spec.clone(), SsrConfig { s: 1, l: 3, d_max }).unwrap();
        // Waypoints up to 1.5x outside the box so the filter has to intervene.
        let wps: Vec<[f64; 2]> =
            (0..4).map(|_| [rng.random_range(-1.5 * half..1.5 * half), rng.random_range(-1.5 * half..1.5 * half)]).collect();
        let mut plan = WaypointPlan::new(wps, 0.3, rng.random_range(0.5..3.0), rng.random_range(1.0..3.0)).unwrap();
        let mut x = DVector::from_vec(vec![
            rng.random_range(-0.9 * half..0.9 * half),
            0.0,
            rng.random_range(-0.9 * half..0.9 * half),
            0.0,
        ]);
        for t in 0..200 {
            let y = model.output(&x) + sample_noise(d_max, 8, &mut rng);
            filter.observe(y.clone()).unwrap();
            let est = (y.rows(0, 4) + y.rows(4, 4)) * 0.5;
            let cmd = nominal_controller(&plan, &est);
            plan = cmd.plan;
            let step = filter.filter(&cmd.u_nom).unwrap();
            if t >= 3 && step.outcome.mode == FilterMode::Fallback {
                fallback_mid_run += 1;
            }
            let h = spec.min_barrier(&x);
            worst = worst.min(h);
            violations += usize::from(h < -1e-9);
            x = model.step(&x, &step.outcome.u_safe);
        }
    }
    Outcome {
        passed: violations == 0,
        detail: format!("{violations} violations, worst min_h {worst:.4}, fallback steps after warm-up {fallback_mid_run}"),
    }
}

fn performance() -> Outcome {
    let cfg = load_config(scenario("sitl.cfg")).unwrap();
    let trace = run_scenario(&cfg).unwrap();
    let mut times: Vec<u64> =
        trace.iter().filter(|r| r.phase == Phase::Three && r.ball_count > 0).map(|r| r.solve_time_us).collect();
    times.sort_unstable();
    let pct = |q: f64| times[((times.len() - 1) as f64 * q).round() as usize] as f64 / 1000.0;
    let (median, p99) = (pct(0.5), pct(0.99));
    Outcome {
        passed: median < 10.0 && p99 < 50.0,
        detail: format!("{} secure steps, median {median:.3} ms, p99 {p99:.3} ms", times.len()),
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: Vec<Criterion> = vec![
        ("1 constant attack: phase 2 violates, phase 3 safe", || attack_reproduction("sitl.cfg")),
        ("2 scale attack: phase 2 violates, phase 3 safe", || attack_reproduction("sitl_scale.cfg")),
        ("3 noise and shift attacks: safe in every phase", || no_violation_anywhere(&["sitl_noise.cfg", "sitl_shift.cfg"])),
        ("4 reconstruction exact on noise-free windows", ssr_exactness),
        ("5 plausible states lie in their balls", lemma_grid),
        ("6 robust constraint implies pointwise CBF condition", robust_sufficiency),
        ("7 solvers agree with brute-force oracles", solver_oracles),
        ("8 attack-free closed loop never leaves the safe set", theorem_runs),
        ("9 secure filter step within real-time budget", performance),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let started = Instant::now();
        let out = f();
        println!(
            "{} criterion {name} [{}] ({:.1}s)",
            if out.passed { "PASS" } else { "FAIL" },
            out.detail,
            started.elapsed().as_secs_f64()
        );
        failed += usize::from(!out.passed);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        println!("all acceptance criteria passed");
        ExitCode::SUCCESS
    }
}
