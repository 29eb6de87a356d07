//! Brute-force reference implementations used to cross-check the fast
//! paths, plus a runner behind `securefilter selftest`.
//!
//! Everything here trades speed for obviousness: matrix exponentials by
//! truncated Taylor series, LPs by enumerating vertices, QPs by enumerating
//! active sets.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{minimum_modulus, zoh_discretize};
use crate::optim::{solve_inf_norm_fit, solve_projection_qp, QpStatus};

/// `e^M` by scaling and squaring with a 30-term Taylor series.
pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let norm = m.iter().fold(0.0f64, |a, v| a.max(v.abs())) * n as f64;
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scaled = m / 2f64.powi(squarings as i32);
    let mut term = DMatrix::identity(n, n);
    let mut sum = term.clone();
    for k in 1..30 {
        term = &term * &scaled / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Continuous reduced-order drone model: per axis `ẋ = v`, `v̇ = (u − v)/τ`.
pub fn rom_continuous(tau_s: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut a = DMatrix::zeros(4, 4);
    let mut b = DMatrix::zeros(4, 2);
    for axis in 0..2 {
        let i = 2 * axis;
        a[(i, i + 1)] = 1.0;
        a[(i + 1, i + 1)] = -1.0 / tau_s;
        b[(i + 1, axis)] = 1.0 / tau_s;
    }
    (a, b)
}

/// Zero-order-hold discretization from the exponential of the augmented
/// matrix `[[A, B], [0, 0]]·Ts`.
pub fn zoh_by_expm(a: &DMatrix<f64>, b: &DMatrix<f64>, ts: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let (n, m) = (a.nrows(), b.ncols());
    let mut aug = DMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(a);
    aug.view_mut((0, n), (n, m)).copy_from(b);
    let e = expm(&(aug * ts));
    (e.view((0, 0), (n, n)).into_owned(), e.view((0, n), (n, m)).into_owned())
}

/// `B_d = ∫₀^Ts e^{As} ds · B` by the trapezoidal rule with step `h`.
pub fn zoh_input_by_quadrature(a: &DMatrix<f64>, b: &DMatrix<f64>, ts: f64, h: f64) -> DMatrix<f64> {
    let steps = (ts / h).round().max(1.0) as usize;
    let h = ts / steps as f64;
    let n = a.nrows();
    let step = expm(&(a * h));
    let mut e = DMatrix::identity(n, n);
    let mut acc = &e * 0.5;
    for k in 1..=steps {
        e = &e * &step;
        acc += if k == steps { &e * 0.5 } else { e.clone() };
    }
    acc * h * b
}

/// `min_x ‖Ox − Y‖∞` by enumerating every basic solution of the epigraph
/// constraints `±(Ox − Y) ≤ t`. Returns `None` when no vertex exists, which
/// happens exactly when `O` is rank deficient.
pub fn inf_norm_fit_by_vertices(o: &DMatrix<f64>, y: &DVector<f64>) -> Option<f64> {
    let (k, n) = o.shape();
    // Rows of [O, -1] x̃ ≤ Y and [-O, -1] x̃ ≤ -Y in the variables x̃ = (x, t).
    let mut rows = DMatrix::zeros(2 * k, n + 1);
    let mut rhs = DVector::zeros(2 * k);
    for i in 0..k {
        for j in 0..n {
            rows[(i, j)] = o[(i, j)];
            rows[(k + i, j)] = -o[(i, j)];
        }
        rows[(i, n)] = -1.0;
        rows[(k + i, n)] = -1.0;
        rhs[i] = y[i];
        rhs[k + i] = -y[i];
    }
    let scale = 1.0 + y.amax();
    let mut best: Option<f64> = None;
    for subset in combinations(2 * k, n + 1) {
        let sub = DMatrix::from_fn(n + 1, n + 1, |r, c| rows[(subset[r], c)]);
        let sub_rhs = DVector::from_fn(n + 1, |r, _| rhs[subset[r]]);
        let Some(sol) = sub.clone().lu().solve(&sub_rhs) else { continue };
        if sol.iter().any(|v| !v.is_finite()) || (&sub * &sol - &sub_rhs).amax() > 1e-9 * scale {
            continue;
        }
        if (&rows * &sol - &rhs).max() > 1e-9 * scale {
            continue;
        }
        let t = sol[n];
        if best.is_none_or(|b| t < b) {
            best = Some(t);
        }
    }
    best
}

/// Projection of `u_nom` onto `{u : Gu ≥ h}` by trying every active set:
/// each subset with independent rows gives the projection onto its affine
/// hull, and the closest candidate that is feasible is the answer. `None`
/// when the set is empty.
pub fn projection_by_enumeration(u_nom: &DVector<f64>, g: &DMatrix<f64>, h: &DVector<f64>) -> Option<DVector<f64>> {
    let c = h.len();
    assert!(c < 24, "exhaustive enumeration over {c} constraints");
    let feasible = |u: &DVector<f64>| (0..c).all(|j| (g.row(j) * u)[0] - h[j] >= -1e-9 * (1.0 + h[j].abs()));
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 0u32..(1 << c) {
        let idx: Vec<usize> = (0..c).filter(|j| mask & (1 << j) != 0).collect();
        let cand = if idx.is_empty() {
            u_nom.clone()
        } else {
            let gs = DMatrix::from_fn(idx.len(), g.ncols(), |r, col| g[(idx[r], col)]);
            let hs = DVector::from_fn(idx.len(), |r, _| h[idx[r]]);
            let gram = &gs * gs.transpose();
            let Some(ch) = gram.cholesky() else { continue };
            let lam = ch.solve(&(hs - &gs * u_nom));
            u_nom + gs.transpose() * lam
        };
        if !feasible(&cand) {
            continue;
        }
        let d = (&cand - u_nom).norm();
        if best.as_ref().is_none_or(|(b, _)| d < *b) {
            best = Some((d, cand));
        }
    }
    best.map(|(_, u)| u)
}

/// Upper estimate of `min_{‖a‖∞=1} ‖Oa‖∞` from `samples` random points on
/// the cube boundary, spread evenly over the `2n` faces.
pub fn minimum_modulus_by_sampling<R: Rng + ?Sized>(o: &DMatrix<f64>, samples: usize, rng: &mut R) -> f64 {
    let n = o.ncols();
    let mut best = f64::INFINITY;
    let mut a = DVector::zeros(n);
    for k in 0..samples {
        let face = k % (2 * n);
        for j in 0..n {
            a[j] = rng.random_range(-1.0..=1.0);
        }
        a[face / 2] = if face.is_multiple_of(2) { 1.0 } else { -1.0 };
        best = best.min((o * &a).amax());
    }
    best
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else { return out };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, worst: f64, tol: f64) -> Check {
    Check { name, passed: worst <= tol, detail: format!("worst error {worst:.3e} (tolerance {tol:.0e})") }
}

pub fn random_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_vector<R: Rng + ?Sized>(len: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.random_range(-1.0..1.0))
}

/// Runs the oracle comparisons on `trials` random instances each.
pub fn run_selftest(seed: u64, trials: usize) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let mut worst = 0.0f64;
    for (tau, ts) in [(0.3, 0.05), (0.1, 0.02), (1.0, 0.2)] {
        let sys = zoh_discretize(tau, ts).expect("valid parameters");
        let (ac, bc) = rom_continuous(tau);
        let (ad, bd) = zoh_by_expm(&ac, &bc, ts);
        let bq = zoh_input_by_quadrature(&ac, &bc, ts, 1e-6);
        worst = worst.max((sys.a() - ad).amax()).max((sys.b() - &bd).amax()).max((sys.b() - bq).amax());
    }
    out.push(check("zoh matches matrix exponential and quadrature", worst, 1e-10));

    let mut worst = 0.0f64;
    for _ in 0..trials {
        let n = rng.random_range(1..=3);
        let k = rng.random_range(n..=6);
        let o = random_matrix(k, n, &mut rng);
        let y = random_vector(k, &mut rng);
        let Some(oracle) = inf_norm_fit_by_vertices(&o, &y) else { continue };
        match solve_inf_norm_fit(&o, &y) {
            Ok(fit) => worst = worst.max((fit.d_lower - oracle).abs()),
            Err(_) => worst = f64::INFINITY,
        }
    }
    out.push(check("inf-norm fit matches vertex enumeration", worst, 1e-7));

    let mut worst = 0.0f64;
    for _ in 0..trials {
        let c = rng.random_range(0..=6);
        let g = random_matrix(c, 2, &mut rng);
        let h = random_vector(c, &mut rng);
        let u_nom = random_vector(2, &mut rng) * 3.0;
        let oracle = projection_by_enumeration(&u_nom, &g, &h);
        let err = match (solve_projection_qp(&u_nom, &g, &h), oracle) {
            (Ok(r), Some(u)) if r.status == QpStatus::Optimal => (r.u - u).amax(),
            (Ok(r), None) if r.status == QpStatus::Infeasible => 0.0,
            _ => f64::INFINITY,
        };
        worst = worst.max(err);
    }
    out.push(check("projection QP matches active-set enumeration", worst, 1e-7));

    let mut worst = 0.0f64;
    for _ in 0..trials.min(20) {
        let o = random_matrix(6, 2, &mut rng);
        let exact = minimum_modulus(&o).map(|m| m.value).unwrap_or(f64::NAN);
        let sampled = minimum_modulus_by_sampling(&o, 100_000, &mut rng);
        let err = if exact <= sampled + 1e-9 { sampled - exact } else { f64::INFINITY };
        worst = worst.max(if err.is_nan() { f64::INFINITY } else { err });
    }
    out.push(check("minimum modulus matches boundary sampling", worst, 1e-3));

    out
}
