//! System, window and safety-set types, plus the model-level computations the
//! reconstructor needs: stacked observability/impulse matrices, the
//! s-sparse observability test and the ∞-norm minimum modulus.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, mismatch, Error, Result};
use crate::optim::simplex::{solve_standard_form, SimplexStatus};
use crate::ssr::enumerate_combinations;

/// Singular values below `RANK_RTOL · σ_max` count as zero.
pub const RANK_RTOL: f64 = 1e-9;

/// Discrete-time LTI model `x⁺ = Ax + Bu`, `y = Cx`, one output row per sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    ts: f64,
}

impl LinearSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, ts: f64) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(mismatch(format!("A must be square and nonempty, got {}x{}", a.nrows(), a.ncols())));
        }
        if b.nrows() != n || b.ncols() == 0 {
            return Err(mismatch(format!("B must be {n}xm with m ≥ 1, got {}x{}", b.nrows(), b.ncols())));
        }
        if c.ncols() != n || c.nrows() == 0 {
            return Err(mismatch(format!("C must be px{n} with p ≥ 1, got {}x{}", c.nrows(), c.ncols())));
        }
        if !(ts > 0.0 && ts.is_finite()) {
            return Err(invalid(format!("sampling time must be positive, got {ts}")));
        }
        Ok(Self { a, b, c, ts })
    }

    /// Same dynamics with a different output map.
    pub fn with_output(&self, c: DMatrix<f64>) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), c, self.ts)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    pub fn ts(&self) -> f64 {
        self.ts
    }
    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    pub fn m(&self) -> usize {
        self.b.ncols()
    }
    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u
    }

    pub fn output(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.c * x
    }
}

/// Matrix ∞-norm (maximum absolute row sum).
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

pub fn matrix_power(a: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let mut out = DMatrix::identity(a.nrows(), a.ncols());
    for _ in 0..k {
        out = &out * a;
    }
    out
}

/// Rank with the relative singular-value cutoff [`RANK_RTOL`].
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_RTOL * smax).count()
}

/// Exact zero-order-hold discretization of the planar reduced-order drone
/// model: per axis a position integrating a velocity that tracks the velocity
/// command as a first-order lag with time constant `tau_s`.
///
/// State order is `(x₁, v₁, x₂, v₂)`, inputs `(u₁, u₂)`. The output map is
/// left as the 4×4 identity; use [`LinearSystem::with_output`] (typically
/// with [`duplicated_measurement_model`]) to attach the sensor layout.
pub fn zoh_discretize(tau_s: f64, ts: f64) -> Result<LinearSystem> {
    if !(tau_s > 0.0 && tau_s.is_finite()) {
        return Err(invalid(format!("tau_s must be positive, got {tau_s}")));
    }
    if !(ts > 0.0 && ts.is_finite()) {
        return Err(invalid(format!("Ts must be positive, got {ts}")));
    }
    let decay = (-ts / tau_s).exp();
    let gain = -(-ts / tau_s).exp_m1(); // 1 − e^{−Ts/τ}
    let mut a = DMatrix::zeros(4, 4);
    let mut b = DMatrix::zeros(4, 2);
    for axis in 0..2 {
        let (p, v) = (2 * axis, 2 * axis + 1);
        a[(p, p)] = 1.0;
        a[(p, v)] = tau_s * gain;
        a[(v, v)] = decay;
        b[(p, axis)] = ts - tau_s * gain;
        b[(v, axis)] = gain;
    }
    LinearSystem::new(a, b, DMatrix::identity(4, 4), ts)
}

/// Two stacked copies of the full planar state: rows 1–4 and 5–8 are `I₄`.
pub fn duplicated_measurement_model() -> DMatrix<f64> {
    let mut c = DMatrix::zeros(8, 4);
    for i in 0..4 {
        c[(i, i)] = 1.0;
        c[(i + 4, i)] = 1.0;
    }
    c
}

/// Reduced-order drone model with the duplicated 8-sensor output map.
pub fn drone_model(tau_s: f64, ts: f64) -> Result<LinearSystem> {
    zoh_discretize(tau_s, ts)?.with_output(duplicated_measurement_model())
}

/// Rolling input/output history: `l` inputs `u(t−l)…u(t−1)` and `l+1`
/// outputs `y(t−l)…y(t)` once full.
#[derive(Debug, Clone, PartialEq)]
pub struct DataWindow {
    l: usize,
    inputs: VecDeque<DVector<f64>>,
    outputs: VecDeque<DVector<f64>>,
    t: Option<usize>,
}

impl DataWindow {
    pub fn new(l: usize) -> Self {
        Self { l, inputs: VecDeque::with_capacity(l + 1), outputs: VecDeque::with_capacity(l + 2), t: None }
    }

    /// Builds a full window directly; `t` is the time index of the last output.
    pub fn from_parts(inputs: Vec<DVector<f64>>, outputs: Vec<DVector<f64>>, t: usize) -> Result<Self> {
        if outputs.is_empty() || inputs.len() + 1 != outputs.len() {
            return Err(mismatch(format!(
                "window needs l inputs and l+1 outputs, got {} and {}",
                inputs.len(),
                outputs.len()
            )));
        }
        if t + 1 < outputs.len() {
            return Err(invalid(format!("time index {t} is earlier than the window length")));
        }
        let l = inputs.len();
        Ok(Self { l, inputs: inputs.into(), outputs: outputs.into(), t: Some(t) })
    }

    /// Appends `y(t)` together with the input `u(t−1)` that produced it and
    /// evicts the oldest pair once the window is full. The first observation
    /// after construction or [`clear`](Self::clear) takes no input.
    pub fn observe(&mut self, u_prev: Option<&DVector<f64>>, y: DVector<f64>) -> Result<()> {
        match (self.outputs.is_empty(), u_prev) {
            (true, _) => {}
            (false, Some(u)) => self.inputs.push_back(u.clone()),
            (false, None) => return Err(invalid("input u(t-1) required after the first observation")),
        }
        self.outputs.push_back(y);
        while self.outputs.len() > self.l + 1 {
            self.outputs.pop_front();
            self.inputs.pop_front();
        }
        self.t = Some(self.t.map_or(0, |t| t + 1));
        Ok(())
    }

    pub fn clear(&mut self) {
        self.inputs.clear();
        self.outputs.clear();
        self.t = None;
    }

    pub fn l(&self) -> usize {
        self.l
    }
    pub fn is_full(&self) -> bool {
        self.outputs.len() == self.l + 1
    }
    pub fn inputs(&self) -> &VecDeque<DVector<f64>> {
        &self.inputs
    }
    pub fn outputs(&self) -> &VecDeque<DVector<f64>> {
        &self.outputs
    }
    /// Time index of the latest output, `None` while empty.
    pub fn t(&self) -> Option<usize> {
        self.t
    }
}

/// Per-sensor stacks over a window of depth `l + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedSensorData {
    /// `O_i`, `(l+1)×n`: row `r` is `C_i A^r`.
    pub o: Vec<DMatrix<f64>>,
    /// `F_i`, `(l+1)×m(l+1)`: block `(r, k)` is `C_i A^{r−1−k} B` for `k < r`.
    pub f: Vec<DMatrix<f64>>,
    /// `Y_i = Ỹ_i − F_i U`.
    pub y: Vec<DVector<f64>>,
    /// Stacked inputs `U = [u(t−l); …; u(t−1); 0]`.
    pub u: DVector<f64>,
}

/// Observability and impulse-response stacks for every sensor; window independent.
pub(crate) fn sensor_stacks(sys: &LinearSystem, l: usize) -> (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>) {
    let (n, m, p) = (sys.n(), sys.m(), sys.p());
    let powers: Vec<DMatrix<f64>> = (0..=l).map(|r| matrix_power(sys.a(), r)).collect();
    let markov: Vec<DMatrix<f64>> = powers.iter().map(|ap| ap * sys.b()).collect();
    let mut os = Vec::with_capacity(p);
    let mut fs = Vec::with_capacity(p);
    for i in 0..p {
        let ci = sys.c().row(i);
        let mut o = DMatrix::zeros(l + 1, n);
        let mut f = DMatrix::zeros(l + 1, m * (l + 1));
        for r in 0..=l {
            o.row_mut(r).copy_from(&(ci * &powers[r]));
            for k in 0..r {
                let blk = ci * &markov[r - 1 - k];
                f.view_mut((r, k * m), (1, m)).copy_from(&blk);
            }
        }
        os.push(o);
        fs.push(f);
    }
    (os, fs)
}

pub(crate) fn stacked_inputs(w: &DataWindow, m: usize) -> DVector<f64> {
    let l = w.l();
    let mut u = DVector::zeros(m * (l + 1));
    for (k, uk) in w.inputs().iter().enumerate() {
        u.rows_mut(k * m, m).copy_from(uk);
    }
    u
}

pub(crate) fn check_window(sys: &LinearSystem, w: &DataWindow) -> Result<()> {
    if !w.is_full() {
        return Err(invalid(format!("window holds {} of {} outputs", w.outputs().len(), w.l() + 1)));
    }
    if w.inputs().iter().any(|u| u.len() != sys.m()) || w.outputs().iter().any(|y| y.len() != sys.p()) {
        return Err(mismatch(format!("window vectors must have m={} and p={} entries", sys.m(), sys.p())));
    }
    Ok(())
}

pub fn build_stacked(sys: &LinearSystem, w: &DataWindow) -> Result<StackedSensorData> {
    check_window(sys, w)?;
    let l = w.l();
    let (o, f) = sensor_stacks(sys, l);
    let u = stacked_inputs(w, sys.m());
    let y = (0..sys.p())
        .map(|i| {
            let raw = DVector::from_iterator(l + 1, w.outputs().iter().map(|y| y[i]));
            raw - &f[i] * &u
        })
        .collect();
    Ok(StackedSensorData { o, f, y, u })
}

/// Stacks `O_i` for `i ∈ gamma` on top of each other.
pub fn stack_rows(blocks: &[DMatrix<f64>], gamma: &[usize]) -> DMatrix<f64> {
    let rows: usize = gamma.iter().map(|&i| blocks[i].nrows()).sum();
    let cols = blocks[gamma[0]].ncols();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r = 0;
    for &i in gamma {
        let b = &blocks[i];
        out.view_mut((r, 0), b.shape()).copy_from(b);
        r += b.nrows();
    }
    out
}

/// True iff the system stays observable after deleting any `s` sensors.
/// Each `(p − s)`-subset is tested at observability depth `n`.
pub fn check_sparse_observability(sys: &LinearSystem, s: usize) -> Result<bool> {
    let p = sys.p();
    if s >= p {
        return Err(invalid(format!("s = {s} must be smaller than p = {p}")));
    }
    let n = sys.n();
    let (os, _) = sensor_stacks(sys, n - 1);
    Ok(enumerate_combinations(p, s).iter().all(|gamma| numerical_rank(&stack_rows(&os, gamma)) == n))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimumModulus {
    pub value: f64,
    /// Set when `O` is column-rank deficient; `value` is then 0.
    pub degenerate: bool,
}

/// `m(O) = min_{‖a‖∞ = 1} ‖Oa‖∞`.
///
/// The unit sphere of the ∞-norm is the union of the `2n` faces
/// `{a_j = ±1, ‖a‖∞ ≤ 1}`; on each face the problem is convex and is
/// solved as an LP. Faces `+j` and `−j` mirror each other (`‖O(−a)‖ = ‖Oa‖`)
/// but both are solved.
pub fn minimum_modulus(o: &DMatrix<f64>) -> Result<MinimumModulus> {
    let (k, n) = o.shape();
    if k == 0 || n == 0 {
        return Err(invalid("minimum modulus of an empty matrix"));
    }
    if numerical_rank(o) < n {
        return Ok(MinimumModulus { value: 0.0, degenerate: true });
    }
    let mut best = f64::INFINITY;
    for j in 0..n {
        for sigma in [1.0, -1.0] {
            best = best.min(face_minimum(o, j, sigma)?);
        }
    }
    Ok(MinimumModulus { value: best, degenerate: false })
}

/// `min ‖Oa‖∞` over `a_j = sigma`, `|a_i| ≤ 1`, with `a_i = b_i − 1`, `b_i ∈ [0, 2]`.
fn face_minimum(o: &DMatrix<f64>, j: usize, sigma: f64) -> Result<f64> {
    let (k, n) = o.shape();
    let free: Vec<usize> = (0..n).filter(|&i| i != j).collect();
    let nf = free.len();
    // offset w = sigma·O_j − Σ_{i free} O_i
    let mut w = o.column(j) * sigma;
    for &i in &free {
        w -= o.column(i);
    }
    // columns: b (nf) | t | s1 (k) | s2 (k) | s3 (nf)
    let cols = nf + 1 + 2 * k + nf;
    let rows = 2 * k + nf;
    let mut a = DMatrix::zeros(rows, cols);
    let mut b = DVector::zeros(rows);
    for r in 0..k {
        for (col, &i) in free.iter().enumerate() {
            a[(r, col)] = o[(r, i)];
            a[(k + r, col)] = -o[(r, i)];
        }
        a[(r, nf)] = -1.0;
        a[(k + r, nf)] = -1.0;
        a[(r, nf + 1 + r)] = 1.0;
        a[(k + r, nf + 1 + k + r)] = 1.0;
        b[r] = -w[r];
        b[k + r] = w[r];
    }
    for col in 0..nf {
        a[(2 * k + col, col)] = 1.0;
        a[(2 * k + col, nf + 1 + 2 * k + col)] = 1.0;
        b[2 * k + col] = 2.0;
    }
    let mut c = DVector::zeros(cols);
    c[nf] = 1.0;
    let sol = solve_standard_form(&a, &b, &c)?;
    match sol.status {
        SimplexStatus::Optimal => {
            // Re-evaluate at the returned point so the value is a true ‖Oa‖∞.
            let mut av = DVector::zeros(n);
            av[j] = sigma;
            for (col, &i) in free.iter().enumerate() {
                av[i] = (sol.z[col] - 1.0).clamp(-1.0, 1.0);
            }
            Ok((o * av).amax())
        }
        other => Err(Error::Numerical(format!("minimum-modulus face LP returned {other:?}"))),
    }
}

/// Polytopic safe set `{x : Hx + q ≥ 0}` with discrete CBF rate `gamma`.
#[derive(Debug, Clone, PartialEq)]
pub struct SafetySpec {
    h: DMatrix<f64>,
    q: DVector<f64>,
    gamma: f64,
}

impl SafetySpec {
    pub fn new(h: DMatrix<f64>, q: DVector<f64>, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(invalid(format!("gamma must lie in (0, 1), got {gamma}")));
        }
        if h.nrows() != q.len() || h.nrows() == 0 {
            return Err(mismatch(format!("H has {} rows but q has {}", h.nrows(), q.len())));
        }
        if !polytope_nonempty(&h, &q)? {
            return Err(invalid("safe set {x : Hx + q ≥ 0} is empty"));
        }
        Ok(Self { h, q, gamma })
    }

    /// Axis-aligned box on selected state coordinates: for each
    /// `(index, [lo, hi])` the rows `x_i − lo ≥ 0` and `hi − x_i ≥ 0`.
    pub fn axis_box(n: usize, bounds: &[(usize, [f64; 2])], gamma: f64) -> Result<Self> {
        let mut h = DMatrix::zeros(2 * bounds.len(), n);
        let mut q = DVector::zeros(2 * bounds.len());
        for (r, &(i, [lo, hi])) in bounds.iter().enumerate() {
            if i >= n {
                return Err(invalid(format!("box axis {i} out of range for n = {n}")));
            }
            if !(lo < hi) {
                return Err(invalid(format!("box bounds [{lo}, {hi}] on axis {i} are empty")));
            }
            h[(2 * r, i)] = 1.0;
            q[2 * r] = -lo;
            h[(2 * r + 1, i)] = -1.0;
            q[2 * r + 1] = hi;
        }
        Self::new(h, q, gamma)
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }
    pub fn q(&self) -> &DVector<f64> {
        &self.q
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Barrier values `Hx + q`.
    pub fn barrier(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.h * x + &self.q
    }

    /// `min_j (Hx + q)_j`; nonnegative iff `x` is safe.
    pub fn min_barrier(&self, x: &DVector<f64>) -> f64 {
        self.barrier(x).min()
    }
}

/// Feasibility LP for `Hx + q ≥ 0` with `x = x⁺ − x⁻` and surplus `s`.
fn polytope_nonempty(h: &DMatrix<f64>, q: &DVector<f64>) -> Result<bool> {
    let (c, n) = h.shape();
    let mut a = DMatrix::zeros(c, 2 * n + c);
    for r in 0..c {
        for i in 0..n {
            a[(r, i)] = h[(r, i)];
            a[(r, n + i)] = -h[(r, i)];
        }
        a[(r, 2 * n + r)] = -1.0;
    }
    let sol = solve_standard_form(&a, &(-q), &DVector::zeros(2 * n + c))?;
    Ok(sol.status == SimplexStatus::Optimal)
}
