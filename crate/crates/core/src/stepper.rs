//! Fully implicit and semi-implicit time stepping with the corrected
//! convolution-quadrature Caputo operator
//!
//! `D u^n = tau^-alpha [ sum_{j=0}^n omega_{n-j} (u^j - u^0) + sum_{j=1}^m w_{n,j} (u^j - u^0) ]`.

use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::corrections::{
    caputo_power_factor, starting_weights_from_omega, CorrectionConfig, StartingWeightTable,
};
use crate::cq_weights::{omega_weights, GeneratingFunction};
use crate::error::{invalid, Error, Result};
use crate::spatial_ops::SpatialOperator;

/// Pointwise reaction term `f(u)`.
#[derive(Clone)]
pub enum Reaction {
    Zero,
    /// `f(u) = c u`
    Linear(f64),
    /// `f(u) = u (1 - u^2)`
    AllenCahn,
    Custom {
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        df: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        vanishes_at_zero: bool,
    },
}

impl fmt::Debug for Reaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reaction::Zero => write!(f, "Zero"),
            Reaction::Linear(c) => write!(f, "Linear({c})"),
            Reaction::AllenCahn => write!(f, "AllenCahn"),
            Reaction::Custom { .. } => write!(f, "Custom"),
        }
    }
}

impl Reaction {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Reaction::Zero => 0.0,
            Reaction::Linear(c) => c * u,
            Reaction::AllenCahn => u * (1.0 - u * u),
            Reaction::Custom { f, .. } => f(u),
        }
    }

    pub fn derivative(&self, u: f64) -> f64 {
        match self {
            Reaction::Zero => 0.0,
            Reaction::Linear(c) => *c,
            Reaction::AllenCahn => 1.0 - 3.0 * u * u,
            Reaction::Custom { df, .. } => df(u),
        }
    }

    /// Slope when the reaction is linear.
    pub fn linear_slope(&self) -> Option<f64> {
        match self {
            Reaction::Zero => Some(0.0),
            Reaction::Linear(c) => Some(*c),
            _ => None,
        }
    }

    pub fn vanishes_at_zero(&self) -> bool {
        match self {
            Reaction::Custom { vanishes_at_zero, .. } => *vanishes_at_zero,
            _ => true,
        }
    }
}

/// `D^alpha u = L u + f(u)` on `(0, T]` with `u(0) = u0`.
#[derive(Clone)]
pub struct ProblemSpec {
    pub op: Arc<dyn SpatialOperator>,
    pub reaction: Reaction,
    pub u0: Vec<f64>,
    pub t_final: f64,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("dof", &self.op.dof())
            .field("reaction", &self.reaction)
            .field("t_final", &self.t_final)
            .finish()
    }
}

impl ProblemSpec {
    pub fn new(
        op: Arc<dyn SpatialOperator>,
        reaction: Reaction,
        u0: Vec<f64>,
        t_final: f64,
    ) -> Result<Self> {
        if u0.len() != op.dof() {
            return invalid(format!(
                "initial state has {} entries, operator has {} unknowns",
                u0.len(),
                op.dof()
            ));
        }
        if !(t_final > 0.0 && t_final.is_finite()) {
            return invalid(format!("final time must be positive, got {t_final}"));
        }
        if u0.iter().any(|v| !v.is_finite()) {
            return invalid("initial state contains non-finite values");
        }
        Ok(ProblemSpec { op, reaction, u0, t_final })
    }

    /// Initial state sampled from an analytic field.
    pub fn sampled(
        op: Arc<dyn SpatialOperator>,
        reaction: Reaction,
        u0: &dyn Fn(f64, f64) -> f64,
        t_final: f64,
    ) -> Result<Self> {
        let init = op.sample(u0);
        Self::new(op, reaction, init, t_final)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolverMode {
    Newton,
    FixedPoint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub mode: SolverMode,
    /// Relative residual tolerance.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { mode: SolverMode::Newton, tol: 1e-12, max_iter: 50 }
    }
}

impl SolverSettings {
    /// Newton for nodal operators, fixed point for modal ones.
    pub fn default_for(op: &dyn SpatialOperator) -> Self {
        let mode = if op.is_nodal() { SolverMode::Newton } else { SolverMode::FixedPoint };
        SolverSettings { mode, ..Default::default() }
    }
}

/// How `u^1..u^m` are obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum Startup {
    /// Fine-step run of the single-correction scheme.
    Bootstrap,
    /// With one correction, `u^1` from the coupled first step; more
    /// corrections fall back to the bootstrap.
    Coupled,
    Given(Vec<Vec<f64>>),
}

/// Which solution indices a run keeps.
#[derive(Debug, Clone, PartialEq)]
pub enum Snapshots {
    All,
    /// Indices divisible by the stride, plus the final one.
    Every(usize),
    Final,
}

impl Snapshots {
    fn keeps(&self, n: usize, n_steps: usize) -> bool {
        match self {
            Snapshots::All => true,
            Snapshots::Every(k) => n % k.max(&1) == 0 || n == n_steps,
            Snapshots::Final => n == 0 || n == n_steps,
        }
    }
}

/// Everything that defines the time discretization.
#[derive(Debug, Clone)]
pub struct SchemeConfig {
    pub gf: GeneratingFunction,
    pub corrections: CorrectionConfig,
    pub tau: f64,
    pub n_steps: usize,
    pub solver: SolverSettings,
    pub startup: Startup,
    pub snapshots: Snapshots,
    omega: Arc<Vec<f64>>,
    table: Arc<StartingWeightTable>,
}

/// `T / tau` when it is an integer.
pub fn steps_for(t_final: f64, tau: f64) -> Result<usize> {
    if !(tau > 0.0 && tau.is_finite()) {
        return invalid(format!("time step must be positive, got {tau}"));
    }
    let n = (t_final / tau).round();
    if n < 1.0 || ((n * tau - t_final) / t_final).abs() > 1e-9 {
        return invalid(format!("final time {t_final} is not a multiple of the step {tau}"));
    }
    Ok(n as usize)
}

impl SchemeConfig {
    pub fn new(
        gf: GeneratingFunction,
        corrections: CorrectionConfig,
        tau: f64,
        n_steps: usize,
    ) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return invalid(format!("time step must be positive, got {tau}"));
        }
        if n_steps == 0 {
            return invalid("at least one time step is required");
        }
        let omega = omega_weights(&gf, n_steps)?.values;
        let table = starting_weights_from_omega(gf.alpha(), &omega, &corrections, n_steps)?;
        Ok(SchemeConfig {
            gf,
            corrections,
            tau,
            n_steps,
            solver: SolverSettings::default(),
            startup: Startup::Bootstrap,
            snapshots: Snapshots::All,
            omega: Arc::new(omega),
            table: Arc::new(table),
        })
    }

    /// Scheme covering `[0, T]` with step `tau`.
    pub fn for_problem(
        problem: &ProblemSpec,
        gf: GeneratingFunction,
        corrections: CorrectionConfig,
        tau: f64,
    ) -> Result<Self> {
        let n = steps_for(problem.t_final, tau)?;
        Ok(Self::new(gf, corrections, tau, n)?
            .with_solver(SolverSettings::default_for(problem.op.as_ref())))
    }

    pub fn with_solver(mut self, solver: SolverSettings) -> Self {
        self.solver = solver;
        self
    }

    pub fn with_startup(mut self, startup: Startup) -> Self {
        self.startup = startup;
        self
    }

    pub fn with_snapshots(mut self, snapshots: Snapshots) -> Self {
        self.snapshots = snapshots;
        self
    }

    pub fn alpha(&self) -> f64 {
        self.gf.alpha()
    }

    pub fn m(&self) -> usize {
        self.corrections.m()
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn starting_weights(&self) -> &StartingWeightTable {
        &self.table
    }

    pub fn t_final(&self) -> f64 {
        self.tau * self.n_steps as f64
    }

    /// `tau^-alpha`
    pub fn scale(&self) -> f64 {
        self.tau.powf(-self.alpha())
    }
}

/// Bookkeeping of the history part of a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct HistoryStats {
    pub time: Duration,
    /// Largest number of bytes held for history at any step.
    pub peak_bytes: usize,
    pub multiply_adds: u64,
}

/// Evaluates `tau^-alpha sum_{j=1}^{n-1} omega_{n-j} d^j` for the next index
/// `n`, where `d^j = u^j - u^0` are pushed in order.
pub trait History {
    fn push(&mut self, d: &[f64]);
    fn lagged_sum(&mut self, out: &mut [f64]);
    fn stats(&self) -> HistoryStats;
}

/// Stores every difference and sums them with the exact weights.
#[derive(Debug, Clone)]
pub struct DirectHistory {
    omega: Arc<Vec<f64>>,
    scale: f64,
    dof: usize,
    diffs: Vec<f64>,
    stats: HistoryStats,
}

impl DirectHistory {
    pub fn new(scheme: &SchemeConfig, dof: usize) -> Self {
        DirectHistory {
            omega: scheme.omega.clone(),
            scale: scheme.scale(),
            dof,
            diffs: Vec::new(),
            stats: HistoryStats::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.diffs.len() / self.dof
    }

    pub fn is_empty(&self) -> bool {
        self.diffs.is_empty()
    }
}

impl History for DirectHistory {
    fn push(&mut self, d: &[f64]) {
        let start = Instant::now();
        self.diffs.extend_from_slice(d);
        self.stats.peak_bytes = self.stats.peak_bytes.max(self.diffs.len() * 8);
        self.stats.time += start.elapsed();
    }

    fn lagged_sum(&mut self, out: &mut [f64]) {
        let start = Instant::now();
        let n = self.len() + 1;
        out.iter_mut().for_each(|v| *v = 0.0);
        for j in 1..n {
            let w = self.omega[n - j] * self.scale;
            let d = &self.diffs[(j - 1) * self.dof..j * self.dof];
            for (o, v) in out.iter_mut().zip(d) {
                *o += w * v;
            }
        }
        self.stats.multiply_adds += ((n - 1) * self.dof) as u64;
        self.stats.time += start.elapsed();
    }

    fn stats(&self) -> HistoryStats {
        self.stats
    }
}

/// Stored solution states and run diagnostics.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub tau: f64,
    pub n_steps: usize,
    /// `(n, u^n)` in increasing `n`.
    pub snapshots: Vec<(usize, Vec<f64>)>,
    /// Nonlinear iterations per step, index `n - 1`.
    pub iterations: Vec<u32>,
    pub wall_time: Duration,
    pub history: HistoryStats,
}

impl Trajectory {
    pub fn initial(&self) -> &[f64] {
        &self.snapshots[0].1
    }

    pub fn final_state(&self) -> &[f64] {
        &self.snapshots.last().expect("trajectory is never empty").1
    }

    pub fn get(&self, n: usize) -> Option<&[f64]> {
        self.snapshots
            .binary_search_by_key(&n, |(k, _)| *k)
            .ok()
            .map(|i| self.snapshots[i].1.as_slice())
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.tau
    }
}

/// Direct evaluation of the corrected operator on given samples `u^0..u^n`.
pub fn caputo_apply(scheme: &SchemeConfig, samples: &[Vec<f64>], n: usize) -> Result<Vec<f64>> {
    let m = scheme.m();
    if n == 0 {
        return invalid("the discrete derivative is defined for n >= 1");
    }
    if m >= 2 && n <= m {
        return Err(Error::StartupIndex { step: n, m });
    }
    if samples.len() <= n || n > scheme.n_steps {
        return invalid(format!("need samples up to index {n}, have {}", samples.len()));
    }
    let omega = scheme.omega();
    let u0 = &samples[0];
    let mut out = vec![0.0; u0.len()];
    let mut add = |w: f64, uj: &[f64]| {
        for ((o, a), b) in out.iter_mut().zip(uj).zip(u0) {
            *o += w * (a - b);
        }
    };
    for j in 1..=n {
        add(omega[n - j], &samples[j]);
    }
    let table = scheme.starting_weights();
    for j in 1..=m.min(n) {
        add(table.get(n, j), &samples[j]);
    }
    let s = scheme.scale();
    out.iter_mut().for_each(|v| *v *= s);
    Ok(out)
}

/// Implicit coefficient of the single-correction first step,
/// `Gamma(sigma_1 + 1) / Gamma(sigma_1 + 1 - alpha)`.
pub fn first_step_coefficient(scheme: &SchemeConfig) -> Result<f64> {
    if scheme.m() != 1 {
        return invalid(format!(
            "the coupled first step needs exactly one correction, have {}",
            scheme.m()
        ));
    }
    Ok(caputo_power_factor(scheme.corrections.sigmas()[0], scheme.alpha()))
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn reaction_term(op: &dyn SpatialOperator, reaction: &Reaction, u: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    match reaction.linear_slope() {
        Some(c) => out.iter_mut().zip(u).for_each(|(o, v)| *o = c * v),
        None => op.apply_pointwise(&|v| reaction.eval(v), u, &mut out),
    }
    out
}

/// Reaction data at one iterate: `f(u)` in the operator's representation,
/// `f'(u)` on the physical grid and the midpoint of the range of `f'`.
struct Linearization {
    f: Vec<f64>,
    df: Vec<f64>,
    shift: f64,
}

fn linearize(op: &dyn SpatialOperator, reaction: &Reaction, u: &[f64]) -> Linearization {
    let phys = op.to_physical(u);
    let f = op.from_physical(&phys.iter().map(|&v| reaction.eval(v)).collect::<Vec<_>>());
    let df: Vec<f64> = phys.iter().map(|&v| reaction.derivative(v)).collect();
    let (lo, hi) = df
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    Linearization { f, df, shift: 0.5 * (lo + hi) }
}

/// Residual `(gamma I - L) u - f(u) - rhs` and its relative size.
fn residual(
    op: &dyn SpatialOperator,
    gamma: f64,
    rhs: &[f64],
    u: &[f64],
    f: &[f64],
) -> (Vec<f64>, f64) {
    let mut r = vec![0.0; u.len()];
    op.apply(u, &mut r);
    for i in 0..u.len() {
        r[i] = gamma * u[i] - r[i] - f[i] - rhs[i];
    }
    let scale = op.l2_norm(rhs).max(gamma * op.l2_norm(u));
    let norm = op.l2_norm(&r);
    let rel = if scale > 0.0 { norm / scale } else { norm };
    (r, rel)
}

/// Preconditioned conjugate gradients for
/// `(gamma I - L - f'(u)) x = b`, preconditioned by `((gamma - s) I - L)^-1`.
#[allow(clippy::too_many_arguments)]
fn newton_correction(
    op: &dyn SpatialOperator,
    gamma: f64,
    shift: f64,
    df: &[f64],
    b: &[f64],
    tol: f64,
) -> Vec<f64> {
    let n = b.len();
    let apply = |v: &[f64], out: &mut [f64]| {
        let mut lv = vec![0.0; n];
        op.apply(v, &mut lv);
        let mut mv = vec![0.0; n];
        op.multiply(df, v, &mut mv);
        for i in 0..n {
            out[i] = gamma * v[i] - lv[i] - mv[i];
        }
    };
    let precond = |r: &[f64], out: &mut [f64]| op.solve_shifted(gamma - shift, 1.0, r, out);
    let dot = |a: &[f64], b: &[f64]| op.inner(a, b);

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return x;
    }
    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for _ in 0..200 {
        apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        if dot(&r, &r).sqrt() <= tol * b_norm {
            break;
        }
        precond(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    x
}

/// Solves `(gamma I - L) u - f(u) = rhs`, returning the iterate and the
/// iteration count.
pub fn solve_step(
    op: &dyn SpatialOperator,
    reaction: &Reaction,
    gamma: f64,
    rhs: &[f64],
    guess: &[f64],
    settings: &SolverSettings,
    step: usize,
) -> Result<(Vec<f64>, u32)> {
    let dof = rhs.len();
    if let Some(c) = reaction.linear_slope() {
        let mut u = vec![0.0; dof];
        op.solve_shifted(gamma - c, 1.0, rhs, &mut u);
        return Ok((u, 1));
    }
    let mut u = guess.to_vec();
    let mut lin = linearize(op, reaction, &u);
    let (mut r, mut rel) = residual(op, gamma, rhs, &u, &lin.f);
    let mut growth = 0;
    let mut iters = 0u32;
    while rel > settings.tol {
        if iters as usize >= settings.max_iter || growth >= 5 || !rel.is_finite() {
            return Err(Error::SolverFailure { step, residual: rel, iterations: iters as usize });
        }
        match settings.mode {
            SolverMode::FixedPoint => {
                let mut b = rhs.to_vec();
                for i in 0..dof {
                    b[i] += lin.f[i] - lin.shift * u[i];
                }
                op.solve_shifted(gamma - lin.shift, 1.0, &b, &mut u);
            }
            SolverMode::Newton => {
                let neg: Vec<f64> = r.iter().map(|v| -v).collect();
                let delta =
                    newton_correction(op, gamma, lin.shift, &lin.df, &neg, 1e-3 * settings.tol);
                axpy(1.0, &delta, &mut u);
            }
        }
        iters += 1;
        lin = linearize(op, reaction, &u);
        let (r_new, rel_new) = residual(op, gamma, rhs, &u, &lin.f);
        growth = if rel_new > rel { growth + 1 } else { 0 };
        r = r_new;
        rel = rel_new;
    }
    Ok((u, iters))
}

/// Time-stepping state shared by the direct, semi-implicit and fast runs.
pub struct StepState<'a> {
    problem: &'a ProblemSpec,
    scheme: &'a SchemeConfig,
    history: Box<dyn History + 'a>,
    /// `u^1 - u^0, ..., u^m - u^0`
    corrected: Vec<Vec<f64>>,
    /// `u^{n-1}, u^{n-2}`
    recent: VecDeque<Vec<f64>>,
    /// `f(u^{n-1}), f(u^{n-2})`, kept for the extrapolated variants
    recent_f: VecDeque<Vec<f64>>,
    keep_f: bool,
    n: usize,
    traj: Trajectory,
    started: Instant,
}

impl<'a> StepState<'a> {
    pub fn new(
        problem: &'a ProblemSpec,
        scheme: &'a SchemeConfig,
        history: Box<dyn History + 'a>,
    ) -> Self {
        let u0 = problem.u0.clone();
        let mut recent = VecDeque::new();
        recent.push_front(u0.clone());
        let traj = Trajectory {
            tau: scheme.tau,
            n_steps: scheme.n_steps,
            snapshots: vec![(0, u0)],
            iterations: Vec::with_capacity(scheme.n_steps),
            wall_time: Duration::ZERO,
            history: HistoryStats::default(),
        };
        StepState {
            problem,
            scheme,
            history,
            corrected: Vec::new(),
            recent,
            recent_f: VecDeque::new(),
            keep_f: false,
            n: 0,
            traj,
            started: Instant::now(),
        }
    }

    fn track_reaction(&mut self) {
        if !self.keep_f {
            self.keep_f = true;
            let f = reaction_term(self.problem.op.as_ref(), &self.problem.reaction, &self.problem.u0);
            self.recent_f.push_front(f);
        }
    }

    /// Index of the last accepted state.
    pub fn index(&self) -> usize {
        self.n
    }

    pub fn last(&self) -> &[f64] {
        &self.recent[0]
    }

    /// Appends `u^{n+1}`.
    pub fn accept(&mut self, u: Vec<f64>, iterations: u32) {
        self.n += 1;
        let d: Vec<f64> = u.iter().zip(&self.problem.u0).map(|(a, b)| a - b).collect();
        self.history.push(&d);
        if self.n <= self.scheme.m() {
            self.corrected.push(d);
        }
        if self.keep_f {
            let f = reaction_term(self.problem.op.as_ref(), &self.problem.reaction, &u);
            self.recent_f.push_front(f);
            self.recent_f.truncate(2);
        }
        if self.scheme.snapshots.keeps(self.n, self.scheme.n_steps) {
            self.traj.snapshots.push((self.n, u.clone()));
        }
        self.traj.iterations.push(iterations);
        self.recent.push_front(u);
        self.recent.truncate(2);
    }

    /// Implicit coefficient and right-hand side `gamma u^0 - h^n` of the
    /// next step.
    fn step_system(&mut self) -> Result<(f64, Vec<f64>)> {
        let n = self.n + 1;
        let m = self.scheme.m();
        let s = self.scheme.scale();
        let dof = self.problem.u0.len();
        let mut h = vec![0.0; dof];
        self.history.lagged_sum(&mut h);
        let table = self.scheme.starting_weights();
        let mut gamma = s * self.scheme.omega()[0];
        if n <= m {
            if m != 1 {
                return Err(Error::StartupIndex { step: n, m });
            }
            gamma = s * first_step_coefficient(self.scheme)?;
        } else {
            for j in 1..=m {
                axpy(s * table.get(n, j), &self.corrected[j - 1], &mut h);
            }
        }
        let rhs: Vec<f64> = self.problem.u0.iter().zip(&h).map(|(u, hv)| gamma * u - hv).collect();
        Ok((gamma, rhs))
    }

    fn guess(&self) -> Vec<f64> {
        if self.recent.len() >= 2 {
            self.recent[0].iter().zip(&self.recent[1]).map(|(a, b)| 2.0 * a - b).collect()
        } else {
            self.recent[0].clone()
        }
    }

    /// Fully implicit step producing `u^{n+1}`.
    pub fn implicit_step(&mut self) -> Result<&[f64]> {
        let (gamma, rhs) = self.step_system()?;
        let guess = self.guess();
        let (u, it) = solve_step(
            self.problem.op.as_ref(),
            &self.problem.reaction,
            gamma,
            &rhs,
            &guess,
            &self.scheme.solver,
            self.n + 1,
        )?;
        self.accept(u, it);
        Ok(self.last())
    }

    /// Linear step with the reaction extrapolated from previous states.
    pub fn semi_implicit_step(&mut self, order: usize) -> Result<&[f64]> {
        self.track_reaction();
        let (gamma, mut rhs) = self.step_system()?;
        if order >= 2 && self.recent_f.len() >= 2 {
            axpy(2.0, &self.recent_f[0], &mut rhs);
            axpy(-1.0, &self.recent_f[1], &mut rhs);
        } else {
            axpy(1.0, &self.recent_f[0], &mut rhs);
        }
        let mut u = vec![0.0; rhs.len()];
        self.problem.op.solve_shifted(gamma, 1.0, &rhs, &mut u);
        self.accept(u, 1);
        Ok(self.last())
    }

    pub fn finish(mut self) -> Trajectory {
        self.traj.history = self.history.stats();
        self.traj.wall_time = self.started.elapsed();
        self.traj
    }
}

/// `u^1` of the single-correction scheme:
/// `tau^-alpha gamma_1 (u^1 - u^0) = L u^1 + f(u^1)`.
pub fn m1_first_step(problem: &ProblemSpec, scheme: &SchemeConfig) -> Result<Vec<f64>> {
    let g1 = first_step_coefficient(scheme)?;
    let gamma = scheme.scale() * g1;
    let rhs: Vec<f64> = problem.u0.iter().map(|u| gamma * u).collect();
    let (u, _) = solve_step(
        problem.op.as_ref(),
        &problem.reaction,
        gamma,
        &rhs,
        &problem.u0,
        &scheme.solver,
        1,
    )?;
    Ok(u)
}

/// Number of fine steps per coarse step in the startup run,
/// `tau / tau_s` with `tau_s = 0.1 tau / ceil(1 / tau)` rounded to a divisor.
pub fn bootstrap_ratio(tau: f64) -> usize {
    let fine = 0.1 * tau / (1.0 / tau).ceil();
    (tau / fine - 1e-9).ceil() as usize
}

/// Fine runs longer than this use the fast history.
pub const BOOTSTRAP_FAST_THRESHOLD: usize = 2048;

/// Fidelity requested from the fast history inside the startup run.
pub const BOOTSTRAP_FAST_EPS: f64 = 1e-12;

/// `u^1..u^m` from a fine-step run of the single-correction scheme.
pub fn bootstrap_start(problem: &ProblemSpec, scheme: &SchemeConfig) -> Result<Vec<Vec<f64>>> {
    let m = scheme.m();
    if m == 0 {
        return invalid("startup values are only needed with corrections");
    }
    let r = bootstrap_ratio(scheme.tau);
    let fine_steps = m * r;
    let fine = SchemeConfig::new(
        scheme.gf.clone(),
        scheme.corrections.truncated(1),
        scheme.tau / r as f64,
        fine_steps,
    )?
    .with_solver(scheme.solver)
    .with_startup(Startup::Coupled)
    .with_snapshots(Snapshots::Every(r));
    let traj = if fine_steps > BOOTSTRAP_FAST_THRESHOLD && scheme.alpha() < 1.0 {
        crate::fast_history::run_fast_auto(problem, &fine, BOOTSTRAP_FAST_EPS)?
    } else {
        run_direct(problem, &fine)?
    };
    Ok((1..=m)
        .map(|k| traj.get(k * r).expect("bootstrap snapshot").to_vec())
        .collect())
}

fn startup_values(problem: &ProblemSpec, scheme: &SchemeConfig) -> Result<Vec<Vec<f64>>> {
    let m = scheme.m();
    match &scheme.startup {
        Startup::Given(values) => {
            if values.len() != m || values.iter().any(|v| v.len() != problem.u0.len()) {
                return invalid(format!(
                    "expected {m} startup states of length {}",
                    problem.u0.len()
                ));
            }
            Ok(values.clone())
        }
        Startup::Coupled if m == 1 => Ok(Vec::new()),
        _ if m >= 1 => bootstrap_start(problem, scheme),
        _ => Ok(Vec::new()),
    }
}

fn check_run(problem: &ProblemSpec, scheme: &SchemeConfig) -> Result<()> {
    if scheme.m() > scheme.n_steps {
        return invalid(format!(
            "{} corrections need more than {} steps",
            scheme.m(),
            scheme.n_steps
        ));
    }
    let t = scheme.t_final();
    if (t - problem.t_final) / problem.t_final > 1e-9 {
        return invalid(format!(
            "scheme runs to {t} past the problem's final time {}",
            problem.t_final
        ));
    }
    Ok(())
}

/// Runs the full scheme with a caller-provided history evaluator.
pub fn run_with_history<'a>(
    problem: &'a ProblemSpec,
    scheme: &'a SchemeConfig,
    history: Box<dyn History + 'a>,
    semi_implicit: Option<usize>,
) -> Result<Trajectory> {
    check_run(problem, scheme)?;
    let start = startup_values(problem, scheme)?;
    let mut state = StepState::new(problem, scheme, history);
    for u in start {
        state.accept(u, 0);
    }
    while state.index() < scheme.n_steps {
        match semi_implicit {
            Some(order) => state.semi_implicit_step(order)?,
            None => state.implicit_step()?,
        };
    }
    Ok(state.finish())
}

/// Fully implicit run with the full history kept in memory.
pub fn run_direct(problem: &ProblemSpec, scheme: &SchemeConfig) -> Result<Trajectory> {
    let hist = DirectHistory::new(scheme, problem.u0.len());
    run_with_history(problem, scheme, Box::new(hist), None)
}

/// Linearly implicit run, extrapolating the reaction to first or second
/// order.
pub fn run_semi_implicit(
    problem: &ProblemSpec,
    scheme: &SchemeConfig,
    order: usize,
) -> Result<Trajectory> {
    if !(order == 1 || order == 2) {
        return invalid(format!("extrapolation order must be 1 or 2, got {order}"));
    }
    let hist = DirectHistory::new(scheme, problem.u0.len());
    run_with_history(problem, scheme, Box::new(hist), Some(order))
}
