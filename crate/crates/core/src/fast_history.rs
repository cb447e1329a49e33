//! Sum-of-exponentials compression of the convolution weights.
//!
//! For lags `n >= n0` the weights are replaced by
//! `omega~_n = tau^(1+alpha) sum_l varpi_l (1 + tau e^(lambda_l))^(-1-n)`,
//! a truncated trapezoidal rule for the integral representation
//! `omega_n = tau^(1+alpha) int phi(x) (1 + tau e^x)^(-1-n) dx`. The history
//! sum then follows a per-node recurrence costing `O(Q)` per step.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::cq_weights::{omega_weights, Family, GeneratingFunction};
use crate::error::{invalid, Error, Result};
use crate::stepper::{run_with_history, History, HistoryStats, ProblemSpec, SchemeConfig, Trajectory};

/// Smallest relative weight error the builder is asked for; the integral
/// representation cannot be summed more accurately in double precision.
pub const EPS_FLOOR: f64 = 5e-13;

/// Rounding in the exact weights grows about linearly with the lag, which
/// bounds the relative error any validation can certify.
pub fn eps_floor(n_steps: usize) -> f64 {
    EPS_FLOOR.max(5e-17 * n_steps as f64)
}

pub const Q_START: usize = 64;
pub const Q_MAX: usize = 4096;

/// Acceptance slack of [`validate`] over the requested precision.
pub const VALIDATION_SLACK: f64 = 10.0;

/// `phi(x)` of the integral representation for step `tau`.
///
/// With `omega(z) = (1 - z)^alpha B(z)`, `phi(x) = e^((1+alpha)x) / pi *
/// Im[e^(-i alpha pi) B(1 + y + i0)]`, `y = tau e^x`. Every supported family
/// has `B(1 + y) = (1 - c y)^alpha (1 - d y)`.
pub fn phi(gf: &GeneratingFunction, tau: f64, x: f64) -> Result<f64> {
    let (c, d) = b_factors(gf)?;
    let alpha = gf.alpha();
    let y = tau * x.exp();
    let p = 1.0 - c * y;
    let lin = 1.0 - d * y;
    let im = if p >= 0.0 {
        -(alpha * PI).sin() * p.powf(alpha) * lin
    } else {
        // the upper boundary value picks up a further e^(-i alpha pi)
        -(2.0 * alpha * PI).sin() * (-p).powf(alpha) * lin
    };
    Ok(((1.0 + alpha) * x).exp() / PI * im)
}

fn b_factors(gf: &GeneratingFunction) -> Result<(f64, f64)> {
    let alpha = gf.alpha();
    match gf.family() {
        Family::Fbdf1 => Ok((0.0, 0.0)),
        Family::Fbdf2 => Ok((0.5, 0.0)),
        Family::Gngf2 => Ok((0.0, 0.5 * alpha)),
        Family::BnTheta => {
            let theta = gf.theta().unwrap_or(0.0);
            Ok((0.5 - theta, theta * alpha))
        }
        Family::CnLinear | Family::CnBinom => Err(Error::NoConvolutionWeights(gf.family().name())),
    }
}

/// Default exact-window length. The FBDF-2 and BN-theta kernels carry a
/// branch point at `y = 2 / (1 - 2 theta)` whose contribution decays only
/// like `3^-n`.
pub fn default_n0(gf: &GeneratingFunction, m: usize) -> usize {
    let base = match gf.family() {
        Family::Fbdf2 => 32,
        Family::BnTheta if gf.theta().unwrap_or(0.0) < 0.5 => 32,
        _ => 16,
    };
    base.max(m + 2)
}

/// Truncated trapezoidal exponential-sum approximation of the weights.
#[derive(Debug, Clone, Serialize)]
pub struct ExpSumApprox {
    pub alpha: f64,
    pub tau: f64,
    pub n_steps: usize,
    pub n0: usize,
    pub eps: f64,
    pub q: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub dx: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// `1 / (1 + tau e^lambda_l)`
    pub decay: Vec<f64>,
    /// Validation result of the accepted node count.
    pub max_rel_error: f64,
}

/// `(x_min, x_max)` for precision `eps`.
///
/// The upper limit solves `n0 ln(1 + tau e^x) = A` with
/// `A = -2 ln eps + 2 (1+alpha) ln(n0 tau)`, whose small-argument form is
/// `x_max = ln(A / (n0 tau))`. `A` is raised to at least
/// `-ln eps + (1+alpha) ln n0 + 2`, which bounds the neglected tail relative
/// to `omega_n0` independently of `tau`.
pub fn node_range(alpha: f64, tau: f64, n_steps: usize, n0: usize, eps: f64) -> (f64, f64) {
    let x_min = eps.ln() / (1.0 + alpha) - (n_steps as f64 * tau).ln();
    let n0f = n0 as f64;
    let a_bound = -2.0 * eps.ln() + 2.0 * (1.0 + alpha) * (n0f * tau).ln();
    let a_rel = -eps.ln() + (1.0 + alpha) * n0f.ln() + 2.0;
    let a = a_bound.max(a_rel);
    let x_max = ((a / n0f).exp_m1() / tau).ln();
    (x_min, x_max.max(x_min + 1.0))
}

fn assemble(
    gf: &GeneratingFunction,
    tau: f64,
    n_steps: usize,
    n0: usize,
    eps: f64,
    q: usize,
) -> Result<ExpSumApprox> {
    let (x_min, x_max) = node_range(gf.alpha(), tau, n_steps, n0, eps);
    let dx = (x_max - x_min) / q as f64;
    let nodes: Vec<f64> = (0..q).map(|l| x_min + l as f64 * dx).collect();
    let weights = nodes.iter().map(|&x| Ok(dx * phi(gf, tau, x)?)).collect::<Result<Vec<f64>>>()?;
    let decay = nodes.iter().map(|&x| 1.0 / (1.0 + tau * x.exp())).collect();
    Ok(ExpSumApprox {
        alpha: gf.alpha(),
        tau,
        n_steps,
        n0,
        eps,
        q,
        x_min,
        x_max,
        dx,
        nodes,
        weights,
        decay,
        max_rel_error: f64::NAN,
    })
}

/// Builds the approximation, doubling `Q` from 64 until [`validate`] passes.
pub fn build_exp_sum(
    gf: &GeneratingFunction,
    tau: f64,
    n_steps: usize,
    n0: usize,
    eps: f64,
) -> Result<ExpSumApprox> {
    let alpha = gf.alpha();
    if alpha >= 1.0 {
        return invalid("integer order has no history to compress");
    }
    b_factors(gf)?;
    if !(eps > 1e-14 && eps < 1e-4) {
        return invalid(format!("precision must lie in (1e-14, 1e-4), got {eps}"));
    }
    if n0 < 2 || n0 > n_steps {
        return invalid(format!("exact window {n0} must lie in 2..={n_steps}"));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return invalid(format!("time step must be positive, got {tau}"));
    }
    let omega = omega_weights(gf, n_steps)?.values;
    let q_cap = Q_MAX.min(n_steps / 4);
    let mut q = Q_START;
    let mut achieved = f64::INFINITY;
    while q <= q_cap {
        let mut approx = assemble(gf, tau, n_steps, n0, eps, q)?;
        let report = validate(&approx, &omega);
        achieved = report.max_rel_error;
        if report.pass {
            approx.max_rel_error = achieved;
            return Ok(approx);
        }
        q *= 2;
    }
    Err(Error::ExpSumAccuracy { target: eps, achieved, nodes: q / 2 })
}

/// Same as [`build_exp_sum`] with a fixed node count and no validation.
pub fn build_with_nodes(
    gf: &GeneratingFunction,
    tau: f64,
    n_steps: usize,
    n0: usize,
    eps: f64,
    q: usize,
) -> Result<ExpSumApprox> {
    b_factors(gf)?;
    if gf.alpha() >= 1.0 {
        return invalid("integer order has no history to compress");
    }
    assemble(gf, tau, n_steps, n0, eps, q.max(1))
}

/// `omega~_n` for `n >= n0`.
pub fn approx_weight(approx: &ExpSumApprox, n: usize) -> Result<f64> {
    if n < approx.n0 {
        return invalid(format!("lag {n} lies in the exact window of length {}", approx.n0));
    }
    let pow = (n + 1) as f64;
    let s: f64 = approx
        .weights
        .iter()
        .zip(&approx.decay)
        .map(|(w, z)| w * (pow * z.ln()).exp())
        .sum();
    Ok(approx.tau.powf(1.0 + approx.alpha) * s)
}

/// `omega~_n` for `n0 <= n <= n_max`, indexed by `n - n0`.
pub fn approx_weights(approx: &ExpSumApprox, n_max: usize) -> Vec<f64> {
    const CHUNK: usize = 512;
    let n0 = approx.n0;
    if n_max < n0 {
        return Vec::new();
    }
    let scale = approx.tau.powf(1.0 + approx.alpha);
    let mut out = vec![0.0; n_max - n0 + 1];
    out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
        let first = n0 + c * CHUNK;
        for (w, z) in approx.weights.iter().zip(&approx.decay) {
            let mut p = w * ((first + 1) as f64 * z.ln()).exp();
            for v in chunk.iter_mut() {
                *v += p;
                p *= z;
            }
        }
        chunk.iter_mut().for_each(|v| *v *= scale);
    });
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidationReport {
    pub max_rel_error: f64,
    pub worst_lag: usize,
    pub pass: bool,
}

/// Largest relative deviation `|omega~_n / omega_n - 1|` over
/// `n0 <= n <= n_T`.
pub fn validate(approx: &ExpSumApprox, omega_exact: &[f64]) -> ValidationReport {
    let n_max = approx.n_steps.min(omega_exact.len().saturating_sub(1));
    let approx_w = approx_weights(approx, n_max);
    let mut worst = (0.0f64, approx.n0);
    for (i, w) in approx_w.iter().enumerate() {
        let n = approx.n0 + i;
        let exact = omega_exact[n];
        let rel = if exact != 0.0 { ((w - exact) / exact).abs() } else { w.abs() };
        if !(rel <= worst.0) {
            worst = (rel, n);
        }
    }
    ValidationReport {
        max_rel_error: worst.0,
        worst_lag: worst.1,
        pass: worst.0 <= VALIDATION_SLACK * approx.eps,
    }
}

/// Per-node accumulators `y_l`, each a state vector.
#[derive(Debug, Clone)]
pub struct FastHistoryState {
    dof: usize,
    tau: f64,
    decay: Vec<f64>,
    /// node-major, `y[l * dof + i]`
    pub y: Vec<f64>,
    /// number of differences folded in
    pub n: usize,
}

/// Node blocks at least this large are updated in parallel.
const PARALLEL_WORK: usize = 1 << 16;

impl FastHistoryState {
    pub fn new(approx: &ExpSumApprox, dof: usize) -> Self {
        FastHistoryState {
            dof,
            tau: approx.tau,
            decay: approx.decay.clone(),
            y: vec![0.0; approx.q * dof],
            n: 0,
        }
    }

    pub fn node(&self, l: usize) -> &[f64] {
        &self.y[l * self.dof..(l + 1) * self.dof]
    }
}

/// `y_l <- (y_l + tau (u_prev - u0)) / (1 + tau e^lambda_l)`.
pub fn history_update(state: &mut FastHistoryState, u_prev: &[f64], u0: &[f64]) {
    let d: Vec<f64> = u_prev.iter().zip(u0).map(|(a, b)| a - b).collect();
    update_with_difference(state, &d);
}

fn update_with_difference(state: &mut FastHistoryState, d: &[f64]) {
    let tau = state.tau;
    let dof = state.dof;
    let body = |(y, z): (&mut [f64], &f64)| {
        for (yi, di) in y.iter_mut().zip(d) {
            *yi = z * (*yi + tau * di);
        }
    };
    if state.y.len() >= PARALLEL_WORK {
        state.y.par_chunks_mut(dof).zip(state.decay.par_iter()).for_each(body);
    } else {
        state.y.chunks_mut(dof).zip(state.decay.iter()).for_each(body);
    }
    state.n += 1;
}

/// History evaluator with exact weights on lags below `n0` and the
/// exponential sum beyond.
#[derive(Debug, Clone)]
pub struct FastHistory {
    state: FastHistoryState,
    /// `varpi_l z_l^n0`
    coeffs: Vec<f64>,
    exact: Vec<f64>,
    scale: f64,
    n0: usize,
    window: VecDeque<Vec<f64>>,
    pushed: usize,
    stats: HistoryStats,
}

impl FastHistory {
    pub fn new(approx: &ExpSumApprox, scheme: &SchemeConfig, dof: usize) -> Self {
        let n0 = approx.n0;
        let coeffs = approx
            .weights
            .iter()
            .zip(&approx.decay)
            .map(|(w, z)| w * z.powi(n0 as i32))
            .collect();
        let mut h = FastHistory {
            state: FastHistoryState::new(approx, dof),
            coeffs,
            exact: scheme.omega()[..n0.min(scheme.omega().len())].to_vec(),
            scale: scheme.scale(),
            n0,
            window: VecDeque::with_capacity(n0),
            pushed: 0,
            stats: HistoryStats::default(),
        };
        h.stats.peak_bytes = h.bytes();
        h
    }

    fn bytes(&self) -> usize {
        8 * (self.state.y.len() + self.window.len() * self.state.dof)
    }

    pub fn state(&self) -> &FastHistoryState {
        &self.state
    }
}

impl History for FastHistory {
    fn push(&mut self, d: &[f64]) {
        let start = Instant::now();
        self.pushed += 1;
        self.window.push_back(d.to_vec());
        if self.window.len() > self.n0 - 1 {
            let old = self.window.pop_front().expect("window is nonempty");
            update_with_difference(&mut self.state, &old);
            self.stats.multiply_adds += self.state.y.len() as u64;
        }
        self.stats.peak_bytes = self.stats.peak_bytes.max(self.bytes());
        self.stats.time += start.elapsed();
    }

    fn lagged_sum(&mut self, out: &mut [f64]) {
        let start = Instant::now();
        let dof = self.state.dof;
        out.iter_mut().for_each(|v| *v = 0.0);
        // window holds d^{n-k}, k = len..1, for the next index n
        let len = self.window.len();
        for (i, d) in self.window.iter().enumerate() {
            let w = self.scale * self.exact[len - i];
            for (o, v) in out.iter_mut().zip(d) {
                *o += w * v;
            }
        }
        if self.state.n > 0 {
            for (l, c) in self.coeffs.iter().enumerate() {
                let y = &self.state.y[l * dof..(l + 1) * dof];
                for (o, v) in out.iter_mut().zip(y) {
                    *o += c * v;
                }
            }
        }
        self.stats.multiply_adds += ((len + self.coeffs.len()) * dof) as u64;
        self.stats.time += start.elapsed();
    }

    fn stats(&self) -> HistoryStats {
        self.stats
    }
}

/// Runs the scheme with the compressed history.
pub fn run_fast(
    problem: &ProblemSpec,
    scheme: &SchemeConfig,
    approx: &ExpSumApprox,
) -> Result<Trajectory> {
    if approx.n0 <= scheme.m() + 1 {
        return invalid(format!(
            "exact window {} must exceed m + 1 = {}",
            approx.n0,
            scheme.m() + 1
        ));
    }
    if (approx.tau - scheme.tau).abs() > 1e-15 * scheme.tau
        || (approx.alpha - scheme.alpha()).abs() > 1e-15
        || approx.n_steps < scheme.n_steps
    {
        return invalid("exponential sum was built for a different scheme");
    }
    let hist = FastHistory::new(approx, scheme, problem.u0.len());
    run_with_history(problem, scheme, Box::new(hist), None)
}

/// Builds the approximation for `eps_target` and runs the fast scheme.
/// The build precision is `tau^alpha eps_target`, floored at [`eps_floor`].
pub fn run_fast_auto(
    problem: &ProblemSpec,
    scheme: &SchemeConfig,
    eps_target: f64,
) -> Result<Trajectory> {
    let approx = build_for_scheme(scheme, eps_target)?;
    run_fast(problem, scheme, &approx)
}

pub fn build_for_scheme(scheme: &SchemeConfig, eps_target: f64) -> Result<ExpSumApprox> {
    let eps = (scheme.tau.powf(scheme.alpha()) * eps_target).max(eps_floor(scheme.n_steps));
    let n0 = default_n0(&scheme.gf, scheme.m());
    build_exp_sum(&scheme.gf, scheme.tau, scheme.n_steps, n0, eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn phi_examples() {
        let g = GeneratingFunction::fbdf1(0.5).unwrap();
        assert_relative_eq!(phi(&g, 0.1, 0.0).unwrap(), -1.0 / PI, epsilon = 1e-15);
        let g1 = GeneratingFunction::fbdf1(1.0).unwrap();
        assert!(phi(&g1, 0.1, 0.3).unwrap().abs() < 1e-15);
        assert!(phi(&GeneratingFunction::cn_linear(0.5).unwrap(), 0.1, 0.0).is_err());
    }

    #[test]
    fn node_range_examples() {
        let (x_min, _) = node_range(0.5, 1.0 / 1024.0, 1024, 16, 1e-10);
        assert_relative_eq!(x_min, (1e-10f64).ln() / 1.5, epsilon = 1e-12);
        let tau = 1.0 / 1024.0;
        let (_, x_max) = node_range(0.5, tau, 1024, 32, 1e-10);
        let a = -2.0 * (1e-10f64).ln() + 3.0 * (32.0 * tau).ln();
        // agrees with ln(A / (n0 tau)) to first order in A / n0
        assert!((x_max - (a / (32.0 * tau)).ln()).abs() < a / 32.0);
        // tiny steps fall back to the step-independent tail bound
        let (_, x_small) = node_range(0.8, 1e-6, 4096, 32, 1e-10);
        let a_rel = -(1e-10f64).ln() + 1.8 * 32f64.ln() + 2.0;
        assert!((x_small - ((a_rel / 32.0).exp_m1() / 1e-6).ln()).abs() < 1e-12);
    }

    #[test]
    fn rejects_integer_order() {
        let g = GeneratingFunction::fbdf1(1.0).unwrap();
        assert!(build_exp_sum(&g, 0.01, 1000, 16, 1e-8).is_err());
    }

    #[test]
    fn single_update_closed_form() {
        let g = GeneratingFunction::fbdf1(0.5).unwrap();
        let a = build_with_nodes(&g, 0.01, 1000, 16, 1e-8, 8).unwrap();
        let mut s = FastHistoryState::new(&a, 2);
        history_update(&mut s, &[1.0, 1.0], &[1.0, 1.0]);
        assert!(s.y.iter().all(|v| *v == 0.0));
        history_update(&mut s, &[3.0, 2.0], &[1.0, 1.0]);
        for l in 0..8 {
            let z = a.decay[l];
            assert_relative_eq!(s.node(l)[0], z * (z * 0.0 + 0.01 * 2.0), epsilon = 1e-16);
            assert_relative_eq!(s.node(l)[1], z * 0.01, epsilon = 1e-16);
        }
    }
}
