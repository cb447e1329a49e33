//! Experiment driver: problem presets, reference solutions, convergence
//! studies, rate bookkeeping and the tabular reports behind the CLI.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::corrections::{condition_number, suggest_sigmas, CorrectionConfig};
use crate::cq_weights::{
    b_coeffs, c_coeffs, check_assumptions, omega_weights, Family, GeneratingFunction,
};
use crate::error::{Error, Result};
use crate::fast_history::{build_for_scheme, run_fast, validate};
use crate::mittag_leffler::{ml_neg, ml_neg_with_branch};
use crate::spatial_ops::{Fd2d, Rect, ScalarMode, SineSpectral2D, SpatialOperator};
use crate::stepper::{
    run_direct, ProblemSpec, Reaction, SchemeConfig, Snapshots, Trajectory,
};

/// Diffusion coefficient that puts the lowest sine mode on the unit square
/// at eigenvalue `-1`.
pub const UNIT_KAPPA: f64 = 1.0 / (2.0 * PI * PI);

/// L2 norm of `sin(pi x) sin(pi y)` on the unit square.
pub const MODE_NORM: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Case1Scalar,
    Case1Fd,
    Case1Spectral,
    Case2Spectral,
    Custom,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Case1Scalar => "case1_scalar",
            Preset::Case1Fd => "case1_fd",
            Preset::Case1Spectral => "case1_spectral",
            Preset::Case2Spectral => "case2_spectral",
            Preset::Custom => "custom",
        }
    }

    pub fn is_case1(self) -> bool {
        matches!(self, Preset::Case1Scalar | Preset::Case1Fd | Preset::Case1Spectral)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigmaRule {
    Named(String),
    Explicit(Vec<f64>),
}

impl SigmaRule {
    /// The first `m` exponents.
    pub fn sigmas(&self, alpha: f64, m: usize) -> Result<Vec<f64>> {
        match self {
            SigmaRule::Named(s) if s == "k_alpha" => Ok(suggest_sigmas(alpha, m, true)),
            SigmaRule::Named(s) if s == "mixed" => Ok(suggest_sigmas(alpha, m, false)),
            SigmaRule::Named(s) => Err(Error::Config(format!(
                "field `sigma`: unknown rule {s:?} (expected \"k_alpha\", \"mixed\" or a list)"
            ))),
            SigmaRule::Explicit(v) if v.len() >= m => Ok(v[..m].to_vec()),
            SigmaRule::Explicit(v) => Err(Error::Config(format!(
                "field `sigma`: {} exponents given, {m} corrections requested",
                v.len()
            ))),
        }
    }

    /// `sigma_{m+1}` when the rule defines it.
    pub fn next(&self, alpha: f64, m: usize) -> Option<f64> {
        self.sigmas(alpha, m + 1).ok().map(|s| s[m])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    /// `||u^{n_T} - u(T)||`.
    Final,
    /// `max_{1 <= n <= n_T} ||u^n - u(t_n)||`.
    Max,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FastFine {
    /// `tau_ref = 2^-j`.
    #[serde(default = "default_ref_j")]
    pub j: i32,
    #[serde(default = "default_ref_m")]
    pub m: usize,
    #[serde(default = "default_ref_eps")]
    pub eps: f64,
}

fn default_ref_j() -> i32 {
    14
}
fn default_ref_m() -> usize {
    1
}
fn default_ref_eps() -> f64 {
    1e-10
}

impl Default for FastFine {
    fn default() -> Self {
        FastFine { j: default_ref_j(), m: default_ref_m(), eps: default_ref_eps() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum ReferencePolicy {
    ExactMl,
    FastFine(FastFine),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Scalar,
    Fd,
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReactionKind {
    Zero,
    Linear,
    AllenCahn,
}

/// Problem definition for the `custom` preset. The initial state is always
/// the lowest sine mode on the unit square (or `1` in scalar mode).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomProblem {
    pub operator: OperatorKind,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    /// Eigenvalue in scalar mode.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_mode_norm")]
    pub mode_norm: f64,
    pub reaction: ReactionKind,
    #[serde(default)]
    pub slope: f64,
}

fn default_kappa() -> f64 {
    UNIT_KAPPA
}
fn default_lambda() -> f64 {
    -1.0
}
fn default_mode_norm() -> f64 {
    MODE_NORM
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightsSection {
    pub n: usize,
}

impl Default for WeightsSection {
    fn default() -> Self {
        WeightsSection { n: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AssumptionsSection {
    pub n: usize,
    pub tol: f64,
    pub alphas: Vec<f64>,
    pub thetas: Vec<f64>,
}

impl Default for AssumptionsSection {
    fn default() -> Self {
        AssumptionsSection {
            n: 2000,
            tol: 1e-12,
            alphas: (1..=9).map(|k| k as f64 / 10.0).collect(),
            thetas: (0..=5).map(|k| k as f64 / 10.0).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CondSection {
    pub alphas: Vec<f64>,
    pub m_max: usize,
    pub tau: f64,
}

impl Default for CondSection {
    fn default() -> Self {
        CondSection { alphas: vec![0.2, 0.5, 0.8], m_max: 6, tau: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FastSection {
    pub j: i32,
    pub m: usize,
    pub eps: f64,
}

impl Default for FastSection {
    fn default() -> Self {
        FastSection { j: 9, m: 1, eps: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchSection {
    pub n_steps: usize,
    pub m: usize,
    pub eps: f64,
}

impl Default for BenchSection {
    fn default() -> Self {
        BenchSection { n_steps: 1 << 15, m: 1, eps: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SnapshotSection {
    pub alphas: Vec<f64>,
    pub times: Vec<f64>,
    pub tau: f64,
    pub m: usize,
}

impl Default for SnapshotSection {
    fn default() -> Self {
        SnapshotSection {
            alphas: vec![0.2, 0.5, 0.8],
            times: vec![1.0, 5.0, 10.0, 20.0],
            tau: 0.01,
            m: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlSection {
    pub alphas: Vec<f64>,
    pub xs: Vec<f64>,
}

impl Default for MlSection {
    fn default() -> Self {
        MlSection {
            alphas: vec![0.2, 0.5, 0.8],
            xs: vec![0.0, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0, 100.0],
        }
    }
}

/// Everything an experiment needs. Loaded from TOML; every key has a
/// default except inside `[custom]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub alpha: f64,
    pub family: String,
    pub theta: Option<f64>,
    pub m: Vec<usize>,
    pub sigma: SigmaRule,
    pub j: Vec<i32>,
    pub t_final: f64,
    /// Interior points per direction (fd) or modes per direction (spectral).
    pub resolution: usize,
    pub norm: Norm,
    pub reference: ReferencePolicy,
    pub custom: Option<CustomProblem>,
    pub weights: WeightsSection,
    pub assumptions: AssumptionsSection,
    pub cond: CondSection,
    pub fast: FastSection,
    pub bench: BenchSection,
    pub snapshot: SnapshotSection,
    pub ml: MlSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            preset: Preset::Case1Scalar,
            alpha: 0.5,
            family: "fbdf2".into(),
            theta: None,
            m: vec![0, 1, 2],
            sigma: SigmaRule::Named("k_alpha".into()),
            j: (5..=9).collect(),
            t_final: 1.0,
            resolution: 32,
            norm: Norm::Final,
            reference: ReferencePolicy::ExactMl,
            custom: None,
            weights: WeightsSection::default(),
            assumptions: AssumptionsSection::default(),
            cond: CondSection::default(),
            fast: FastSection::default(),
            bench: BenchSection::default(),
            snapshot: SnapshotSection::default(),
            ml: MlSection::default(),
        }
    }
}

/// Line of `key = ...` inside `[section]` (top level when `None`), 1-based.
fn locate(text: &str, section: Option<&str>, key: &str) -> Option<usize> {
    let mut current: Option<String> = None;
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.starts_with('[') {
            current = Some(t.trim_matches(|c| c == '[' || c == ']').trim().to_string());
            continue;
        }
        let Some((k, _)) = t.split_once('=') else { continue };
        if k.trim() == key && current.as_deref() == section {
            return Some(i + 1);
        }
    }
    None
}

fn field_error(text: &str, section: Option<&str>, key: &str, msg: impl std::fmt::Display) -> Error {
    let name = match section {
        Some(s) => format!("{s}.{key}"),
        None => key.to_string(),
    };
    match locate(text, section, key) {
        Some(line) => Error::Config(format!("line {line}, field `{name}`: {msg}")),
        None => Error::Config(format!("field `{name}`: {msg}")),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
        cfg.validate_with(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with("")
    }

    fn validate_with(&self, text: &str) -> Result<()> {
        let err = |key: &str, msg: String| Err(field_error(text, None, key, msg));
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return err("alpha", format!("must lie in (0, 1], got {}", self.alpha));
        }
        if Family::parse(&self.family).is_none() {
            return err("family", format!("unknown family {:?}", self.family));
        }
        if let Err(e) = self.generating_function() {
            return err("theta", e.to_string());
        }
        if self.j.is_empty() || self.j.iter().any(|&j| !(0..=20).contains(&j)) {
            return err("j", "needs entries in 0..=20".into());
        }
        if let Some(&m) = self.m.iter().max() {
            if let Err(e) = self.sigma.sigmas(self.alpha, m) {
                return err("sigma", e.to_string().trim_start_matches("config error: ").into());
            }
            if let Err(e) = CorrectionConfig::new(self.sigma.sigmas(self.alpha, m)?) {
                return err("sigma", e.to_string());
            }
        } else {
            return err("m", "needs at least one entry".into());
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return err("t_final", format!("must be positive, got {}", self.t_final));
        }
        if self.resolution < 2 {
            return err("resolution", format!("must be at least 2, got {}", self.resolution));
        }
        match (&self.preset, &self.custom) {
            (Preset::Custom, None) => {
                return err("preset", "custom preset needs a [custom] section".into())
            }
            (Preset::Custom, Some(_)) => {}
            (_, Some(_)) => {
                return Err(field_error(
                    text,
                    None,
                    "preset",
                    "[custom] is only read by the custom preset",
                ))
            }
            _ => {}
        }
        match &self.reference {
            ReferencePolicy::ExactMl if self.exact_rate().is_none() => {
                return Err(field_error(
                    text,
                    Some("reference"),
                    "policy",
                    format!("{} has no Mittag-Leffler solution", self.preset.name()),
                ))
            }
            ReferencePolicy::FastFine(_) if self.preset.is_case1() => {
                return Err(field_error(
                    text,
                    Some("reference"),
                    "policy",
                    "case1 presets use the exact_ml reference",
                ))
            }
            ReferencePolicy::FastFine(f) => {
                if f.m < 1 || f.j <= *self.j.iter().max().unwrap() || f.j > 24 {
                    return Err(field_error(
                        text,
                        Some("reference"),
                        "j",
                        "reference needs m >= 1 and a finer step than every study step",
                    ));
                }
                if !(f.eps > 1e-14 && f.eps < 1e-4) {
                    return Err(field_error(text, Some("reference"), "eps", "must lie in (1e-14, 1e-4)"));
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn generating_function(&self) -> Result<GeneratingFunction> {
        let family = Family::parse(&self.family)
            .ok_or_else(|| Error::Config(format!("unknown family {:?}", self.family)))?;
        GeneratingFunction::new(family, self.alpha, self.theta)
    }

    pub fn corrections(&self, m: usize) -> Result<CorrectionConfig> {
        CorrectionConfig::new(self.sigma.sigmas(self.alpha, m)?)
    }

    /// `mu` with `u(t) = E_alpha(mu t^alpha) u0`, when the preset is linear
    /// and starts from an eigenmode.
    pub fn exact_rate(&self) -> Option<f64> {
        match self.preset {
            p if p.is_case1() => Some(-1.0),
            Preset::Custom => {
                let c = self.custom.as_ref()?;
                let slope = match c.reaction {
                    ReactionKind::Zero => 0.0,
                    ReactionKind::Linear => c.slope,
                    ReactionKind::AllenCahn => return None,
                };
                let lambda = match c.operator {
                    OperatorKind::Scalar => c.lambda,
                    _ => -2.0 * PI * PI * c.kappa,
                };
                Some(lambda + slope)
            }
            _ => None,
        }
    }

    pub fn problem(&self) -> Result<ProblemSpec> {
        let n = self.resolution;
        let mode = |x: f64, y: f64| (PI * x).sin() * (PI * y).sin();
        let (op, reaction): (Arc<dyn SpatialOperator>, Reaction) = match self.preset {
            Preset::Case1Scalar => (Arc::new(ScalarMode::with_norm(-1.0, MODE_NORM)?), Reaction::Zero),
            Preset::Case1Fd => (Arc::new(Fd2d::new(UNIT_KAPPA, n, n, Rect::UNIT)?), Reaction::Zero),
            Preset::Case1Spectral => {
                (Arc::new(SineSpectral2D::with_cutoff(UNIT_KAPPA, n, Rect::UNIT)?), Reaction::Zero)
            }
            Preset::Case2Spectral => (
                Arc::new(SineSpectral2D::with_cutoff(UNIT_KAPPA, n, Rect::UNIT)?),
                Reaction::AllenCahn,
            ),
            Preset::Custom => {
                let c = self
                    .custom
                    .as_ref()
                    .ok_or_else(|| Error::Config("custom preset needs a [custom] section".into()))?;
                let op: Arc<dyn SpatialOperator> = match c.operator {
                    OperatorKind::Scalar => Arc::new(ScalarMode::with_norm(c.lambda, c.mode_norm)?),
                    OperatorKind::Fd => Arc::new(Fd2d::new(c.kappa, n, n, Rect::UNIT)?),
                    OperatorKind::Spectral => {
                        Arc::new(SineSpectral2D::with_cutoff(c.kappa, n, Rect::UNIT)?)
                    }
                };
                let reaction = match c.reaction {
                    ReactionKind::Zero => Reaction::Zero,
                    ReactionKind::Linear => Reaction::Linear(c.slope),
                    ReactionKind::AllenCahn => Reaction::AllenCahn,
                };
                (op, reaction)
            }
        };
        if op.dof() == 1 {
            ProblemSpec::new(op, reaction, vec![1.0], self.t_final)
        } else {
            ProblemSpec::sampled(op, reaction, &mode, self.t_final)
        }
    }
}

/// Values the discrete solutions are compared against.
#[derive(Debug, Clone)]
pub enum Reference {
    /// `u(t) = E_alpha(mu t^alpha) u0`.
    Exact { alpha: f64, mu: f64, u0: Vec<f64> },
    Numerical(Trajectory),
}

impl Reference {
    pub fn at(&self, t: f64) -> Result<Vec<f64>> {
        match self {
            Reference::Exact { alpha, mu, u0 } => {
                if *mu > 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "exact reference needs a decaying mode, got rate {mu}"
                    )));
                }
                let e = ml_neg(*alpha, -mu * t.powf(*alpha))?;
                Ok(u0.iter().map(|v| e * v).collect())
            }
            Reference::Numerical(tr) => {
                let n = (t / tr.tau).round() as usize;
                if (n as f64 * tr.tau - t).abs() > 1e-9 * t.max(1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "t = {t} is not on the reference grid"
                    )));
                }
                tr.get(n).map(<[f64]>::to_vec).ok_or_else(|| {
                    Error::InvalidParameter(format!("reference stores no state at t = {t}"))
                })
            }
        }
    }
}

/// Fine-step numerical reference for problems without a closed form.
///
/// `every` requests stored states at multiples of that time step, which must
/// be a multiple of the reference step; otherwise only the final state is
/// kept.
pub fn reference_solution(
    cfg: &ExperimentConfig,
    spec: &FastFine,
    every: Option<f64>,
) -> Result<Trajectory> {
    if cfg.preset.is_case1() {
        return Err(Error::InvalidParameter(format!(
            "{} has an exact Mittag-Leffler solution",
            cfg.preset.name()
        )));
    }
    let problem = cfg.problem()?;
    fine_run(&problem, &cfg.generating_function()?, cfg, spec, every)
}

fn fine_run(
    problem: &ProblemSpec,
    gf: &GeneratingFunction,
    cfg: &ExperimentConfig,
    spec: &FastFine,
    every: Option<f64>,
) -> Result<Trajectory> {
    let tau = 2f64.powi(-spec.j);
    let snapshots = match every {
        Some(dt) => {
            let k = (dt / tau).round();
            if k < 1.0 || (k * tau - dt).abs() > 1e-12 * dt {
                return Err(Error::InvalidParameter(format!(
                    "snapshot spacing {dt} is not a multiple of the reference step {tau}"
                )));
            }
            Snapshots::Every(k as usize)
        }
        None => Snapshots::Final,
    };
    let scheme = SchemeConfig::for_problem(problem, gf.clone(), cfg.corrections(spec.m)?, tau)?
        .with_snapshots(snapshots);
    if gf.alpha() < 1.0 {
        let approx = build_for_scheme(&scheme, spec.eps)?;
        run_fast(problem, &scheme, &approx)
    } else {
        run_direct(problem, &scheme)
    }
}

/// Self-check of a numerical reference against one computed with half the
/// step.
#[derive(Debug, Clone)]
pub struct RichardsonCheck {
    pub reference: Trajectory,
    pub halved: Trajectory,
    /// `||u_ref(T) - u_{ref/2}(T)||`.
    pub drift: f64,
}

pub fn richardson_check(cfg: &ExperimentConfig, spec: &FastFine) -> Result<RichardsonCheck> {
    let reference = reference_solution(cfg, spec, None)?;
    let halved = reference_solution(cfg, &FastFine { j: spec.j + 1, ..spec.clone() }, None)?;
    let op = cfg.problem()?.op;
    let d: Vec<f64> =
        reference.final_state().iter().zip(halved.final_state()).map(|(a, b)| a - b).collect();
    let drift = op.l2_norm(&d);
    Ok(RichardsonCheck { reference, halved, drift })
}

/// The reference selected by the config's policy, with states at every
/// study time step when `norm` needs them.
pub fn build_reference(cfg: &ExperimentConfig) -> Result<Reference> {
    match &cfg.reference {
        ReferencePolicy::ExactMl => {
            let mu = cfg.exact_rate().ok_or_else(|| {
                Error::Config(format!("{} has no Mittag-Leffler solution", cfg.preset.name()))
            })?;
            Ok(Reference::Exact { alpha: cfg.alpha, mu, u0: cfg.problem()?.u0 })
        }
        ReferencePolicy::FastFine(spec) => {
            let every = match cfg.norm {
                Norm::Final => None,
                Norm::Max => Some(2f64.powi(-cfg.j.iter().copied().max().unwrap_or(0))),
            };
            Ok(Reference::Numerical(reference_solution(cfg, spec, every)?))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    #[serde(rename = "J")]
    pub j: i32,
    pub m: usize,
    pub error: f64,
    /// `log2(error_{J-1} / error_J)`; absent for the first row of a column.
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictedRate {
    pub m: usize,
    pub sigma_next: f64,
    pub rate: f64,
    pub log_flag: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub preset: String,
    pub family: String,
    pub alpha: f64,
    pub norm: Norm,
    /// Exponents of the largest correction set; column `m` uses the first `m`.
    pub sigmas: Vec<f64>,
    pub predicted: Vec<PredictedRate>,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceReport {
    /// Errors of one column in increasing `J`.
    pub fn column(&self, m: usize) -> Vec<(i32, f64)> {
        self.rows.iter().filter(|r| r.m == m).map(|r| (r.j, r.error)).collect()
    }

    pub fn error(&self, j: i32, m: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.j == j && r.m == m).map(|r| r.error)
    }

    pub fn rate(&self, j: i32, m: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.j == j && r.m == m).and_then(|r| r.rate)
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&["J", "m", "error", "rate"]);
        for r in &self.rows {
            t.push(vec![
                Cell::Int(r.j as i64),
                Cell::Int(r.m as i64),
                Cell::Real(r.error),
                r.rate.map_or(Cell::Empty, Cell::Real),
            ]);
        }
        t.meta.insert("preset".into(), json!(self.preset));
        t.meta.insert("family".into(), json!(self.family));
        t.meta.insert("alpha".into(), json!(self.alpha));
        t.meta.insert("norm".into(), json!(self.norm));
        t.meta.insert("sigmas".into(), json!(self.sigmas));
        t.meta.insert("predicted".into(), json!(self.predicted));
        t
    }
}

pub fn convergence_study(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let reference = build_reference(cfg)?;
    convergence_study_with(cfg, &reference)
}

/// Both norms from one set of runs.
pub fn convergence_study_both(
    cfg: &ExperimentConfig,
    reference: &Reference,
) -> Result<(ConvergenceReport, ConvergenceReport)> {
    let fin = ExperimentConfig { norm: Norm::Final, ..cfg.clone() };
    let max = ExperimentConfig { norm: Norm::Max, ..cfg.clone() };
    let cells = study_cells(&max, reference)?;
    Ok((assemble(&fin, &cells)?, assemble(&max, &cells)?))
}

/// Study against a precomputed reference.
pub fn convergence_study_with(
    cfg: &ExperimentConfig,
    reference: &Reference,
) -> Result<ConvergenceReport> {
    let cells = study_cells(cfg, reference)?;
    assemble(cfg, &cells)
}

struct Cell2 {
    j: i32,
    m: usize,
    final_err: f64,
    max_err: f64,
}

fn study_cells(cfg: &ExperimentConfig, reference: &Reference) -> Result<Vec<Cell2>> {
    let problem = cfg.problem()?;
    let gf = cfg.generating_function()?;
    let mut ms = cfg.m.clone();
    ms.sort_unstable();
    ms.dedup();
    let mut js = cfg.j.clone();
    js.sort_unstable();
    js.dedup();
    let cells: Vec<(usize, i32)> =
        ms.iter().flat_map(|&m| js.iter().map(move |&j| (m, j))).collect();
    let need_all = cfg.norm == Norm::Max;
    cells
        .par_iter()
        .map(|&(m, j)| {
            let tau = 2f64.powi(-j);
            let scheme =
                SchemeConfig::for_problem(&problem, gf.clone(), cfg.corrections(m)?, tau)?
                    .with_snapshots(if need_all { Snapshots::All } else { Snapshots::Final });
            let tr = run_direct(&problem, &scheme)?;
            let op = problem.op.as_ref();
            let err = |n: usize, u: &[f64]| -> Result<f64> {
                let r = reference.at(tr.time(n))?;
                let d: Vec<f64> = u.iter().zip(&r).map(|(a, b)| a - b).collect();
                Ok(op.l2_norm(&d))
            };
            let final_err = err(tr.n_steps, tr.final_state())?;
            let mut max_err = final_err;
            if need_all {
                for (n, u) in tr.snapshots.iter().skip(1) {
                    max_err = max_err.max(err(*n, u)?);
                }
            }
            Ok(Cell2 { j, m, final_err, max_err })
        })
        .collect()
}

fn assemble(cfg: &ExperimentConfig, cells: &[Cell2]) -> Result<ConvergenceReport> {
    let gf = cfg.generating_function()?;
    let p = gf.order() as f64;
    let m_max = cfg.m.iter().copied().max().unwrap_or(0);
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(cells.len());
    for c in cells {
        let error = match cfg.norm {
            Norm::Final => c.final_err,
            Norm::Max => c.max_err,
        };
        let rate = match rows.last() {
            Some(prev) if prev.m == c.m && prev.error > 0.0 && error > 0.0 => {
                Some((prev.error / error).log2())
            }
            _ => None,
        };
        rows.push(ConvergenceRow { j: c.j, m: c.m, error, rate });
    }
    let mut ms = cfg.m.clone();
    ms.sort_unstable();
    ms.dedup();
    let predicted = ms
        .iter()
        .filter_map(|&m| {
            let s = cfg.sigma.next(cfg.alpha, m)?;
            let (rate, log_flag) = predicted_rate(cfg.alpha, s, p);
            Some(PredictedRate { m, sigma_next: s, rate, log_flag })
        })
        .collect();
    Ok(ConvergenceReport {
        preset: cfg.preset.name().into(),
        family: gf.label(),
        alpha: cfg.alpha,
        norm: cfg.norm,
        sigmas: cfg.sigma.sigmas(cfg.alpha, m_max)?,
        predicted,
        rows,
    })
}

/// `log2` of successive error ratios.
pub fn observed_rate(errors: &[f64]) -> Result<Vec<f64>> {
    if errors.len() < 2 {
        return Err(Error::InvalidParameter("need at least two errors".into()));
    }
    if let Some(e) = errors.iter().find(|e| !(**e > 0.0)) {
        return Err(Error::InvalidParameter(format!("errors must be positive, got {e}")));
    }
    Ok(errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect())
}

const EXPONENT_TIE: f64 = 1e-12;

/// Rate `min(sigma_next - alpha + 1/2, p)` of the error bound, and whether
/// the bound carries a logarithmic factor.
pub fn predicted_rate(alpha: f64, sigma_next: f64, p: f64) -> (f64, bool) {
    let r = sigma_next - alpha + 0.5;
    (r.min(p), (r - p).abs() < EXPONENT_TIE)
}

/// `n^max(alpha - 1, 2 sigma - 2p - alpha)`, or `n^(alpha - 1) ln n` when
/// the two exponents coincide.
pub fn ell_n(alpha: f64, sigma: f64, p: f64, n: f64) -> f64 {
    let a = alpha - 1.0;
    let b = 2.0 * sigma - 2.0 * p - alpha;
    if (a - b).abs() < EXPONENT_TIE {
        n.powf(a) * n.ln()
    } else {
        n.powf(a.max(b))
    }
}

/// One value in a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Real(f64),
    Text(String),
    Flag(bool),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Real(v) => format!("{v:e}"),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
            Cell::Flag(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }
}

/// Columnar report with a fixed header and free-form metadata.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub meta: BTreeMap<String, Value>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            meta: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Cell::csv).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tables serialize") + "\n"
    }
}

/// Convolution weights and the `b`, `c` coefficients of the configured family.
pub fn weights_table(cfg: &ExperimentConfig) -> Result<Table> {
    let gf = cfg.generating_function()?;
    let n = cfg.weights.n;
    let omega = match omega_weights(&gf, n) {
        Ok(w) => Some(w),
        Err(Error::NoConvolutionWeights(_)) => None,
        Err(e) => return Err(e),
    };
    let b = b_coeffs(&gf, n);
    let c = c_coeffs(&gf, n);
    let mut t = Table::new(&["n", "omega", "b", "c"]);
    for k in 0..=n {
        t.push(vec![
            Cell::Int(k as i64),
            omega.as_ref().map_or(Cell::Empty, |w| Cell::Real(w.get(k))),
            Cell::Real(b.get(k)),
            Cell::Real(c.get(k)),
        ]);
    }
    t.meta.insert("family".into(), json!(gf.label()));
    t.meta.insert("alpha".into(), json!(gf.alpha()));
    Ok(t)
}

/// Every family over the configured `alpha` (and `theta`) grid.
pub fn assumption_table(cfg: &ExperimentConfig) -> Result<Table> {
    let s = &cfg.assumptions;
    let mut gfs = Vec::new();
    for &alpha in &s.alphas {
        for family in [Family::Fbdf1, Family::Fbdf2, Family::Gngf2, Family::CnLinear, Family::CnBinom]
        {
            gfs.push(GeneratingFunction::new(family, alpha, None)?);
        }
        for &theta in &s.thetas {
            gfs.push(GeneratingFunction::bn_theta(alpha, theta)?);
        }
    }
    let reports: Vec<_> = gfs.par_iter().map(|g| (g, check_assumptions(g, s.n, s.tol))).collect();
    let mut t = Table::new(&[
        "family", "theta", "alpha", "b0", "tail_sum", "c0", "min_c", "decay_exponent", "pass",
    ]);
    let mut failures = 0;
    for (g, r) in &reports {
        failures += usize::from(!r.passed());
        t.push(vec![
            Cell::Text(g.family().name().into()),
            g.theta().map_or(Cell::Empty, Cell::Real),
            Cell::Real(r.alpha),
            Cell::Real(r.b0),
            Cell::Real(r.tail_sum),
            Cell::Real(r.c0),
            Cell::Real(r.min_c),
            Cell::Real(r.decay_exponent),
            Cell::Flag(r.passed()),
        ]);
    }
    t.meta.insert("n".into(), json!(s.n));
    t.meta.insert("failures".into(), json!(failures));
    Ok(t)
}

/// Condition numbers of the starting-weight systems.
pub fn cond_table(cfg: &ExperimentConfig) -> Result<Table> {
    let s = &cfg.cond;
    let mut t = Table::new(&["alpha", "m", "tau", "condition"]);
    for &alpha in &s.alphas {
        for m in 1..=s.m_max {
            let sig = cfg.sigma.sigmas(alpha, m)?;
            let c = condition_number(&CorrectionConfig::new(sig)?, s.tau);
            t.push(vec![Cell::Real(alpha), Cell::Int(m as i64), Cell::Real(s.tau), Cell::Real(c)]);
        }
    }
    Ok(t)
}

/// Direct and fast runs of the configured problem at one step size.
pub fn fast_compare_table(cfg: &ExperimentConfig) -> Result<Table> {
    let s = &cfg.fast;
    let problem = cfg.problem()?;
    let gf = cfg.generating_function()?;
    let scheme =
        SchemeConfig::for_problem(&problem, gf, cfg.corrections(s.m)?, 2f64.powi(-s.j))?
            .with_snapshots(Snapshots::All);
    let start = Instant::now();
    let approx = build_for_scheme(&scheme, s.eps)?;
    let build_time = start.elapsed();
    let report = validate(&approx, scheme.omega());
    let direct = run_direct(&problem, &scheme)?;
    let fast = run_fast(&problem, &scheme, &approx)?;
    let deviation = max_deviation(problem.op.as_ref(), &direct, &fast);
    let mut t = Table::new(&[
        "n_steps", "n0", "q", "eps", "max_rel_error", "valid", "max_deviation", "direct_s", "fast_s",
        "build_s",
    ]);
    t.push(vec![
        Cell::Int(scheme.n_steps as i64),
        Cell::Int(approx.n0 as i64),
        Cell::Int(approx.q as i64),
        Cell::Real(approx.eps),
        Cell::Real(report.max_rel_error),
        Cell::Flag(report.pass),
        Cell::Real(deviation),
        Cell::Real(direct.wall_time.as_secs_f64()),
        Cell::Real(fast.wall_time.as_secs_f64()),
        Cell::Real(build_time.as_secs_f64()),
    ]);
    Ok(t)
}

/// `max_n ||u_a^n - u_b^n||` over the states both trajectories store.
pub fn max_deviation(op: &dyn SpatialOperator, a: &Trajectory, b: &Trajectory) -> f64 {
    a.snapshots
        .iter()
        .filter_map(|(n, u)| {
            let v = b.get(*n)?;
            let d: Vec<f64> = u.iter().zip(v).map(|(x, y)| x - y).collect();
            Some(op.l2_norm(&d))
        })
        .fold(0.0, f64::max)
}

/// Timing and history memory of direct against fast runs on the scalar
/// problem `D^alpha u = -u`.
#[derive(Debug, Clone, Serialize)]
pub struct BenchResult {
    pub n_steps: usize,
    pub q: usize,
    pub n0: usize,
    pub direct_history_s: f64,
    pub fast_history_s: f64,
    pub direct_total_s: f64,
    pub fast_total_s: f64,
    pub direct_peak_bytes: usize,
    pub fast_peak_bytes: usize,
    pub max_deviation: f64,
}

impl BenchResult {
    pub fn time_ratio(&self) -> f64 {
        self.fast_history_s / self.direct_history_s
    }

    pub fn memory_ratio(&self) -> f64 {
        self.fast_peak_bytes as f64 / self.direct_peak_bytes as f64
    }

    pub fn memory_bound(&self) -> f64 {
        (self.q + self.n0) as f64 / self.n_steps as f64
    }
}

pub fn bench(cfg: &ExperimentConfig) -> Result<BenchResult> {
    let s = &cfg.bench;
    let op = Arc::new(ScalarMode::with_norm(-1.0, MODE_NORM)?);
    let problem = ProblemSpec::new(op.clone(), Reaction::Zero, vec![1.0], 1.0)?;
    let gf = cfg.generating_function()?;
    let scheme = SchemeConfig::for_problem(
        &problem,
        gf,
        cfg.corrections(s.m)?,
        1.0 / s.n_steps as f64,
    )?
    .with_snapshots(Snapshots::All);
    let approx = build_for_scheme(&scheme, s.eps)?;
    let direct = run_direct(&problem, &scheme)?;
    let fast = run_fast(&problem, &scheme, &approx)?;
    Ok(BenchResult {
        n_steps: scheme.n_steps,
        q: approx.q,
        n0: approx.n0,
        direct_history_s: direct.history.time.as_secs_f64(),
        fast_history_s: fast.history.time.as_secs_f64(),
        direct_total_s: direct.wall_time.as_secs_f64(),
        fast_total_s: fast.wall_time.as_secs_f64(),
        direct_peak_bytes: direct.history.peak_bytes,
        fast_peak_bytes: fast.history.peak_bytes,
        max_deviation: max_deviation(op.as_ref(), &direct, &fast),
    })
}

pub fn bench_table(cfg: &ExperimentConfig) -> Result<Table> {
    let r = bench(cfg)?;
    let mut t = Table::new(&["method", "n_steps", "history_s", "total_s", "peak_bytes"]);
    t.push(vec![
        Cell::Text("direct".into()),
        Cell::Int(r.n_steps as i64),
        Cell::Real(r.direct_history_s),
        Cell::Real(r.direct_total_s),
        Cell::Int(r.direct_peak_bytes as i64),
    ]);
    t.push(vec![
        Cell::Text("fast".into()),
        Cell::Int(r.n_steps as i64),
        Cell::Real(r.fast_history_s),
        Cell::Real(r.fast_total_s),
        Cell::Int(r.fast_peak_bytes as i64),
    ]);
    t.meta.insert("q".into(), json!(r.q));
    t.meta.insert("n0".into(), json!(r.n0));
    t.meta.insert("time_ratio".into(), json!(r.time_ratio()));
    t.meta.insert("memory_ratio".into(), json!(r.memory_ratio()));
    t.meta.insert("memory_bound".into(), json!(r.memory_bound()));
    t.meta.insert("max_deviation".into(), json!(r.max_deviation));
    Ok(t)
}

pub fn ml_table(cfg: &ExperimentConfig) -> Result<Table> {
    let mut t = Table::new(&["alpha", "x", "value", "branch"]);
    for &alpha in &cfg.ml.alphas {
        for &x in &cfg.ml.xs {
            let (v, b) = ml_neg_with_branch(alpha, x)?;
            t.push(vec![
                Cell::Real(alpha),
                Cell::Real(x),
                Cell::Real(v),
                Cell::Text(format!("{b:?}").to_lowercase()),
            ]);
        }
    }
    Ok(t)
}

/// Physical fields of one problem at several times.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub alpha: f64,
    pub t: f64,
    pub norm: f64,
    pub grid: Vec<(f64, f64)>,
    pub values: Vec<f64>,
}

/// Solutions of the configured problem for each `alpha` in the snapshot
/// section, sampled at the requested times.
pub fn snapshots(cfg: &ExperimentConfig) -> Result<Vec<Snapshot>> {
    let s = &cfg.snapshot;
    let t_end = s.times.iter().copied().fold(0.0, f64::max);
    if !(t_end > 0.0) || s.times.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::Config("field `snapshot.times`: needs positive times".into()));
    }
    let mut targets = Vec::new();
    for &t in &s.times {
        let n = (t / s.tau).round();
        if (n * s.tau - t).abs() > 1e-9 * t {
            return Err(Error::Config(format!(
                "field `snapshot.times`: {t} is not a multiple of tau = {}",
                s.tau
            )));
        }
        targets.push(n as usize);
    }
    let runs: Vec<Result<Vec<Snapshot>>> = s
        .alphas
        .par_iter()
        .map(|&alpha| {
            let c = ExperimentConfig { alpha, t_final: t_end, ..cfg.clone() };
            let problem = c.problem()?;
            let scheme = SchemeConfig::for_problem(
                &problem,
                c.generating_function()?,
                c.corrections(s.m)?,
                s.tau,
            )?;
            let tr = run_direct(&problem, &scheme)?;
            let op = problem.op.as_ref();
            let grid = op.grid();
            targets
                .iter()
                .zip(&s.times)
                .map(|(&n, &t)| {
                    let u = tr.get(n).ok_or_else(|| {
                        Error::InvalidParameter(format!("no state stored at step {n}"))
                    })?;
                    Ok(Snapshot {
                        alpha,
                        t,
                        norm: op.l2_norm(u),
                        grid: grid.clone(),
                        values: op.to_physical(u),
                    })
                })
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    for r in runs {
        out.extend(r?);
    }
    Ok(out)
}

pub fn snapshot_table(cfg: &ExperimentConfig) -> Result<Table> {
    let snaps = snapshots(cfg)?;
    let mut t = Table::new(&["alpha", "t", "x", "y", "u"]);
    let mut norms = Vec::new();
    for s in &snaps {
        norms.push(json!({ "alpha": s.alpha, "t": s.t, "l2_norm": s.norm }));
        for (&(x, y), &u) in s.grid.iter().zip(&s.values) {
            t.push(vec![Cell::Real(s.alpha), Cell::Real(s.t), Cell::Real(x), Cell::Real(y), Cell::Real(u)]);
        }
    }
    t.meta.insert("norms".into(), Value::Array(norms));
    Ok(t)
}
