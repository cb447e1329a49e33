//! Generating functions, convolution weights and the derived coefficient
//! series used by the stability theory.
//!
//! Every series is a truncated Taylor expansion `c_0 + c_1 z + ... + c_N z^N`.
//! The weights of a quadrature family are the coefficients of its generating
//! function `omega(z)`; the series `b(z) = (1 - z)^alpha / omega(z)`, its
//! absolute-value companion `bhat(z)` and `c(z) = (2 b_0 - bhat(z)) (1 - z)^-alpha`
//! decide whether the family satisfies the summability and positivity
//! assumptions of the convergence theory.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{invalid, Error, Result};

/// Quadrature family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// Fractional backward difference of order one (Grünwald-Letnikov).
    Fbdf1,
    /// Fractional backward difference of order two.
    Fbdf2,
    /// Generalized Newton-Gregory formula of order two.
    Gngf2,
    /// BN-theta family interpolating FBDF-2 (theta = 0) and GNGF-2 (theta = 1/2).
    BnTheta,
    /// Crank-Nicolson type with `b(z) = 1 - alpha/2 + alpha/2 z`.
    CnLinear,
    /// Crank-Nicolson type with `b(z) = 2^-alpha (1 + z)^alpha`.
    CnBinom,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Fbdf1,
        Family::Fbdf2,
        Family::Gngf2,
        Family::BnTheta,
        Family::CnLinear,
        Family::CnBinom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Fbdf1 => "FBDF-1",
            Family::Fbdf2 => "FBDF-2",
            Family::Gngf2 => "GNGF-2",
            Family::BnTheta => "BN-theta",
            Family::CnLinear => "CN-linear",
            Family::CnBinom => "CN-binomial",
        }
    }

    /// Parses the names accepted on the command line and in config files.
    pub fn parse(s: &str) -> Option<Family> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "fbdf1" | "gl" => Some(Family::Fbdf1),
            "fbdf2" => Some(Family::Fbdf2),
            "gngf2" => Some(Family::Gngf2),
            "bntheta" | "bn" => Some(Family::BnTheta),
            "cnlinear" => Some(Family::CnLinear),
            "cnbinom" | "cnbinomial" => Some(Family::CnBinom),
            _ => None,
        }
    }

    /// True for the families that only define `b(z)`.
    pub fn is_cn(self) -> bool {
        matches!(self, Family::CnLinear | Family::CnBinom)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A quadrature family together with its fractional order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratingFunction {
    family: Family,
    alpha: f64,
    theta: Option<f64>,
}

impl GeneratingFunction {
    pub fn new(family: Family, alpha: f64, theta: Option<f64>) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return invalid(format!("fractional order must lie in (0, 1], got {alpha}"));
        }
        match (family, theta) {
            (Family::BnTheta, Some(t)) if (0.0..=0.5).contains(&t) => {}
            (Family::BnTheta, Some(t)) => {
                return invalid(format!("BN-theta needs theta in [0, 1/2], got {t}"))
            }
            (Family::BnTheta, None) => return invalid("BN-theta needs a theta value"),
            (_, Some(_)) => return invalid(format!("{family} takes no theta")),
            (_, None) => {}
        }
        Ok(Self {
            family,
            alpha,
            theta,
        })
    }

    pub fn fbdf1(alpha: f64) -> Result<Self> {
        Self::new(Family::Fbdf1, alpha, None)
    }

    pub fn fbdf2(alpha: f64) -> Result<Self> {
        Self::new(Family::Fbdf2, alpha, None)
    }

    pub fn gngf2(alpha: f64) -> Result<Self> {
        Self::new(Family::Gngf2, alpha, None)
    }

    pub fn bn_theta(alpha: f64, theta: f64) -> Result<Self> {
        Self::new(Family::BnTheta, alpha, Some(theta))
    }

    pub fn cn_linear(alpha: f64) -> Result<Self> {
        Self::new(Family::CnLinear, alpha, None)
    }

    pub fn cn_binom(alpha: f64) -> Result<Self> {
        Self::new(Family::CnBinom, alpha, None)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn theta(&self) -> Option<f64> {
        self.theta
    }

    /// Nominal convergence order `p`.
    pub fn order(&self) -> u32 {
        match self.family {
            Family::Fbdf1 => 1,
            _ => 2,
        }
    }

    /// Same family at a different fractional order.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(self.family, alpha, self.theta)
    }

    /// `(r, s)` of the BN-theta factorization
    /// `b(z) = b_0 (1 - r z)^-alpha / (1 - s z)`.
    pub(crate) fn bn_ratios(&self) -> (f64, f64) {
        let theta = self.theta.unwrap_or(0.0);
        let ta = theta * self.alpha;
        ((1.0 - 2.0 * theta) / (3.0 - 2.0 * theta), ta / (1.0 + ta))
    }

    /// `b_0` of the BN-theta family.
    pub(crate) fn bn_b0(&self) -> f64 {
        let theta = self.theta.unwrap_or(0.0);
        (1.5 - theta).powf(-self.alpha) / (1.0 + theta * self.alpha)
    }

    pub fn label(&self) -> String {
        match self.theta {
            Some(t) => format!("{}(theta={t})", self.family),
            None => self.family.name().to_string(),
        }
    }
}

/// What a [`CoeffSeries`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    Omega,
    ABeta,
    B,
    BHat,
    C,
}

/// Truncated power series `values[0] + values[1] z + ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffSeries {
    pub kind: SeriesKind,
    /// Fractional order (the exponent `beta` for binomial series).
    pub alpha: f64,
    pub values: Vec<f64>,
}

impl CoeffSeries {
    pub fn new(kind: SeriesKind, alpha: f64, values: Vec<f64>) -> Self {
        debug_assert!(!values.is_empty());
        Self {
            kind,
            alpha,
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Highest retained index `N`.
    pub fn degree(&self) -> usize {
        self.values.len() - 1
    }

    pub fn get(&self, n: usize) -> f64 {
        self.values.get(n).copied().unwrap_or(0.0)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// Coefficients of `(1 - z)^beta` up to `z^n_max`.
pub fn binomial_coeffs(beta: f64, n_max: usize) -> CoeffSeries {
    CoeffSeries::new(SeriesKind::ABeta, beta, binomial_values(beta, n_max, 1.0))
}

/// Coefficients of `(1 - r z)^beta`.
fn binomial_values(beta: f64, n_max: usize, r: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(1.0);
    let mut prev = 1.0;
    for n in 1..=n_max {
        prev *= (n as f64 - 1.0 - beta) / n as f64 * r;
        out.push(prev);
    }
    out
}

/// Coefficients of `q(z)^beta` for a polynomial `q` with `q(0) != 0`, from the
/// recurrence `n q_0 w_n = sum_k ((beta + 1) k - n) q_k w_{n-k}`.
fn polynomial_power(q: &[f64], beta: f64, n_max: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(n_max + 1);
    w.push(q[0].powf(beta));
    for n in 1..=n_max {
        let mut acc = 0.0;
        for (k, &qk) in q.iter().enumerate().skip(1).take(n) {
            acc += ((beta + 1.0) * k as f64 - n as f64) * qk * w[n - k];
        }
        w.push(acc / (n as f64 * q[0]));
    }
    w
}

/// Cauchy product of `a` and `b` truncated at `z^n_max`; missing entries
/// count as zero.
pub fn convolve(a: &CoeffSeries, b: &CoeffSeries, n_max: usize) -> CoeffSeries {
    CoeffSeries::new(a.kind, a.alpha, cauchy(&a.values, &b.values, n_max))
}

pub(crate) fn cauchy(a: &[f64], b: &[f64], n_max: usize) -> Vec<f64> {
    (0..=n_max)
        .map(|n| {
            let lo = n.saturating_sub(b.len().saturating_sub(1));
            let hi = n.min(a.len().saturating_sub(1));
            if a.is_empty() || b.is_empty() || lo > hi {
                return 0.0;
            }
            (lo..=hi).map(|k| a[k] * b[n - k]).sum()
        })
        .collect()
}

/// Series quotient `num / den` truncated at `z^n_max`.
fn divide(num: &[f64], den: &[f64], n_max: usize) -> Vec<f64> {
    let mut q = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let mut acc = num.get(n).copied().unwrap_or(0.0);
        for k in 1..=n.min(den.len() - 1) {
            acc -= den[k] * q[n - k];
        }
        q.push(acc / den[0]);
    }
    q
}

/// Convolution weights `omega_n`, the Taylor coefficients of the family's
/// generating function.
pub fn omega_weights(gf: &GeneratingFunction, n_max: usize) -> Result<CoeffSeries> {
    let a = gf.alpha;
    let values = match gf.family {
        Family::Fbdf1 => binomial_values(a, n_max, 1.0),
        Family::Fbdf2 => polynomial_power(&[1.5, -2.0, 0.5], a, n_max),
        Family::Gngf2 => cauchy(
            &binomial_values(a, n_max, 1.0),
            &[1.0 + a / 2.0, -a / 2.0],
            n_max,
        ),
        Family::BnTheta => {
            // (1-z)^a ((3/2 - theta) - (1/2 - theta) z)^a (1 + theta a (1 - z))
            let theta = gf.theta.unwrap_or(0.0);
            let (r, _) = gf.bn_ratios();
            let mut mid = binomial_values(a, n_max, r);
            let scale = (1.5 - theta).powf(a);
            mid.iter_mut().for_each(|v| *v *= scale);
            let head = cauchy(&binomial_values(a, n_max, 1.0), &mid, n_max);
            cauchy(&head, &[1.0 + theta * a, -theta * a], n_max)
        }
        Family::CnLinear | Family::CnBinom => {
            return Err(Error::NoConvolutionWeights(gf.family.name()))
        }
    };
    Ok(CoeffSeries::new(SeriesKind::Omega, a, values))
}

/// Coefficients of `b(z) = (1 - z)^alpha / omega(z)`, from the closed form
/// of each family.
pub fn b_coeffs(gf: &GeneratingFunction, n_max: usize) -> CoeffSeries {
    let a = gf.alpha;
    let values = match gf.family {
        Family::Fbdf1 => {
            let mut v = vec![0.0; n_max + 1];
            v[0] = 1.0;
            v
        }
        Family::Fbdf2 => {
            // (3/2)^-a 3^-n a_n^(-a)
            let scale = 1.5f64.powf(-a);
            binomial_values(-a, n_max, 1.0 / 3.0)
                .into_iter()
                .map(|v| v * scale)
                .collect()
        }
        Family::Gngf2 => {
            let b0 = 2.0 / (a + 2.0);
            let ratio = a / (a + 2.0);
            let mut v = Vec::with_capacity(n_max + 1);
            let mut cur = b0;
            for _ in 0..=n_max {
                v.push(cur);
                cur *= ratio;
            }
            v
        }
        Family::BnTheta => {
            let (r, s) = gf.bn_ratios();
            let b0 = gf.bn_b0();
            let head = binomial_values(-a, n_max, r);
            let mut geo = Vec::with_capacity(n_max + 1);
            let mut cur = 1.0;
            for _ in 0..=n_max {
                geo.push(cur);
                cur *= s;
            }
            cauchy(&head, &geo, n_max)
                .into_iter()
                .map(|v| v * b0)
                .collect()
        }
        Family::CnLinear => {
            let mut v = vec![0.0; n_max + 1];
            v[0] = 1.0 - a / 2.0;
            if n_max >= 1 {
                v[1] = a / 2.0;
            }
            v
        }
        Family::CnBinom => {
            let scale = 2f64.powf(-a);
            binomial_values(a, n_max, -1.0)
                .into_iter()
                .map(|v| v * scale)
                .collect()
        }
    };
    CoeffSeries::new(SeriesKind::B, a, values)
}

/// `b(z)` by series division of `(1 - z)^alpha` by `omega(z)`. Used to
/// cross-check the closed forms.
pub fn b_coeffs_by_division(gf: &GeneratingFunction, n_max: usize) -> Result<CoeffSeries> {
    let omega = omega_weights(gf, n_max)?;
    let num = binomial_values(gf.alpha, n_max, 1.0);
    Ok(CoeffSeries::new(
        SeriesKind::B,
        gf.alpha,
        divide(&num, &omega.values, n_max),
    ))
}

/// `bhat_n = |b_n|`.
pub fn bhat_coeffs(gf: &GeneratingFunction, n_max: usize) -> CoeffSeries {
    abs_series(&b_coeffs(gf, n_max))
}

pub(crate) fn abs_series(b: &CoeffSeries) -> CoeffSeries {
    CoeffSeries::new(
        SeriesKind::BHat,
        b.alpha,
        b.values.iter().map(|v| v.abs()).collect(),
    )
}

/// `c_n = 2 b_0 a_n^(-alpha) - sum_j bhat_j a_{n-j}^(-alpha)`.
pub fn c_coeffs(gf: &GeneratingFunction, n_max: usize) -> CoeffSeries {
    c_from_bhat(&bhat_coeffs(gf, n_max), gf.alpha, n_max)
}

fn c_from_bhat(bhat: &CoeffSeries, alpha: f64, n_max: usize) -> CoeffSeries {
    let a_neg = binomial_values(-alpha, n_max, 1.0);
    let conv = cauchy(&bhat.values, &a_neg, n_max);
    let b0 = bhat.values[0];
    let values = a_neg
        .iter()
        .zip(conv)
        .map(|(&an, cv)| 2.0 * b0 * an - cv)
        .collect();
    CoeffSeries::new(SeriesKind::C, alpha, values)
}

/// Outcome of checking the summability and positivity assumptions on a
/// truncated coefficient range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub family: String,
    pub alpha: f64,
    pub n_checked: usize,
    pub b0: f64,
    /// `sum_{n=1}^N |b_n|`.
    pub tail_sum: f64,
    pub c0: f64,
    /// `min_{0 < n <= N} c_n`.
    pub min_c: f64,
    /// Least-squares slope of `log |b_n|` against `log n` on `[N/2, N]`;
    /// `-inf` when fewer than two nonzero entries remain (geometric decay
    /// below the floating-point range).
    pub decay_exponent: f64,
    pub pass_a: bool,
    pub pass_c: bool,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.pass_a && self.pass_c
    }
}

/// Checks `b_0 > 0`, `sum |b_n| <= b_0` and `c_0 > 0`, `c_n >= 0` on
/// `0 <= n <= n_max`, with `tol` absorbing rounding in the non-strict
/// inequalities.
pub fn check_assumptions(gf: &GeneratingFunction, n_max: usize, tol: f64) -> AssumptionReport {
    let n_max = n_max.max(1);
    let b = b_coeffs(gf, n_max);
    let bhat = abs_series(&b);
    let c = c_from_bhat(&bhat, gf.alpha, n_max);

    let b0 = b.values[0];
    let tail_sum: f64 = bhat.values[1..].iter().sum();
    let c0 = c.values[0];
    let min_c = c.values[1..].iter().copied().fold(f64::INFINITY, f64::min);
    let decay_exponent = decay_slope(&b.values, n_max / 2, n_max);

    AssumptionReport {
        family: gf.label(),
        alpha: gf.alpha,
        n_checked: n_max,
        b0,
        tail_sum,
        c0,
        min_c,
        decay_exponent,
        pass_a: b0 > 0.0 && tail_sum <= b0 + tol,
        pass_c: c0 > 0.0 && min_c >= -tol,
    }
}

/// Least-squares slope of `log |v_n|` versus `log n` over `lo..=hi`,
/// skipping zero entries.
pub(crate) fn decay_slope(values: &[f64], lo: usize, hi: usize) -> f64 {
    let pts: Vec<(f64, f64)> = (lo.max(1)..=hi.min(values.len() - 1))
        .filter(|&n| values[n] != 0.0)
        .map(|n| ((n as f64).ln(), values[n].abs().ln()))
        .collect();
    least_squares_slope(&pts)
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    if pts.len() < 2 {
        return f64::NEG_INFINITY;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        f64::NEG_INFINITY
    } else {
        sxy / sxx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn assert_slice(actual: &[f64], expected: &[f64], tol: f64) {
        assert_eq!(actual.len(), expected.len());
        for (a, e) in actual.iter().zip(expected) {
            assert_abs_diff_eq!(*a, *e, epsilon = tol);
        }
    }

    #[test]
    fn binomial_examples() {
        assert_slice(
            &binomial_coeffs(0.5, 3).values,
            &[1.0, -0.5, -0.125, -0.0625],
            1e-16,
        );
        assert_slice(&binomial_coeffs(-0.5, 2).values, &[1.0, 0.5, 0.375], 1e-16);
        assert_slice(&binomial_coeffs(1.0, 3).values, &[1.0, -1.0, 0.0, 0.0], 0.0);
    }

    #[test]
    fn omega_examples() {
        let g = GeneratingFunction::fbdf1(0.5).unwrap();
        assert_slice(
            &omega_weights(&g, 3).unwrap().values,
            &[1.0, -0.5, -0.125, -0.0625],
            1e-16,
        );
        let g = GeneratingFunction::fbdf2(1.0).unwrap();
        assert_slice(
            &omega_weights(&g, 3).unwrap().values,
            &[1.5, -2.0, 0.5, 0.0],
            1e-15,
        );
        let g = GeneratingFunction::fbdf2(0.5).unwrap();
        assert_abs_diff_eq!(
            omega_weights(&g, 0).unwrap().values[0],
            1.5f64.sqrt(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn bn_theta_endpoints_recover_fbdf2_and_gngf2() {
        let a = 0.6;
        let bn0 = omega_weights(&GeneratingFunction::bn_theta(a, 0.0).unwrap(), 50).unwrap();
        let f2 = omega_weights(&GeneratingFunction::fbdf2(a).unwrap(), 50).unwrap();
        for (x, y) in bn0.values.iter().zip(&f2.values) {
            assert_abs_diff_eq!(*x, *y, epsilon = 1e-14);
        }
        let bnh = omega_weights(&GeneratingFunction::bn_theta(a, 0.5).unwrap(), 50).unwrap();
        let g2 = omega_weights(&GeneratingFunction::gngf2(a).unwrap(), 50).unwrap();
        for (x, y) in bnh.values.iter().zip(&g2.values) {
            assert_abs_diff_eq!(*x, *y, epsilon = 1e-14);
        }
    }

    #[test]
    fn cn_families_have_no_omega() {
        let g = GeneratingFunction::cn_linear(0.5).unwrap();
        assert!(matches!(
            omega_weights(&g, 4),
            Err(Error::NoConvolutionWeights(_))
        ));
        assert!(omega_weights(&GeneratingFunction::cn_binom(0.5).unwrap(), 4).is_err());
    }

    #[test]
    fn b_examples() {
        let g = GeneratingFunction::fbdf1(0.37).unwrap();
        assert_slice(&b_coeffs(&g, 3).values, &[1.0, 0.0, 0.0, 0.0], 0.0);
        let g = GeneratingFunction::gngf2(0.5).unwrap();
        assert_slice(&b_coeffs(&g, 2).values, &[0.8, 0.16, 0.032], 1e-15);
        // (3/2)^-1/2 and (3/2)^-1/2 * 3^-1 * 1/2
        let g = GeneratingFunction::fbdf2(0.5).unwrap();
        assert_slice(
            &b_coeffs(&g, 1).values,
            &[0.816496580927726, 0.13608276348795434],
            1e-15,
        );
    }

    #[test]
    fn bhat_flips_negative_entries() {
        let g = GeneratingFunction::cn_binom(0.5).unwrap();
        let b = b_coeffs(&g, 6);
        let bh = bhat_coeffs(&g, 6);
        assert!(b.values.iter().any(|v| *v < 0.0));
        for (x, y) in b.values.iter().zip(&bh.values) {
            assert_eq!(x.abs(), *y);
        }
        let g = GeneratingFunction::gngf2(0.5).unwrap();
        assert_eq!(b_coeffs(&g, 20).values, bhat_coeffs(&g, 20).values);
    }

    #[test]
    fn c_examples() {
        let c = c_coeffs(&GeneratingFunction::cn_linear(0.5).unwrap(), 10);
        assert_abs_diff_eq!(c.values[0], 0.75, epsilon = 1e-15);
        let c = c_coeffs(&GeneratingFunction::cn_binom(0.3).unwrap(), 200);
        for v in &c.values[1..] {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-13);
        }
        let c = c_coeffs(&GeneratingFunction::bn_theta(0.4, 0.3).unwrap(), 2000);
        assert!(c.values.iter().all(|v| *v >= -1e-12));
    }

    #[test]
    fn convolve_examples() {
        let a = binomial_coeffs(0.5, 20);
        let b = binomial_coeffs(-0.5, 20);
        let p = convolve(&a, &b, 20);
        assert_abs_diff_eq!(p.values[0], 1.0, epsilon = 0.0);
        for v in &p.values[1..] {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-15);
        }
        let one = CoeffSeries::new(SeriesKind::ABeta, 1.0, vec![1.0, 1.0]);
        assert_eq!(convolve(&one, &one, 2).values, vec![1.0, 2.0, 1.0]);
        let delta = CoeffSeries::new(SeriesKind::ABeta, 0.0, vec![1.0]);
        let x = binomial_coeffs(0.7, 9);
        assert_eq!(convolve(&delta, &x, 9).values, x.values);
    }

    #[test]
    fn assumption_examples() {
        let r = check_assumptions(&GeneratingFunction::fbdf1(0.3).unwrap(), 2000, 1e-12);
        assert!(r.passed());
        let r = check_assumptions(&GeneratingFunction::gngf2(0.9).unwrap(), 2000, 1e-12);
        assert_abs_diff_eq!(r.b0, 2.0 / 2.9, epsilon = 1e-15);
        assert_abs_diff_eq!(r.tail_sum, 0.9 / 2.9, epsilon = 1e-13);
        assert!(r.pass_a);
        let r = check_assumptions(&GeneratingFunction::bn_theta(0.5, 0.5).unwrap(), 2000, 1e-12);
        assert!(r.passed());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(GeneratingFunction::fbdf1(0.0).is_err());
        assert!(GeneratingFunction::fbdf1(1.2).is_err());
        assert!(GeneratingFunction::bn_theta(0.5, 0.7).is_err());
        assert!(GeneratingFunction::new(Family::Fbdf2, 0.5, Some(0.1)).is_err());
        assert!(GeneratingFunction::new(Family::BnTheta, 0.5, None).is_err());
    }

    #[test]
    fn family_names_parse() {
        for f in Family::ALL {
            assert_eq!(Family::parse(f.name()), Some(f));
        }
        assert_eq!(Family::parse("fbdf_2"), Some(Family::Fbdf2));
        assert_eq!(Family::parse("nope"), None);
    }
}
