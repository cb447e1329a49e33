//! Starting weights that make the discrete Caputo operator exact on
//! `t^sigma_1, ..., t^sigma_m`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::cq_weights::{omega_weights, GeneratingFunction};
use crate::error::{invalid, Error, Result};

/// Hard cap on the number of correction terms.
pub const MAX_CORRECTIONS: usize = 8;

/// Largest condition number accepted for the starting-weight system.
pub const MAX_CONDITION: f64 = 1e14;

/// Exponents `sigma_1 < ... < sigma_m` targeted by the correction terms.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CorrectionConfig {
    sigmas: Vec<f64>,
}

impl CorrectionConfig {
    pub fn new(sigmas: Vec<f64>) -> Result<Self> {
        if sigmas.len() > MAX_CORRECTIONS {
            return invalid(format!(
                "at most {MAX_CORRECTIONS} correction terms are supported, got {}",
                sigmas.len()
            ));
        }
        if sigmas.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return invalid(format!("correction exponents must be positive: {sigmas:?}"));
        }
        if sigmas.windows(2).any(|w| w[1] <= w[0]) {
            return invalid(format!(
                "correction exponents must be strictly increasing: {sigmas:?}"
            ));
        }
        Ok(Self { sigmas })
    }

    /// No corrections (`m = 0`).
    pub fn none() -> Self {
        Self::default()
    }

    /// `sigma_k = k alpha` for `k = 1..=m`.
    pub fn multiples_of(alpha: f64, m: usize) -> Result<Self> {
        Self::new(suggest_sigmas(alpha, m, true))
    }

    pub fn m(&self) -> usize {
        self.sigmas.len()
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    /// The first `m` exponents.
    pub fn truncated(&self, m: usize) -> Self {
        Self {
            sigmas: self.sigmas[..m.min(self.sigmas.len())].to_vec(),
        }
    }

    /// Above four corrections the system is poorly conditioned in practice.
    pub fn exceeds_practical_ceiling(&self) -> bool {
        self.m() > 4
    }
}

/// `Gamma(sigma + 1) / Gamma(sigma + 1 - alpha)`: the Caputo derivative of
/// `t^sigma` is this factor times `t^(sigma - alpha)`.
pub fn caputo_power_factor(sigma: f64, alpha: f64) -> f64 {
    gamma(sigma + 1.0) / gamma(sigma + 1.0 - alpha)
}

/// Candidate correction exponents.
///
/// When the reaction term vanishes at zero the solution expands in powers
/// `t^(k alpha)`; otherwise the exponents are the smallest positive members
/// of `{l + j alpha : l, j >= 0}`.
pub fn suggest_sigmas(alpha: f64, m: usize, f_vanishes_at_zero: bool) -> Vec<f64> {
    if m == 0 {
        return Vec::new();
    }
    if f_vanishes_at_zero {
        return (1..=m).map(|k| tidy(k as f64 * alpha)).collect();
    }
    let j_max = (m as f64 / alpha).ceil() as usize + 1;
    let mut cand: Vec<f64> = (0..=m)
        .flat_map(|l| (0..=j_max).map(move |j| l as f64 + j as f64 * alpha))
        .filter(|v| *v > 1e-12)
        .collect();
    cand.sort_by(|a, b| a.total_cmp(b));
    cand.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    cand.truncate(m);
    cand.into_iter().map(tidy).collect()
}

// strips representation noise such as 3 * 0.2 = 0.6000000000000001
fn tidy(v: f64) -> f64 {
    (v * 1e12).round() / 1e12
}

/// Starting weights `w[n][j]` for `1 <= n <= n_max`, `1 <= j <= m`.
#[derive(Debug, Clone, PartialEq)]
pub struct StartingWeightTable {
    m: usize,
    n_max: usize,
    /// Row-major, row `n - 1` holds `w_{n,1..m}`.
    data: Vec<f64>,
}

impl StartingWeightTable {
    pub fn empty(n_max: usize) -> Self {
        Self {
            m: 0,
            n_max,
            data: Vec::new(),
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    /// `w_{n,1..m}`; empty slice when `m = 0`.
    pub fn row(&self, n: usize) -> &[f64] {
        if self.m == 0 {
            return &[];
        }
        assert!(n >= 1 && n <= self.n_max, "row {n} outside 1..={}", self.n_max);
        &self.data[(n - 1) * self.m..n * self.m]
    }

    /// `w_{n,j}` with 1-based `j`.
    pub fn get(&self, n: usize, j: usize) -> f64 {
        self.row(n)[j - 1]
    }
}

fn system_matrix(sigmas: &[f64], scale: f64) -> DMatrix<f64> {
    let m = sigmas.len();
    DMatrix::from_fn(m, m, |k, j| ((j + 1) as f64 * scale).powf(sigmas[k]))
}

fn condition_2norm(mat: &DMatrix<f64>) -> f64 {
    let sv = mat.singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// 2-norm condition number of the matrix `(t_j^sigma_k)` with `t_j = j tau`.
pub fn condition_number(cfg: &CorrectionConfig, tau: f64) -> f64 {
    if cfg.m() == 0 {
        return 1.0;
    }
    condition_2norm(&system_matrix(cfg.sigmas(), tau))
}

/// Solves, for every `1 <= n <= n_max`, the dimensionless system
///
/// `sum_j j^sigma_k w_{n,j} = G_k n^(sigma_k - alpha) - sum_{j<=n} omega_{n-j} j^sigma_k`
///
/// with `G_k = Gamma(sigma_k + 1) / Gamma(sigma_k + 1 - alpha)`.
pub fn starting_weights(
    gf: &GeneratingFunction,
    cfg: &CorrectionConfig,
    n_max: usize,
) -> Result<StartingWeightTable> {
    let omega = omega_weights(gf, n_max)?;
    starting_weights_from_omega(gf.alpha(), &omega.values, cfg, n_max)
}

/// Same as [`starting_weights`] for precomputed weights `omega[0..=n_max]`.
pub fn starting_weights_from_omega(
    alpha: f64,
    omega: &[f64],
    cfg: &CorrectionConfig,
    n_max: usize,
) -> Result<StartingWeightTable> {
    let m = cfg.m();
    if m == 0 {
        return Ok(StartingWeightTable::empty(n_max));
    }
    if omega.len() < n_max + 1 {
        return invalid(format!(
            "need {} convolution weights, got {}",
            n_max + 1,
            omega.len()
        ));
    }
    let sigmas = cfg.sigmas();
    let mat = system_matrix(sigmas, 1.0);
    let condition = condition_2norm(&mat);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned {
            m,
            sigmas: sigmas.to_vec(),
            condition,
        });
    }
    let lu = mat.lu();

    let factors: Vec<f64> = sigmas
        .iter()
        .map(|&s| caputo_power_factor(s, alpha))
        .collect();
    // powers[k][j] = j^sigma_k
    let powers: Vec<Vec<f64>> = sigmas
        .iter()
        .map(|&s| (0..=n_max).map(|j| (j as f64).powf(s)).collect())
        .collect();

    let rhs_rows: Vec<Vec<f64>> = (1..=n_max)
        .into_par_iter()
        .map(|n| {
            (0..m)
                .map(|k| {
                    let p = &powers[k];
                    let conv: f64 = (1..=n).map(|j| omega[n - j] * p[j]).sum();
                    factors[k] * (n as f64).powf(sigmas[k] - alpha) - conv
                })
                .collect()
        })
        .collect();

    let rhs = DMatrix::from_fn(m, n_max, |k, col| rhs_rows[col][k]);
    let sol = lu.solve(&rhs).ok_or_else(|| Error::IllConditioned {
        m,
        sigmas: sigmas.to_vec(),
        condition: f64::INFINITY,
    })?;

    let mut data = Vec::with_capacity(m * n_max);
    for col in 0..n_max {
        let w: DVector<f64> = sol.column(col).into();
        data.extend(w.iter());
    }
    Ok(StartingWeightTable { m, n_max, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sigma_suggestions() {
        assert_eq!(suggest_sigmas(0.2, 3, true), vec![0.2, 0.4, 0.6]);
        assert_eq!(suggest_sigmas(0.8, 4, false), vec![0.8, 1.0, 1.6, 1.8]);
        assert_eq!(suggest_sigmas(1.0, 2, true), vec![1.0, 2.0]);
        assert_eq!(suggest_sigmas(0.5, 3, false), vec![0.5, 1.0, 1.5]);
        assert!(suggest_sigmas(0.5, 0, false).is_empty());
    }

    #[test]
    fn config_validation() {
        assert!(CorrectionConfig::new(vec![0.5, 0.4]).is_err());
        assert!(CorrectionConfig::new(vec![0.0]).is_err());
        assert!(CorrectionConfig::new(vec![0.1; 9]).is_err());
        let c = CorrectionConfig::multiples_of(0.3, 5).unwrap();
        assert_eq!(c.m(), 5);
        assert!(c.exceeds_practical_ceiling());
        assert_eq!(c.truncated(2).sigmas().len(), 2);
    }

    #[test]
    fn single_correction_fbdf1_by_hand() {
        // w_{1,1} = Gamma(1.5) - omega_0; w_{2,1} = Gamma(1.5) - (omega_1 + omega_0 sqrt 2)
        let gf = GeneratingFunction::fbdf1(0.5).unwrap();
        let cfg = CorrectionConfig::new(vec![0.5]).unwrap();
        let t = starting_weights(&gf, &cfg, 4).unwrap();
        let g = gamma(1.5);
        assert_relative_eq!(t.get(1, 1), g - 1.0, epsilon = 1e-15);
        assert_relative_eq!(t.get(2, 1), g - (-0.5 + 2f64.sqrt()), epsilon = 1e-15);
        assert_relative_eq!(t.get(1, 1), -0.11377307454724206, epsilon = 1e-14);
        assert_relative_eq!(t.get(2, 1), -0.027986636920337, epsilon = 1e-12);
    }

    #[test]
    fn empty_table_without_corrections() {
        let gf = GeneratingFunction::fbdf2(0.5).unwrap();
        let t = starting_weights(&gf, &CorrectionConfig::none(), 10).unwrap();
        assert!(t.is_empty());
        assert!(t.row(3).is_empty());
    }

    #[test]
    fn condition_numbers() {
        let cfg = CorrectionConfig::new(vec![0.37]).unwrap();
        assert_relative_eq!(condition_number(&cfg, 0.01), 1.0, epsilon = 1e-12);
        let c2 = condition_number(&CorrectionConfig::multiples_of(0.8, 2).unwrap(), 0.1);
        let c4 = condition_number(&CorrectionConfig::multiples_of(0.8, 4).unwrap(), 0.1);
        assert!(c4 > c2);
        let c = condition_number(&CorrectionConfig::multiples_of(0.5, 4).unwrap(), 0.1);
        assert!(c.is_finite() && c < 1e14);
    }

    #[test]
    fn ill_conditioned_system_is_reported() {
        let gf = GeneratingFunction::fbdf1(0.5).unwrap();
        let cfg = CorrectionConfig::new(vec![0.5, 0.5 + 1e-15]).unwrap();
        match starting_weights(&gf, &cfg, 5) {
            Err(Error::IllConditioned { m, .. }) => assert_eq!(m, 2),
            other => panic!("expected ill-conditioning, got {other:?}"),
        }
    }

    #[test]
    fn starting_weights_decay() {
        // |w_{n,k}| decays no slower than max(-alpha-1, sigma_m - p - alpha) + 0.2
        let alpha = 0.5;
        let gf = GeneratingFunction::fbdf2(alpha).unwrap();
        let cfg = CorrectionConfig::multiples_of(alpha, 3).unwrap();
        let n_max = 2048;
        let t = starting_weights(&gf, &cfg, n_max).unwrap();
        let bound = f64::max(-alpha - 1.0, cfg.sigmas()[2] - 2.0 - alpha) + 0.2;
        for j in 1..=3 {
            let vals: Vec<f64> = (0..=n_max)
                .map(|n| if n == 0 { 0.0 } else { t.get(n, j) })
                .collect();
            let slope = crate::cq_weights::decay_slope(&vals, n_max / 2, n_max);
            assert!(slope <= bound, "j = {j}: slope {slope} > {bound}");
        }
    }
}
