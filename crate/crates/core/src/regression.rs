//! Outcome regression `μ̂(ŷ) ≈ E[Y | Ŷ = ŷ]` and the one-step estimator for
//! real-valued outcomes.
//!
//! `μ̂` is fit on the calibration pairs only and then evaluated at every
//! observation. Intervals are Wald intervals on the natural scale with an
//! empirical influence-function variance.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{one_step_from_cells, OneStepCell};
use crate::inference::{wald_ci, Diagnostics, InferenceResult, VarianceEstimate, VarianceSource};
use crate::spline::NaturalSpline;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousDataset {
    calibration: Vec<(f64, f64)>,
    test: Vec<f64>,
    labeled_probability: Option<f64>,
}

impl ContinuousDataset {
    /// `calibration` holds `(y, y_hat)` pairs; `test` holds `y_hat` only.
    pub fn new(calibration: Vec<(f64, f64)>, test: Vec<f64>) -> Result<Self> {
        if calibration.is_empty() {
            return Err(Error::EmptyCalibrationSet);
        }
        for &(y, yh) in &calibration {
            if !y.is_finite() || !yh.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "calibration",
                    value: if y.is_finite() { yh } else { y },
                    reason: "values must be finite",
                });
            }
        }
        if let Some(&v) = test.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "test",
                value: v,
                reason: "values must be finite",
            });
        }
        Ok(Self {
            calibration,
            test,
            labeled_probability: None,
        })
    }

    /// Uses a known labeling probability `π` in place of `m/N`.
    pub fn with_labeled_probability(mut self, pi: f64) -> Result<Self> {
        if !(pi > 0.0 && pi <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "labeled_probability",
                value: pi,
                reason: "must lie in (0, 1]",
            });
        }
        self.labeled_probability = Some(pi);
        Ok(self)
    }

    pub fn calibration(&self) -> &[(f64, f64)] {
        &self.calibration
    }

    pub fn test(&self) -> &[f64] {
        &self.test
    }

    pub fn labeled_probability(&self) -> Option<f64> {
        self.labeled_probability
    }

    pub fn m(&self) -> usize {
        self.calibration.len()
    }

    pub fn n(&self) -> usize {
        self.test.len()
    }

    pub fn total(&self) -> usize {
        self.m() + self.n()
    }

    /// Weight applied to each calibration residual: `1/(N π)`, with `π = m/N`
    /// unless a design probability was supplied.
    fn residual_scale(&self) -> f64 {
        match self.labeled_probability {
            Some(pi) => 1.0 / (self.total() as f64 * pi),
            None => 1.0 / self.m() as f64,
        }
    }

    fn map_y(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            calibration: self.calibration.iter().map(|&(y, yh)| (f(y), yh)).collect(),
            test: self.test.clone(),
            labeled_probability: self.labeled_probability,
        }
    }

    /// Copy with every outcome shifted by `c`.
    pub fn shift_outcomes(&self, c: f64) -> Self {
        self.map_y(|y| y + c)
    }

    /// Copy with every outcome multiplied by `s`.
    pub fn scale_outcomes(&self, s: f64) -> Self {
        self.map_y(|y| y * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MuFamily {
    Categorical,
    Linear,
    Spline,
}

impl MuFamily {
    pub const ALL: [MuFamily; 3] = [MuFamily::Categorical, MuFamily::Linear, MuFamily::Spline];

    pub fn label(self) -> &'static str {
        match self {
            MuFamily::Categorical => "categorical",
            MuFamily::Linear => "linear",
            MuFamily::Spline => "spline",
        }
    }
}

impl fmt::Display for MuFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for MuFamily {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "categorical" | "cat" => Ok(MuFamily::Categorical),
            "linear" | "lin" => Ok(MuFamily::Linear),
            "spline" | "gam" => Ok(MuFamily::Spline),
            other => Err(format!("unknown regression family `{other}`")),
        }
    }
}

/// Level key for categorical surrogates. Integral values are keyed by their
/// integer; declared levels by bit pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
enum LevelKey {
    Int(i64),
    Declared(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LevelStats {
    level: f64,
    count: u64,
    sum_y: f64,
    mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum MuFit {
    Categorical {
        declared: Option<Vec<f64>>,
        levels: BTreeMap<LevelKey, LevelStats>,
    },
    Linear {
        intercept: f64,
        slope: f64,
    },
    Spline(NaturalSpline),
}

/// A fitted calibration regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuModel {
    fit: MuFit,
    /// Mean squared calibration residual.
    pub residual_variance: f64,
}

fn integral_key(value: f64) -> Option<i64> {
    (value.fract() == 0.0 && value.abs() < 9.0e15).then_some(value as i64)
}

fn level_key(declared: Option<&[f64]>, value: f64) -> Result<LevelKey> {
    match declared {
        Some(levels) => levels
            .iter()
            .position(|&l| l == value)
            .map(LevelKey::Declared)
            .ok_or(Error::UnseenLevel { level: value }),
        None => integral_key(value)
            .map(LevelKey::Int)
            .ok_or(Error::NonIntegralLevel { value }),
    }
}

fn fit_categorical(data: &ContinuousDataset, declared: Option<&[f64]>) -> Result<MuFit> {
    let mut levels: BTreeMap<LevelKey, LevelStats> = BTreeMap::new();
    for &(y, yh) in data.calibration() {
        let key = level_key(declared, yh)?;
        let entry = levels.entry(key).or_insert(LevelStats {
            level: yh,
            count: 0,
            sum_y: 0.0,
            mean: 0.0,
        });
        entry.count += 1;
        entry.sum_y += y;
    }
    for stats in levels.values_mut() {
        stats.mean = stats.sum_y / stats.count as f64;
    }
    Ok(MuFit::Categorical {
        declared: declared.map(<[f64]>::to_vec),
        levels,
    })
}

fn fit_linear(data: &ContinuousDataset) -> Result<MuFit> {
    let m = data.m() as f64;
    let (sx, sy) = data
        .calibration()
        .iter()
        .fold((0.0, 0.0), |(a, b), &(y, x)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let (sxx, sxy) = data
        .calibration()
        .iter()
        .fold((0.0, 0.0), |(a, b), &(y, x)| {
            let dx = x - mx;
            (a + dx * dx, b + dx * (y - my))
        });
    let spread = data.calibration().iter().map(|&(_, x)| x * x).sum::<f64>();
    if sxx <= 1e-14 * spread.max(f64::MIN_POSITIVE) {
        return Err(Error::RankDeficient { family: "linear" });
    }
    let slope = sxy / sxx;
    Ok(MuFit::Linear {
        intercept: my - slope * mx,
        slope,
    })
}

fn fit_with(
    data: &ContinuousDataset,
    family: MuFamily,
    declared: Option<&[f64]>,
) -> Result<MuModel> {
    if family != MuFamily::Categorical && data.m() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            have: data.m(),
        });
    }
    let fit = match family {
        MuFamily::Categorical => fit_categorical(data, declared)?,
        MuFamily::Linear => fit_linear(data)?,
        MuFamily::Spline => {
            let (y, x): (Vec<f64>, Vec<f64>) = data.calibration().iter().copied().unzip();
            MuFit::Spline(NaturalSpline::fit(&x, &y)?)
        }
    };
    let mut model = MuModel {
        fit,
        residual_variance: 0.0,
    };
    let mut ss = 0.0;
    for &(y, yh) in data.calibration() {
        let r = y - model.predict(yh)?;
        ss += r * r;
    }
    model.residual_variance = ss / data.m() as f64;
    Ok(model)
}

/// Least-squares fit of `μ̂` within `family` on the calibration pairs.
///
/// Categorical fits require integral surrogate values; use
/// [`fit_categorical_levels`] for other level sets.
pub fn fit_mu(data: &ContinuousDataset, family: MuFamily) -> Result<MuModel> {
    fit_with(data, family, None)
}

/// Categorical fit over explicitly declared levels, compared by exact
/// equality.
pub fn fit_categorical_levels(data: &ContinuousDataset, levels: &[f64]) -> Result<MuModel> {
    fit_with(data, MuFamily::Categorical, Some(levels))
}

impl MuModel {
    pub fn family(&self) -> MuFamily {
        match self.fit {
            MuFit::Categorical { .. } => MuFamily::Categorical,
            MuFit::Linear { .. } => MuFamily::Linear,
            MuFit::Spline(_) => MuFamily::Spline,
        }
    }

    pub fn predict(&self, y_hat: f64) -> Result<f64> {
        match &self.fit {
            MuFit::Categorical { declared, levels } => {
                let key = level_key(declared.as_deref(), y_hat)
                    .map_err(|_| Error::UnseenLevel { level: y_hat })?;
                levels
                    .get(&key)
                    .map(|s| s.mean)
                    .ok_or(Error::UnseenLevel { level: y_hat })
            }
            MuFit::Linear { intercept, slope } => Ok(intercept + slope * y_hat),
            MuFit::Spline(s) => Ok(s.predict(y_hat)),
        }
    }

    /// Per-level `(level, mean)` pairs in ascending level order.
    pub fn level_means(&self) -> Option<Vec<(f64, f64)>> {
        match &self.fit {
            MuFit::Categorical { levels, .. } => {
                Some(levels.values().map(|s| (s.level, s.mean)).collect())
            }
            _ => None,
        }
    }

    /// `(intercept, slope)` of a linear fit.
    pub fn coefficients(&self) -> Option<(f64, f64)> {
        match self.fit {
            MuFit::Linear { intercept, slope } => Some((intercept, slope)),
            _ => None,
        }
    }

    /// Parameters spent by the fit: levels, 2, or the spline's effective
    /// degrees of freedom.
    pub fn degrees_of_freedom(&self) -> f64 {
        match &self.fit {
            MuFit::Categorical { levels, .. } => levels.len() as f64,
            MuFit::Linear { .. } => 2.0,
            MuFit::Spline(s) => s.effective_df,
        }
    }

    pub fn spline(&self) -> Option<&NaturalSpline> {
        match &self.fit {
            MuFit::Spline(s) => Some(s),
            _ => None,
        }
    }

    /// Categorical point estimate accumulated per level, so that binary data
    /// reproduces the binary one-step estimator exactly.
    fn categorical_theta(&self, data: &ContinuousDataset) -> Result<Option<f64>> {
        let MuFit::Categorical { declared, levels } = &self.fit else {
            return Ok(None);
        };
        let mut test_counts: BTreeMap<LevelKey, u64> = BTreeMap::new();
        for &yh in data.test() {
            let key =
                level_key(declared.as_deref(), yh).map_err(|_| Error::UnseenLevel { level: yh })?;
            if !levels.contains_key(&key) {
                return Err(Error::UnseenLevel { level: yh });
            }
            *test_counts.entry(key).or_default() += 1;
        }
        let cells: Vec<OneStepCell> = levels
            .iter()
            .map(|(key, s)| OneStepCell {
                all_count: s.count + test_counts.get(key).copied().unwrap_or(0),
                cal_count: s.count,
                cal_sum_y: s.sum_y,
                mu: s.mean,
            })
            .collect();
        Ok(Some(one_step_from_cells(
            &cells,
            data.total(),
            data.residual_scale(),
        )))
    }
}

fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
}

fn sample_covariance(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    if n < 2 {
        return 0.0;
    }
    let ma = a.iter().sum::<f64>() / n as f64;
    let mb = b.iter().sum::<f64>() / n as f64;
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - ma) * (y - mb))
        .sum::<f64>()
        / (n - 1) as f64
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn wald_result(
    label: String,
    theta_hat: f64,
    v_n: f64,
    n_total: usize,
    level: f64,
    diagnostics: Diagnostics,
) -> InferenceResult {
    let variance = VarianceEstimate::new(v_n, n_total, VarianceSource::EmpiricalIF);
    InferenceResult {
        estimator: label,
        theta_hat,
        ci: wald_ci(theta_hat, variance.se, level),
        variance,
        diagnostics,
    }
}

/// One-step estimator `(1/N) Σ μ̂(ŷ) + (1/(N π̂)) Σ_cal (y − μ̂(ŷ))`.
///
/// The reported variance is the sample variance (denominator `N − 1`) of the
/// plug-in influence contributions `μ̂(ŷ) + (R/π̂)(y − μ̂(ŷ)) − θ̂`, with the
/// in-sample residuals inflated by `sqrt(m / (m − df))` for the parameters
/// spent fitting `μ̂`.
pub fn eif_continuous_estimate(
    data: &ContinuousDataset,
    mu: &MuModel,
    level: f64,
) -> Result<InferenceResult> {
    let n_total = data.total();
    let scale = data.residual_scale() * n_total as f64;
    let m = data.m() as f64;
    let df = mu.degrees_of_freedom();
    let inflation = if m > df { (m / (m - df)).sqrt() } else { 1.0 };
    let mut contributions = Vec::with_capacity(n_total);
    let mut variance_terms = Vec::with_capacity(n_total);
    for &(y, yh) in data.calibration() {
        let fitted = mu.predict(yh)?;
        contributions.push(fitted + scale * (y - fitted));
        variance_terms.push(fitted + scale * inflation * (y - fitted));
    }
    for &yh in data.test() {
        let fitted = mu.predict(yh)?;
        contributions.push(fitted);
        variance_terms.push(fitted);
    }
    let theta_hat = match mu.categorical_theta(data)? {
        Some(t) => t,
        None => mean(&contributions),
    };
    let v_n = sample_variance(&variance_terms);
    Ok(wald_result(
        format!("eif-{}", mu.family()),
        theta_hat,
        v_n,
        n_total,
        level,
        Diagnostics::default(),
    ))
}

fn require_test(data: &ContinuousDataset) -> Result<()> {
    if data.n() == 0 {
        Err(Error::EmptyTestSet)
    } else {
        Ok(())
    }
}

/// Test-set mean of the surrogate.
pub fn naive_continuous(data: &ContinuousDataset, level: f64) -> Result<InferenceResult> {
    require_test(data)?;
    let theta_hat = mean(data.test());
    Ok(wald_result(
        "naive".into(),
        theta_hat,
        sample_variance(data.test()),
        data.n(),
        level,
        Diagnostics::default(),
    ))
}

/// `ȳ_cal + λ (mean ŷ_test − mean ŷ_cal)` with variance
/// `λ² s²(ŷ_test)/n + s²(y − λŷ)_cal/m`.
fn ppi_family(
    data: &ContinuousDataset,
    lambda: f64,
    label: &str,
    level: f64,
) -> Result<InferenceResult> {
    require_test(data)?;
    let (y, yh): (Vec<f64>, Vec<f64>) = data.calibration().iter().copied().unzip();
    let theta_hat = mean(&y) + lambda * (mean(data.test()) - mean(&yh));
    let rectifier: Vec<f64> = y.iter().zip(&yh).map(|(a, b)| a - lambda * b).collect();
    let (n, m, n_total) = (data.n() as f64, data.m() as f64, data.total() as f64);
    let var_theta =
        lambda * lambda * sample_variance(data.test()) / n + sample_variance(&rectifier) / m;
    let diagnostics = Diagnostics {
        lambda: Some(lambda),
        ..Diagnostics::default()
    };
    Ok(wald_result(
        label.into(),
        theta_hat,
        var_theta * n_total,
        data.total(),
        level,
        diagnostics,
    ))
}

pub fn ppi_continuous(data: &ContinuousDataset, level: f64) -> Result<InferenceResult> {
    ppi_family(data, 1.0, "ppi", level)
}

/// PPI++ with `λ̂ = Cov(y, ŷ) / ((1 + m/n) Var(ŷ))` from the calibration set.
pub fn ppiplus_continuous(data: &ContinuousDataset, level: f64) -> Result<InferenceResult> {
    require_test(data)?;
    let (y, yh): (Vec<f64>, Vec<f64>) = data.calibration().iter().copied().unzip();
    let var = sample_variance(&yh);
    if var == 0.0 {
        return Err(Error::ConstantSurrogate);
    }
    let ratio = data.m() as f64 / data.n() as f64;
    let lambda = sample_covariance(&y, &yh) / ((1.0 + ratio) * var);
    ppi_family(data, lambda, "ppi++", level)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cal(pairs: &[(f64, f64)], test: &[f64]) -> ContinuousDataset {
        ContinuousDataset::new(pairs.to_vec(), test.to_vec()).unwrap()
    }

    #[test]
    fn categorical_level_means() {
        let d = cal(&[(1.2, 1.0), (0.8, 1.0), (2.5, 2.0)], &[1.0]);
        let mu = fit_mu(&d, MuFamily::Categorical).unwrap();
        assert!((mu.predict(1.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(mu.predict(2.0).unwrap(), 2.5);
        assert!(matches!(mu.predict(3.0), Err(Error::UnseenLevel { .. })));
        assert!(matches!(mu.predict(1.5), Err(Error::UnseenLevel { .. })));
    }

    #[test]
    fn non_integral_levels_need_declaration() {
        let d = cal(&[(1.0, 0.5), (2.0, 1.5)], &[0.5]);
        assert!(matches!(
            fit_mu(&d, MuFamily::Categorical),
            Err(Error::NonIntegralLevel { .. })
        ));
        let mu = fit_categorical_levels(&d, &[0.5, 1.5]).unwrap();
        assert_eq!(mu.predict(1.5).unwrap(), 2.0);
    }

    #[test]
    fn linear_recovers_identity() {
        let pairs: Vec<(f64, f64)> = (0..20).map(|i| (i as f64 * 0.3, i as f64 * 0.3)).collect();
        let mu = fit_mu(&cal(&pairs, &[]), MuFamily::Linear).unwrap();
        let (a, b) = mu.coefficients().unwrap();
        assert!(a.abs() < 1e-10 && (b - 1.0).abs() < 1e-10);
    }

    #[test]
    fn linear_rank_deficient() {
        let d = cal(&[(1.0, 2.0), (3.0, 2.0)], &[]);
        assert!(matches!(
            fit_mu(&d, MuFamily::Linear),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn zero_residual_collapse() {
        let pairs = [(1.0, 1.0), (2.0, 2.0), (4.0, 3.0)];
        let test = [1.0, 3.0, 3.0, 2.0, 1.0];
        let d = cal(&pairs, &test);
        let mu = fit_mu(&d, MuFamily::Categorical).unwrap();
        let r = eif_continuous_estimate(&d, &mu, 0.9).unwrap();
        let imputed = (1.0 + 2.0 + 4.0 + 1.0 + 4.0 + 4.0 + 2.0 + 1.0) / 8.0;
        assert!((r.theta_hat - imputed).abs() < 1e-15);
    }

    #[test]
    fn design_probability_weights_residuals() {
        let pairs = [(1.5, 1.0), (2.0, 2.0), (1.0, 1.0)];
        let d = cal(&pairs, &[1.0, 2.0, 2.0]);
        let mu = fit_mu(&d, MuFamily::Linear).unwrap();
        let base = eif_continuous_estimate(&d, &mu, 0.9).unwrap();
        let same =
            eif_continuous_estimate(&d.clone().with_labeled_probability(0.5).unwrap(), &mu, 0.9)
                .unwrap();
        assert!((base.theta_hat - same.theta_hat).abs() < 1e-15);
    }

    #[test]
    fn unseen_test_level_propagates() {
        let d = cal(&[(1.0, 1.0), (2.0, 2.0)], &[3.0]);
        let mu = fit_mu(&d, MuFamily::Categorical).unwrap();
        assert!(matches!(
            eif_continuous_estimate(&d, &mu, 0.9),
            Err(Error::UnseenLevel { .. })
        ));
    }

    #[test]
    fn ppi_lambda_one() {
        let d = cal(&[(1.0, 1.0), (3.0, 2.0), (2.0, 2.0)], &[1.0, 2.0, 3.0]);
        let r = ppi_continuous(&d, 0.9).unwrap();
        assert!((r.theta_hat - (2.0 - (5.0 / 3.0 - 2.0))).abs() < 1e-15);
    }
}
