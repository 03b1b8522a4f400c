//! Asymptotic variances, plug-in standard errors and confidence intervals.
//!
//! All `*_variance` functions return the asymptotic variance `V` of
//! `√N (θ̂ - θ)`; the standard error on the natural scale is `sqrt(V / N)`.
//! The same formulas serve the theoretical grid and the data plug-in path.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::estimators::{
    self, BinaryDataset, EstimatorKind, JudgeErrorRates, PointEstimate, EPS_IDENT,
};
use crate::mle::{self, MleConfig, MleFitResult};

/// Population quantities `(θ, q0, q1, γ1)` plus the judge marginal `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationParams {
    pub theta: f64,
    pub q0: f64,
    pub q1: f64,
    /// Limit of `n / m`.
    pub gamma1: f64,
    /// `P(Y_hat = 1)`.
    pub p: f64,
}

impl PopulationParams {
    /// Validated parameters with `p = (1 - θ)(1 - q0) + θ q1`.
    pub fn new(theta: f64, q0: f64, q1: f64, gamma1: f64) -> Result<Self> {
        open_unit("theta", theta)?;
        for (name, q) in [("q0", q0), ("q1", q1)] {
            if !(q > 0.0 && q <= 1.0) {
                return Err(Error::InvalidParameter {
                    name,
                    value: q,
                    reason: "must lie in (0, 1]",
                });
            }
        }
        if !(gamma1 > 0.0 && gamma1.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "gamma1",
                value: gamma1,
                reason: "must be positive and finite",
            });
        }
        let p = marginal_positive_rate(theta, q0, q1);
        open_unit("p", p)?;
        Ok(Self {
            theta,
            q0,
            q1,
            gamma1,
            p,
        })
    }

    /// Parameters estimated from data: `p` is supplied rather than derived and
    /// the rates may sit on the boundary. `γ1 = 0` is allowed (no test set).
    pub fn plug_in(theta: f64, rates: &JudgeErrorRates, gamma1: f64, p: f64) -> Result<Self> {
        open_unit("theta", theta)?;
        estimators::check_probability("p", p)?;
        if !(gamma1 >= 0.0 && gamma1.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "gamma1",
                value: gamma1,
                reason: "must be non-negative and finite",
            });
        }
        Ok(Self {
            theta,
            q0: rates.q0,
            q1: rates.q1,
            gamma1,
            p,
        })
    }

    pub fn kappa(&self) -> f64 {
        self.q0 + self.q1 - 1.0
    }

    /// `(1 - θ) q0 (1 - q0) + θ q1 (1 - q1)`: mean conditional variance of
    /// the judge label given the truth.
    pub fn within_class_variance(&self) -> f64 {
        let t = self.theta;
        (1.0 - t) * self.q0 * (1.0 - self.q0) + t * self.q1 * (1.0 - self.q1)
    }

    /// `κ² θ (1 - θ)`: variance of `E[Y_hat | Y]`.
    pub fn between_class_variance(&self) -> f64 {
        let k = self.kappa();
        k * k * self.theta * (1.0 - self.theta)
    }

    /// Variance-minimising PPI++ weight.
    pub fn lambda_star(&self) -> f64 {
        let g = self.gamma1;
        g * self.theta * (self.q1 - self.p) / ((1.0 + g) * self.p * (1.0 - self.p))
    }

    /// `(μ(0), μ(1))` with `μ(ŷ) = P(Y = 1 | Y_hat = ŷ)`.
    pub fn conditional_means(&self) -> (f64, f64) {
        (
            self.theta * (1.0 - self.q1) / (1.0 - self.p),
            self.theta * self.q1 / self.p,
        )
    }
}

pub fn marginal_positive_rate(theta: f64, q0: f64, q1: f64) -> f64 {
    (1.0 - theta) * (1.0 - q0) + theta * q1
}

fn open_unit(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must lie in (0, 1)",
        })
    }
}

fn sample_ratio(gamma1: f64) -> f64 {
    (1.0 + gamma1) / gamma1
}

pub fn rg_variance(params: &PopulationParams) -> Result<f64> {
    let kappa = params.kappa();
    if kappa.abs() < EPS_IDENT {
        return Err(Error::NearSingularCorrection { kappa });
    }
    let p = params.p;
    let bracket = p * (1.0 - p) + params.gamma1 * params.within_class_variance();
    Ok(sample_ratio(params.gamma1) * bracket / (kappa * kappa))
}

pub fn ppi_variance(params: &PopulationParams) -> f64 {
    let PopulationParams {
        theta: t,
        q0,
        q1,
        p,
        ..
    } = *params;
    let residual = (1.0 - t) * (1.0 - q0) + t * (1.0 - q1) - (t - p) * (t - p);
    sample_ratio(params.gamma1) * (p * (1.0 - p) + params.gamma1 * residual)
}

/// Exact variance of the PPI estimate for fixed sizes `n`, `m`.
pub fn ppi_variance_finite(params: &PopulationParams, n: usize, m: usize) -> f64 {
    let PopulationParams {
        theta: t,
        q0,
        q1,
        p,
        ..
    } = *params;
    let residual = (1.0 - t) * (1.0 - q0) + t * (1.0 - q1) - (t - p) * (t - p);
    p * (1.0 - p) / n as f64 + residual / m as f64
}

pub fn ppiplus_variance(params: &PopulationParams, lambda: f64) -> f64 {
    let PopulationParams {
        theta: t,
        p,
        q1,
        gamma1: g,
        ..
    } = *params;
    let inner = g * t * (1.0 - t) + lambda * lambda * (1.0 + g) * p * (1.0 - p)
        - 2.0 * lambda * g * t * (q1 - p);
    sample_ratio(g) * inner
}

/// Exact variance of PPI++ at a fixed weight for sizes `n`, `m`.
pub fn ppiplus_variance_finite(params: &PopulationParams, lambda: f64, n: usize, m: usize) -> f64 {
    let PopulationParams {
        theta: t, p, q1, ..
    } = *params;
    let (n, m) = (n as f64, m as f64);
    t * (1.0 - t) / m + lambda * lambda * (p * (1.0 - p) / n + p * (1.0 - p) / m)
        - 2.0 * lambda / m * t * (q1 - p)
}

/// Semiparametric efficiency bound for the binary design.
pub fn eif_variance(params: &PopulationParams) -> Result<f64> {
    let p = params.p;
    let spread = p * (1.0 - p);
    if spread <= 0.0 {
        return Err(Error::DegenerateSurrogateDistribution { p });
    }
    let t = params.theta;
    let bracket =
        params.between_class_variance() + (params.gamma1 + 1.0) * params.within_class_variance();
    Ok(t * (1.0 - t) / spread * bracket)
}

/// `[I_γ1⁻¹]₁₁` in closed form.
pub fn mle_variance(params: &PopulationParams) -> Result<f64> {
    let p = params.p;
    let t = params.theta;
    let g = params.gamma1;
    let within = params.within_class_variance();
    let between = params.between_class_variance();
    let denom = p * (1.0 - p) + g * (between + within);
    if denom <= 0.0 || params.kappa() == 0.0 {
        return Err(Error::SingularInformation);
    }
    Ok((1.0 + g) * t * (1.0 - t) * (p * (1.0 - p) + g * within) / denom)
}

/// `[I_γ1⁻¹]₁₁` by inverting the assembled 3×3 information matrix.
pub fn mle_variance_numeric(params: &PopulationParams) -> Result<f64> {
    let eta = mle::MleParams::new(params.theta, params.q0, params.q1)?;
    mle::info_inverse_11(&eta, params.gamma1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarianceSource {
    ClosedFormPlugIn,
    EmpiricalIF,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    /// Variance on the `√N` scale.
    pub v_n: f64,
    /// `sqrt(v_n / N)`.
    pub se: f64,
    /// The `N` used for scaling.
    pub n_total: usize,
    pub source: VarianceSource,
}

impl VarianceEstimate {
    pub fn new(v_n: f64, n_total: usize, source: VarianceSource) -> Self {
        let v_n = v_n.max(0.0);
        Self {
            v_n,
            se: (v_n / n_total as f64).sqrt(),
            n_total,
            source,
        }
    }
}

/// Binomial variance of a proportion over `n` labels.
pub fn naive_variance(p_hat: f64, n: usize) -> VarianceEstimate {
    VarianceEstimate::new(p_hat * (1.0 - p_hat), n, VarianceSource::ClosedFormPlugIn)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CiTransform {
    Logit,
    Wald,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub transform: CiTransform,
}

impl ConfidenceInterval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

/// Two-sided standard normal critical value `z_{(1 - level)/2}`.
pub fn z_critical(level: f64) -> f64 {
    assert!(level > 0.0 && level < 1.0, "CI level must lie in (0, 1)");
    Normal::standard().inverse_cdf(0.5 + level / 2.0)
}

/// Clamps a proportion to `[1/(2N), 1 - 1/(2N)]`.
pub fn clamp_proportion(theta: f64, n_total: usize) -> f64 {
    let eps = 0.5 / n_total.max(1) as f64;
    theta.clamp(eps, 1.0 - eps)
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Interval built on the log-odds scale with a delta-method standard error
/// and mapped back through the logistic function.
pub fn logit_ci(theta_hat: f64, variance: &VarianceEstimate, level: f64) -> ConfidenceInterval {
    let t = clamp_proportion(theta_hat, variance.n_total);
    let centre = (t / (1.0 - t)).ln();
    let half = z_critical(level) * variance.se / (t * (1.0 - t));
    ConfidenceInterval {
        lower: logistic(centre - half),
        upper: logistic(centre + half),
        level,
        transform: CiTransform::Logit,
    }
}

/// Symmetric interval on the natural scale.
pub fn wald_ci(theta_hat: f64, se: f64, level: f64) -> ConfidenceInterval {
    let half = z_critical(level) * se;
    ConfidenceInterval {
        lower: theta_hat - half,
        upper: theta_hat + half,
        level,
        transform: CiTransform::Wald,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub lambda: Option<f64>,
    pub q0_hat: Option<f64>,
    pub q1_hat: Option<f64>,
    pub clamped: bool,
    pub converged: Option<bool>,
    pub iterations: Option<usize>,
    /// EIF estimate recorded when the likelihood fit did not converge.
    pub fallback_eif: Option<f64>,
    pub warnings: Vec<String>,
}

/// Point estimate, standard error and interval for one estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    /// Report label, e.g. `eif` or `eif-spline`.
    pub estimator: String,
    pub theta_hat: f64,
    pub variance: VarianceEstimate,
    pub ci: ConfidenceInterval,
    pub diagnostics: Diagnostics,
}

struct PlugInInputs {
    rates: JudgeErrorRates,
    gamma1: f64,
    p_pooled: f64,
}

fn plug_in_inputs(data: &BinaryDataset) -> Result<PlugInInputs> {
    let rates = estimators::estimate_error_rates(&data.summary())?;
    Ok(PlugInInputs {
        rates,
        gamma1: data.n() as f64 / data.m() as f64,
        p_pooled: data.pooled_positives() as f64 / data.total() as f64,
    })
}

fn closed_form_variance(
    data: &BinaryDataset,
    kind: EstimatorKind,
    estimate: &PointEstimate,
    mle_fit: Option<&MleFitResult>,
) -> Result<VarianceEstimate> {
    let n_total = data.total();
    if kind == EstimatorKind::Naive {
        return Ok(naive_variance(estimate.theta_hat, data.n()));
    }
    if kind == EstimatorKind::Mle {
        let fit = match mle_fit {
            Some(fit) => fit.info_inverse_11,
            None => mle::fit_mle(data, &MleConfig::default())?.info_inverse_11,
        };
        return Ok(VarianceEstimate::new(
            fit,
            n_total,
            VarianceSource::ClosedFormPlugIn,
        ));
    }
    let inputs = plug_in_inputs(data)?;
    let theta = clamp_proportion(estimate.theta_hat, n_total);
    let params = PopulationParams::plug_in(theta, &inputs.rates, inputs.gamma1, inputs.p_pooled)?;
    let v = match kind {
        EstimatorKind::RoganGladen => rg_variance(&params)?,
        EstimatorKind::Ppi => ppi_variance(&params),
        EstimatorKind::PpiPlus => ppiplus_variance(&params, estimate.lambda.unwrap_or(0.0)),
        EstimatorKind::Eif => eif_variance(&params)?,
        EstimatorKind::Naive | EstimatorKind::Mle => unreachable!(),
    };
    Ok(VarianceEstimate::new(
        v,
        n_total,
        VarianceSource::ClosedFormPlugIn,
    ))
}

/// Closed-form variance of `kind` evaluated at plug-in values: the
/// estimator's own `θ̂` (clamped to `[1/(2N), 1 - 1/(2N)]`), calibration
/// `q̂0`, `q̂1`, the judge rate pooled over all `N` labels and `γ̂1 = n/m`.
pub fn plug_in_variance(data: &BinaryDataset, kind: EstimatorKind) -> Result<VarianceEstimate> {
    Ok(infer(data, kind, 0.9)?.variance)
}

/// Point estimate, plug-in standard error and logit interval.
pub fn infer(data: &BinaryDataset, kind: EstimatorKind, level: f64) -> Result<InferenceResult> {
    let mut diagnostics = Diagnostics::default();
    let mut mle_fit = None;
    let estimate = match kind {
        EstimatorKind::Naive => estimators::naive_estimate(data)?,
        EstimatorKind::RoganGladen => estimators::rg_estimate_from_data(data)?,
        EstimatorKind::Ppi => estimators::ppi_estimate(data)?,
        EstimatorKind::PpiPlus => {
            let lambda = match estimators::optimal_lambda_plugin(data) {
                Ok(l) => l,
                Err(Error::ConstantSurrogate) => {
                    diagnostics
                        .warnings
                        .push("constant calibration surrogate; lambda set to 0".into());
                    0.0
                }
                Err(e) => return Err(e),
            };
            estimators::ppiplus_estimate(data, lambda)?
        }
        EstimatorKind::Eif => estimators::eif_binary_estimate(data)?,
        EstimatorKind::Mle => {
            let fit = mle::fit_mle(data, &MleConfig::default())?;
            diagnostics.converged = Some(fit.converged);
            diagnostics.iterations = Some(fit.iterations);
            diagnostics.fallback_eif = fit.fallback_eif;
            diagnostics
                .warnings
                .extend(fit.warnings.iter().map(|w| w.to_string()));
            let est = PointEstimate {
                theta_hat: fit.params.theta,
                estimator: EstimatorKind::Mle,
                lambda: None,
                clamped: false,
            };
            mle_fit = Some(fit);
            est
        }
    };
    diagnostics.lambda = estimate.lambda;
    diagnostics.clamped = estimate.clamped;
    if let Ok(rates) = estimators::estimate_error_rates(&data.summary()) {
        diagnostics.q0_hat = Some(rates.q0);
        diagnostics.q1_hat = Some(rates.q1);
    }
    let variance = closed_form_variance(data, kind, &estimate, mle_fit.as_ref())?;
    let ci = logit_ci(estimate.theta_hat, &variance, level);
    Ok(InferenceResult {
        estimator: kind.label().to_string(),
        theta_hat: estimate.theta_hat,
        variance,
        ci,
        diagnostics,
    })
}
