//! Joint maximum likelihood for `(θ, q0, q1)` over the test and calibration
//! samples.
//!
//! The test set contributes `Bern(p)` judge labels with
//! `p = (1 - θ)(1 - q0) + θ q1`; each calibration pair contributes its cell
//! probability. Fitting runs damped Newton-Raphson on the logit scale.

use std::fmt;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{self, BinaryDataset, CalibrationSummary};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleParams {
    pub theta: f64,
    pub q0: f64,
    pub q1: f64,
}

impl MleParams {
    pub fn new(theta: f64, q0: f64, q1: f64) -> Result<Self> {
        for (name, v) in [("theta", theta), ("q0", q0), ("q1", q1)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidParameter {
                    name,
                    value: v,
                    reason: "must lie in (0, 1)",
                });
            }
        }
        Ok(Self { theta, q0, q1 })
    }

    pub fn p(&self) -> f64 {
        (1.0 - self.theta) * (1.0 - self.q0) + self.theta * self.q1
    }

    pub fn kappa(&self) -> f64 {
        self.q0 + self.q1 - 1.0
    }

    fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.theta, self.q0, self.q1)
    }

    fn to_logit(self) -> Vector3<f64> {
        self.as_vector().map(logit)
    }

    fn from_logit(phi: &Vector3<f64>, eps: f64) -> Self {
        let v = phi.map(|x| logistic(x).clamp(eps, 1.0 - eps));
        Self {
            theta: v[0],
            q0: v[1],
            q1: v[2],
        }
    }

    /// `∇_η p = (q0 + q1 - 1, -(1 - θ), θ)`.
    fn marginal_gradient(&self) -> Vector3<f64> {
        Vector3::new(self.kappa(), -(1.0 - self.theta), self.theta)
    }
}

fn logit(x: f64) -> f64 {
    (x / (1.0 - x)).ln()
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Sufficient statistics of the likelihood.
#[derive(Debug, Clone, Copy)]
struct Counts {
    test_pos: f64,
    test_neg: f64,
    cal: CalibrationSummary,
}

impl Counts {
    fn of(data: &BinaryDataset) -> Self {
        let t1 = data.test_positives();
        Self {
            test_pos: t1 as f64,
            test_neg: (data.n() as u64 - t1) as f64,
            cal: data.summary(),
        }
    }

    fn x(&self, y: u8, y_hat: u8) -> f64 {
        self.cal.cell(y, y_hat) as f64
    }

    fn m0(&self) -> f64 {
        self.cal.m0 as f64
    }

    fn m1(&self) -> f64 {
        self.cal.m1 as f64
    }
}

/// `count · ln(prob)` with `0 · ln(0) = 0`.
fn xlogy(count: f64, prob: f64) -> f64 {
    if count == 0.0 {
        0.0
    } else {
        count * prob.ln()
    }
}

fn loglik_counts(params: &MleParams, c: &Counts) -> f64 {
    let MleParams { theta: t, q0, q1 } = *params;
    let p = params.p();
    xlogy(c.test_pos, p)
        + xlogy(c.test_neg, 1.0 - p)
        + xlogy(c.x(1, 1), t * q1)
        + xlogy(c.x(1, 0), t * (1.0 - q1))
        + xlogy(c.x(0, 1), (1.0 - t) * (1.0 - q0))
        + xlogy(c.x(0, 0), (1.0 - t) * q0)
}

fn score_counts(params: &MleParams, c: &Counts) -> Vector3<f64> {
    let MleParams { theta: t, q0, q1 } = *params;
    let p = params.p();
    let test = (c.test_pos / p - c.test_neg / (1.0 - p)) * params.marginal_gradient();
    let cal = Vector3::new(
        c.m1() / t - c.m0() / (1.0 - t),
        c.x(0, 0) / q0 - c.x(0, 1) / (1.0 - q0),
        c.x(1, 1) / q1 - c.x(1, 0) / (1.0 - q1),
    );
    test + cal
}

fn hessian_counts(params: &MleParams, c: &Counts) -> Matrix3<f64> {
    let MleParams { theta: t, q0, q1 } = *params;
    let p = params.p();
    let g = params.marginal_gradient();
    let curvature = -(c.test_pos / (p * p) + c.test_neg / ((1.0 - p) * (1.0 - p)));
    let slope = c.test_pos / p - c.test_neg / (1.0 - p);
    // second derivatives of p: ∂²p/∂θ∂q0 = ∂²p/∂θ∂q1 = 1
    let dg = Matrix3::new(0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0);
    let cal = Matrix3::from_diagonal(&Vector3::new(
        -c.m1() / (t * t) - c.m0() / ((1.0 - t) * (1.0 - t)),
        -c.x(0, 0) / (q0 * q0) - c.x(0, 1) / ((1.0 - q0) * (1.0 - q0)),
        -c.x(1, 1) / (q1 * q1) - c.x(1, 0) / ((1.0 - q1) * (1.0 - q1)),
    ));
    curvature * g * g.transpose() + slope * dg + cal
}

/// Log-likelihood of the combined sample, up to constants.
pub fn log_likelihood(params: &MleParams, data: &BinaryDataset) -> f64 {
    loglik_counts(params, &Counts::of(data))
}

/// Analytic gradient of [`log_likelihood`] in `(θ, q0, q1)`.
pub fn score(params: &MleParams, data: &BinaryDataset) -> [f64; 3] {
    let s = score_counts(params, &Counts::of(data));
    [s[0], s[1], s[2]]
}

/// Negative Hessian of the log-likelihood. Diagnostics only; reported
/// variances use [`expected_information`].
pub fn observed_information(params: &MleParams, data: &BinaryDataset) -> Matrix3<f64> {
    -hessian_counts(params, &Counts::of(data))
}

/// Per-observation Fisher information of the design with test/calibration
/// ratio `γ1`: `γ1/(1+γ1) I_test + 1/(1+γ1) I_cal`.
pub fn expected_information(params: &MleParams, gamma1: f64) -> Matrix3<f64> {
    let MleParams { theta: t, q0, q1 } = *params;
    let p = params.p();
    let g = params.marginal_gradient();
    let i_test = g * g.transpose() / (p * (1.0 - p));
    let i_cal = Matrix3::from_diagonal(&Vector3::new(
        1.0 / (t * (1.0 - t)),
        (1.0 - t) / (q0 * (1.0 - q0)),
        t / (q1 * (1.0 - q1)),
    ));
    i_test * (gamma1 / (1.0 + gamma1)) + i_cal * (1.0 / (1.0 + gamma1))
}

/// `[I_γ1⁻¹]₁₁` by numeric inversion.
pub fn info_inverse_11(params: &MleParams, gamma1: f64) -> Result<f64> {
    let inv = expected_information(params, gamma1)
        .try_inverse()
        .ok_or(Error::SingularInformation)?;
    let v = inv[(0, 0)];
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::SingularInformation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleConfig {
    pub tol_grad: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Interior clamp on the probability scale.
    pub eps_bnd: f64,
}

impl Default for MleConfig {
    fn default() -> Self {
        Self {
            tol_grad: 1e-10,
            max_iter: 100,
            max_halvings: 30,
            eps_bnd: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MleWarning {
    /// Calibration error rates satisfy `q̂0 + q̂1 < 1`; the reported mode is
    /// the one reached from that initializer.
    NonIdentifiableBranch,
    /// Step halving failed to improve the likelihood.
    LineSearchStalled,
}

impl fmt::Display for MleWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MleWarning::NonIdentifiableBranch => {
                f.write_str("NonIdentifiableBranch: calibration q0 + q1 < 1 at initialization")
            }
            MleWarning::LineSearchStalled => f.write_str("LineSearchStalled"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleFitResult {
    pub params: MleParams,
    pub loglik: f64,
    /// Euclidean norm of the score at `params`.
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `[I_γ̂1⁻¹]₁₁` at the fitted point, `γ̂1 = n/m`.
    pub info_inverse_11: f64,
    pub initial: MleParams,
    /// Log-likelihood after each accepted iterate, starting at the initializer.
    pub loglik_trace: Vec<f64>,
    pub warnings: Vec<MleWarning>,
    /// EIF estimate recorded when the fit did not converge.
    pub fallback_eif: Option<f64>,
}

/// Initializer: clamped Rogan-Gladen `θ̂` with the calibration `q̂0`, `q̂1`.
fn initial_params(data: &BinaryDataset, eps: f64) -> Result<(MleParams, bool)> {
    let summary = data.summary();
    let rates = estimators::estimate_error_rates(&summary)?;
    let theta = match estimators::rg_estimate_from_data(data) {
        Ok(est) => est.theta_hat,
        Err(_) => summary.y_bar_cal,
    };
    let below_chance = rates.kappa() < 0.0;
    let pull = |v: f64| v.clamp(eps, 1.0 - eps);
    Ok((
        MleParams {
            theta: pull(theta),
            q0: pull(rates.q0),
            q1: pull(rates.q1),
        },
        below_chance,
    ))
}

/// Newton direction on the logit scale. Falls back to Fisher scoring when
/// the observed curvature is not negative definite.
fn newton_direction(
    params: &MleParams,
    counts: &Counts,
    n_total: f64,
    gamma1: f64,
) -> Vector3<f64> {
    let v = params.as_vector();
    let d = v.map(|x| x * (1.0 - x));
    let s = score_counts(params, counts);
    let grad_phi = s.component_mul(&d);
    let jac = Matrix3::from_diagonal(&d);
    let mut neg_h = -(jac * hessian_counts(params, counts) * jac);
    for k in 0..3 {
        neg_h[(k, k)] -= s[k] * d[k] * (1.0 - 2.0 * v[k]);
    }
    if let Some(chol) = neg_h.cholesky() {
        return chol.solve(&grad_phi);
    }
    let fisher = jac * expected_information(params, gamma1) * jac * n_total;
    match fisher.cholesky() {
        Some(chol) => chol.solve(&grad_phi),
        None => grad_phi,
    }
}

pub fn fit_mle(data: &BinaryDataset, config: &MleConfig) -> Result<MleFitResult> {
    let counts = Counts::of(data);
    let (initial, below_chance) = initial_params(data, 1e-3)?;
    let mut warnings = Vec::new();
    if below_chance {
        warnings.push(MleWarning::NonIdentifiableBranch);
    }
    let gamma1 = data.n() as f64 / data.m() as f64;
    let n_total = data.total() as f64;
    let phi_bound = logit(1.0 - config.eps_bnd);

    let mut params = initial;
    let mut phi = params.to_logit();
    let mut ll = loglik_counts(&params, &counts);
    let mut grad_norm = score_counts(&params, &counts).norm();
    let mut trace = vec![ll];
    let mut iterations = 0;

    while grad_norm > config.tol_grad && iterations < config.max_iter {
        iterations += 1;
        let direction = newton_direction(&params, &counts, n_total, gamma1);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=config.max_halvings {
            let cand_phi = (phi + direction * step).map(|x| x.clamp(-phi_bound, phi_bound));
            let cand = MleParams::from_logit(&cand_phi, config.eps_bnd);
            let cand_ll = loglik_counts(&cand, &counts);
            if cand_ll.is_finite() {
                // Near the optimum the likelihood is flat to rounding; a tie
                // within a few ulps is accepted when the score shrinks.
                let tie = cand_ll >= ll - 4.0 * f64::EPSILON * ll.abs();
                let cand_grad = score_counts(&cand, &counts).norm();
                if cand_ll > ll || (tie && cand_grad < grad_norm) {
                    accepted = Some((cand_phi, cand, cand_ll, cand_grad));
                    break;
                }
            }
            step *= 0.5;
        }
        match accepted {
            Some((cand_phi, cand, cand_ll, cand_grad)) => {
                phi = cand_phi;
                params = cand;
                ll = cand_ll;
                grad_norm = cand_grad;
                trace.push(ll);
            }
            None => {
                warnings.push(MleWarning::LineSearchStalled);
                break;
            }
        }
    }

    let converged = grad_norm <= config.tol_grad;
    let fallback_eif = if converged {
        None
    } else {
        estimators::eif_binary_estimate(data)
            .ok()
            .map(|e| e.theta_hat)
    };
    Ok(MleFitResult {
        params,
        loglik: ll,
        grad_norm,
        iterations,
        converged,
        info_inverse_11: info_inverse_11(&params, gamma1)?,
        initial,
        loglik_trace: trace,
        warnings,
        fallback_eif,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(cells: [[usize; 2]; 2], test_pos: usize, test_neg: usize) -> BinaryDataset {
        let mut cal = Vec::new();
        for (y, row) in cells.iter().enumerate() {
            for (y_hat, &count) in row.iter().enumerate() {
                cal.extend(std::iter::repeat_n((y as u8, y_hat as u8), count));
            }
        }
        let mut test = vec![1u8; test_pos];
        test.extend(std::iter::repeat_n(0u8, test_neg));
        BinaryDataset::new(cal, test).unwrap()
    }

    #[test]
    fn single_cell_loglik() {
        let data = dataset([[0, 0], [0, 1]], 0, 0);
        let params = MleParams::new(0.5, 0.3, 0.5).unwrap();
        assert!((log_likelihood(&params, &data) - 0.25f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn calibration_only_fit_is_closed_form() {
        let data = dataset([[12, 5], [4, 9]], 0, 0);
        let fit = fit_mle(&data, &MleConfig::default()).unwrap();
        assert!(fit.converged);
        assert!((fit.params.theta - 13.0 / 30.0).abs() < 1e-10);
        assert!((fit.params.q0 - 12.0 / 17.0).abs() < 1e-10);
        assert!((fit.params.q1 - 9.0 / 13.0).abs() < 1e-10);
        let closed = MleParams::new(13.0 / 30.0, 12.0 / 17.0, 9.0 / 13.0).unwrap();
        let s = score(&closed, &data);
        assert!(s.iter().all(|v| v.abs() < 1e-10), "{s:?}");
    }

    #[test]
    fn mirrored_data_gives_symmetric_loglik() {
        let data = dataset([[3, 1], [2, 5]], 7, 4);
        let mirrored = data.label_swapped();
        let b = MleParams::new(0.3, 0.65, 0.8).unwrap();
        let b_swapped = MleParams::new(0.7, 0.8, 0.65).unwrap();
        assert!((log_likelihood(&b, &data) - log_likelihood(&b_swapped, &mirrored)).abs() < 1e-12);
    }

    #[test]
    fn calibration_information_is_diagonal() {
        let params = MleParams::new(0.37, 0.72, 0.64).unwrap();
        let cal_only = expected_information(&params, 0.0);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_eq!(cal_only[(i, j)], 0.0);
                }
            }
        }
        let inv = info_inverse_11(&params, 1e-12).unwrap();
        assert!((inv - 0.37 * 0.63).abs() < 1e-9);
    }

    #[test]
    fn information_inverse_example() {
        let params = MleParams::new(0.5, 0.8, 0.8).unwrap();
        assert!((info_inverse_11(&params, 9.0).unwrap() - 1.69).abs() < 1e-12);
    }

    #[test]
    fn fit_ascends_from_initializer() {
        let data = dataset([[14, 4], [3, 9]], 120, 150);
        let fit = fit_mle(&data, &MleConfig::default()).unwrap();
        assert!(fit.converged, "{fit:?}");
        assert!(fit.grad_norm <= 1e-10);
        assert!(fit.loglik >= log_likelihood(&fit.initial, &data));
        for w in fit.loglik_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-12 * w[0].abs());
        }
    }

    #[test]
    fn fit_is_label_swap_equivariant() {
        let data = dataset([[14, 4], [3, 9]], 120, 150);
        let a = fit_mle(&data, &MleConfig::default()).unwrap();
        let b = fit_mle(&data.label_swapped(), &MleConfig::default()).unwrap();
        assert!((a.params.theta - (1.0 - b.params.theta)).abs() < 1e-8);
        assert!((a.params.q0 - b.params.q1).abs() < 1e-8);
        assert!((a.params.q1 - b.params.q0).abs() < 1e-8);
    }

    #[test]
    fn below_chance_initializer_warns() {
        let data = dataset([[3, 9], [8, 4]], 30, 30);
        let fit = fit_mle(&data, &MleConfig::default()).unwrap();
        assert!(fit.warnings.contains(&MleWarning::NonIdentifiableBranch));
    }

    #[test]
    fn empty_class_is_rejected() {
        let data = dataset([[0, 0], [3, 9]], 30, 30);
        assert!(matches!(
            fit_mle(&data, &MleConfig::default()),
            Err(Error::DegenerateCalibrationClass { .. })
        ));
    }

    #[test]
    fn boundary_cell_stays_finite() {
        // x_10 = 0 pushes q1 to the boundary.
        let data = dataset([[10, 3], [0, 7]], 40, 60);
        let fit = fit_mle(&data, &MleConfig::default()).unwrap();
        assert!(fit.params.q1 < 1.0 && fit.params.q1 > 0.99);
        assert!(fit.loglik.is_finite());
        if !fit.converged {
            assert!(fit.fallback_eif.is_some());
        }
    }

    #[test]
    fn observed_information_matches_expected_scale() {
        let params = MleParams::new(0.4, 0.75, 0.7).unwrap();
        let data = dataset([[45, 15], [12, 28]], 400, 500);
        let obs = observed_information(&params, &data);
        assert!((obs - obs.transpose()).norm() < 1e-9);
        assert!(obs.cholesky().is_some());
    }
}
