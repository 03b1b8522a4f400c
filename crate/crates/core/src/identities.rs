//! Randomized verification of the asymptotic variance identities.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::inference::{self, PopulationParams};
use crate::simulation::replicate_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheckConfig {
    pub points: usize,
    pub seed: u64,
    /// Relative tolerance for the variance equalities.
    pub tolerance: f64,
    /// Every `perfect_every`-th point uses `q0 = q1 = 1`; zero disables.
    pub perfect_every: usize,
    /// Use `q0 = q1 = 1` at every point.
    pub perfect_only: bool,
    /// Added to `V_EIF` before comparison; nonzero values must be caught.
    pub eif_perturbation: f64,
}

impl Default for IdentityCheckConfig {
    fn default() -> Self {
        Self {
            points: 10_000,
            seed: 0,
            tolerance: 1e-10,
            perfect_every: 100,
            perfect_only: false,
            eif_perturbation: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityViolation {
    pub check: &'static str,
    pub params: PopulationParams,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub points: usize,
    pub perfect_points: usize,
    /// Perfect-judge points where `V_PPI` and `V_RG` are bit-identical.
    pub exact_ppi_rg_equalities: usize,
    /// Largest relative gap seen per check, in [`IdentityReport::CHECKS`] order.
    pub max_relative_gap: [f64; 6],
    pub violations: Vec<IdentityViolation>,
}

impl IdentityReport {
    pub const CHECKS: [&'static str; 6] = [
        "eif=mle",
        "eif=ppi++(lambda*)",
        "mle closed=numeric",
        "ppi<=rg",
        "p(1-p)=C+B",
        "lambda*=mu-difference",
    ];

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn draw_point<R: Rng>(rng: &mut R, perfect: bool) -> Result<PopulationParams> {
    let theta = rng.random_range(0.05..0.95);
    let (q0, q1) = if perfect {
        (1.0, 1.0)
    } else {
        (rng.random_range(0.55..0.99), rng.random_range(0.55..0.99))
    };
    let gamma1 = 10f64.powf(rng.random_range(-1.0..2.0));
    PopulationParams::new(theta, q0, q1, gamma1)
}

/// Sweeps random `(θ, q0, q1, γ1)` with `θ ∈ (0.05, 0.95)`,
/// `q ∈ (0.55, 0.99)` and `γ1 ∈ (0.1, 100)` log-uniform.
pub fn identity_check(config: &IdentityCheckConfig) -> Result<IdentityReport> {
    let mut rng = replicate_rng(config.seed, 0);
    let mut report = IdentityReport {
        points: config.points,
        perfect_points: 0,
        exact_ppi_rg_equalities: 0,
        max_relative_gap: [0.0; 6],
        violations: Vec::new(),
    };
    let tol = config.tolerance;
    for i in 0..config.points {
        let perfect = config.perfect_only
            || (config.perfect_every > 0 && i % config.perfect_every == config.perfect_every - 1);
        let params = draw_point(&mut rng, perfect)?;
        if perfect {
            report.perfect_points += 1;
        }
        let v_eif = inference::eif_variance(&params)? + config.eif_perturbation;
        let v_mle = inference::mle_variance(&params)?;
        let v_ppiplus = inference::ppiplus_variance(&params, params.lambda_star());
        let v_ppi = inference::ppi_variance(&params);
        let v_rg = inference::rg_variance(&params)?;
        let pq = params.p * (1.0 - params.p);
        let cb = params.between_class_variance() + params.within_class_variance();
        let (mu0, mu1) = params.conditional_means();
        let g = params.gamma1;
        let lambda_from_mu = g / (1.0 + g) * (mu1 - mu0);

        let mut record = |slot: usize, lhs: f64, rhs: f64, ok: bool, gap: f64| {
            report.max_relative_gap[slot] = report.max_relative_gap[slot].max(gap);
            if !ok {
                report.violations.push(IdentityViolation {
                    check: IdentityReport::CHECKS[slot],
                    params,
                    lhs,
                    rhs,
                });
            }
        };
        let gap = relative_gap(v_eif, v_mle);
        record(0, v_eif, v_mle, gap <= tol, gap);
        let gap = relative_gap(v_eif, v_ppiplus);
        record(1, v_eif, v_ppiplus, gap <= tol, gap);
        if !perfect {
            let numeric = inference::mle_variance_numeric(&params)?;
            let gap = relative_gap(v_mle, numeric);
            record(2, v_mle, numeric, gap <= 1e-9, gap);
        }
        let gap = relative_gap(v_ppi, v_rg);
        let ordered = if perfect {
            v_ppi == v_rg
        } else {
            v_ppi < v_rg && gap > tol
        };
        if perfect && v_ppi == v_rg {
            report.exact_ppi_rg_equalities += 1;
        }
        record(3, v_ppi, v_rg, ordered, if perfect { gap } else { 0.0 });
        let gap = (pq - cb).abs();
        record(4, pq, cb, gap <= 1e-12, gap);
        let gap = relative_gap(params.lambda_star(), lambda_from_mu);
        record(5, params.lambda_star(), lambda_from_mu, gap <= tol, gap);
    }
    Ok(report)
}
