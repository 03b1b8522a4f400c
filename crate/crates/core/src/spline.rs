//! Penalized natural cubic regression spline on a fixed knot set.
//!
//! The spline is parameterized by its values `g` at the knots. Second
//! derivatives at the knots follow from `R γ = Qᵀ g` (natural end
//! conditions), and outside the knot range the fit extends linearly.
//! Smoothness is controlled by a ridge penalty on the second divided
//! differences `Qᵀ g`, with the weight chosen by generalized
//! cross-validation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_INTERIOR_KNOTS: usize = 8;
const GCV_GRID: usize = 20;
const GCV_LOG10_MIN: f64 = -8.0;
const GCV_LOG10_MAX: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaturalSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    /// Second derivatives at the knots; zero at both ends.
    curvature: Vec<f64>,
    pub lambda: f64,
    pub effective_df: f64,
}

/// Inverse empirical CDF; always returns an observed value.
fn quantile(sorted: &[f64], prob: f64) -> f64 {
    let rank = (prob * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Range endpoints plus up to eight interior quantiles, deduplicated.
pub fn choose_knots(x: &[f64]) -> Vec<f64> {
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut knots = vec![sorted[0]];
    let slots = MAX_INTERIOR_KNOTS + 1;
    for j in 1..slots {
        knots.push(quantile(&sorted, j as f64 / slots as f64));
    }
    knots.push(sorted[sorted.len() - 1]);
    knots.dedup_by(|a, b| *a <= *b);
    knots
}

/// `Q` (K×(K−2)) and `R` ((K−2)×(K−2)) of the natural spline value/curvature
/// relation.
fn band_matrices(knots: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    let k = knots.len();
    let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
    let inner = k.saturating_sub(2);
    let mut q = DMatrix::zeros(k, inner);
    let mut r = DMatrix::zeros(inner, inner);
    for j in 0..inner {
        q[(j, j)] = 1.0 / h[j];
        q[(j + 1, j)] = -1.0 / h[j] - 1.0 / h[j + 1];
        q[(j + 2, j)] = 1.0 / h[j + 1];
        r[(j, j)] = (h[j] + h[j + 1]) / 3.0;
        if j + 1 < inner {
            r[(j, j + 1)] = h[j + 1] / 6.0;
            r[(j + 1, j)] = h[j + 1] / 6.0;
        }
    }
    (q, r)
}

/// Maps knot values to full-length curvature vectors (K×K, zero end rows).
fn curvature_operator(knots: &[f64]) -> DMatrix<f64> {
    let k = knots.len();
    let mut op = DMatrix::zeros(k, k);
    if k < 3 {
        return op;
    }
    let (q, r) = band_matrices(knots);
    let solved = r
        .cholesky()
        .expect("spline band matrix is positive definite for increasing knots")
        .solve(&q.transpose());
    op.view_mut((1, 0), (k - 2, k)).copy_from(&solved);
    op
}

/// Linear functional `g ↦ f(x)` expressed through knot values and curvatures.
fn evaluation_weights(knots: &[f64], x: f64) -> (Vec<f64>, Vec<f64>) {
    let k = knots.len();
    let mut wg = vec![0.0; k];
    let mut wc = vec![0.0; k];
    if x <= knots[0] {
        let h = knots[1] - knots[0];
        let d = x - knots[0];
        wg[0] = 1.0 - d / h;
        wg[1] = d / h;
        if k > 2 {
            wc[1] = -d * h / 6.0;
        }
        return (wg, wc);
    }
    if x >= knots[k - 1] {
        let h = knots[k - 1] - knots[k - 2];
        let d = x - knots[k - 1];
        wg[k - 1] = 1.0 + d / h;
        wg[k - 2] = -d / h;
        if k > 2 {
            wc[k - 2] = d * h / 6.0;
        }
        return (wg, wc);
    }
    let i = knots.partition_point(|&t| t <= x).clamp(1, k - 1) - 1;
    let h = knots[i + 1] - knots[i];
    let a = x - knots[i];
    let b = knots[i + 1] - x;
    wg[i] = b / h;
    wg[i + 1] = a / h;
    wc[i] = -a * b * (1.0 + b / h) / 6.0;
    wc[i + 1] = -a * b * (1.0 + a / h) / 6.0;
    (wg, wc)
}

fn basis_row(knots: &[f64], curv: &DMatrix<f64>, x: f64) -> DVector<f64> {
    let (wg, wc) = evaluation_weights(knots, x);
    DVector::from_vec(wg) + curv.transpose() * DVector::from_vec(wc)
}

impl NaturalSpline {
    /// Fits the spline to `(x, y)` pairs with GCV-selected smoothing.
    pub fn fit(x: &[f64], y: &[f64]) -> Result<Self> {
        assert_eq!(x.len(), y.len());
        let knots = choose_knots_checked(x)?;
        let curv = curvature_operator(&knots);
        let k = knots.len();
        let m = x.len();
        let mut design = DMatrix::zeros(m, k);
        for (row, &xi) in x.iter().enumerate() {
            design.set_row(row, &basis_row(&knots, &curv, xi).transpose());
        }
        let xtx = design.transpose() * &design;
        let xty = design.transpose() * DVector::from_column_slice(y);
        let (q, _) = band_matrices(&knots);
        let penalty = &q * q.transpose();

        if k == 2 || penalty.trace() == 0.0 {
            let g = solve_spd(&xtx, &xty)?;
            return Ok(Self::assemble(knots, &curv, g, 0.0, 2.0));
        }

        let scale = xtx.trace() / penalty.trace();
        let mut best: Option<(f64, f64, DVector<f64>, f64)> = None;
        for step in 0..GCV_GRID {
            let exponent = GCV_LOG10_MIN
                + (GCV_LOG10_MAX - GCV_LOG10_MIN) * step as f64 / (GCV_GRID - 1) as f64;
            let lambda = scale * 10f64.powf(exponent);
            let a = &xtx + &penalty * lambda;
            let Some(chol) = a.clone().cholesky() else {
                continue;
            };
            let g = chol.solve(&xty);
            let df = (chol.inverse() * &xtx).trace();
            let resid = DVector::from_column_slice(y) - &design * &g;
            let denom = 1.0 - df / m as f64;
            if denom <= 0.0 {
                continue;
            }
            let score = resid.norm_squared() / m as f64 / (denom * denom);
            if best.as_ref().is_none_or(|b| score < b.0) {
                best = Some((score, lambda, g, df));
            }
        }
        let (_, lambda, g, df) = best.ok_or(Error::RankDeficient { family: "spline" })?;
        Ok(Self::assemble(knots, &curv, g, lambda, df))
    }

    fn assemble(
        knots: Vec<f64>,
        curv: &DMatrix<f64>,
        g: DVector<f64>,
        lambda: f64,
        df: f64,
    ) -> Self {
        let curvature = (curv * &g).iter().copied().collect();
        Self {
            knots,
            values: g.iter().copied().collect(),
            curvature,
            lambda,
            effective_df: df,
        }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Fitted values at the knots.
    pub fn knot_values(&self) -> &[f64] {
        &self.values
    }

    pub fn predict(&self, x: f64) -> f64 {
        let (wg, wc) = evaluation_weights(&self.knots, x);
        wg.iter().zip(&self.values).map(|(w, v)| w * v).sum::<f64>()
            + wc.iter()
                .zip(&self.curvature)
                .map(|(w, c)| w * c)
                .sum::<f64>()
    }
}

fn choose_knots_checked(x: &[f64]) -> Result<Vec<f64>> {
    if x.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            have: x.len(),
        });
    }
    let knots = choose_knots(x);
    if knots.len() < 2 {
        return Err(Error::RankDeficient { family: "spline" });
    }
    Ok(knots)
}

fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    a.clone()
        .cholesky()
        .map(|c| c.solve(b))
        .ok_or(Error::RankDeficient { family: "spline" })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn knots_on_three_levels() {
        let x = [1.0, 2.0, 3.0, 1.0, 2.0, 3.0, 3.0];
        assert_eq!(choose_knots(&x), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn knots_capped() {
        let x: Vec<f64> = (0..500).map(|i| i as f64 / 7.0).collect();
        let knots = choose_knots(&x);
        assert_eq!(knots.len(), MAX_INTERIOR_KNOTS + 2);
        assert!(knots.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn interpolates_knot_values() {
        let knots = [0.0, 1.0, 2.5, 4.0];
        let curv = curvature_operator(&knots);
        for (j, &t) in knots.iter().enumerate() {
            let row = basis_row(&knots, &curv, t);
            for (i, v) in row.iter().enumerate() {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((v - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reproduces_a_line() {
        let x: Vec<f64> = (0..60).map(|i| (i as f64 * 0.37).sin() * 3.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.5 - 0.25 * v).collect();
        let s = NaturalSpline::fit(&x, &y).unwrap();
        for probe in [-5.0, -1.0, 0.3, 2.9, 6.0] {
            assert!((s.predict(probe) - (1.5 - 0.25 * probe)).abs() < 1e-8);
        }
    }

    #[test]
    fn continuous_across_knots() {
        let x: Vec<f64> = (0..200).map(|i| i as f64 / 20.0).collect();
        let y: Vec<f64> = x.iter().map(|v| (v * 1.3).sin()).collect();
        let s = NaturalSpline::fit(&x, &y).unwrap();
        for &t in s.knots() {
            let left = s.predict(t - 1e-9);
            let right = s.predict(t + 1e-9);
            assert!((left - right).abs() < 1e-6);
        }
        for &xi in x.iter().step_by(17) {
            assert!((s.predict(xi) - (xi * 1.3).sin()).abs() < 0.05);
        }
    }

    #[test]
    fn constant_input_is_rank_deficient() {
        assert!(matches!(
            NaturalSpline::fit(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]),
            Err(Error::RankDeficient { .. })
        ));
    }
}
