//! Point estimators for the mean human outcome `θ = E[Y]` from binary judge
//! labels.
//!
//! The calibration set carries paired `(y, y_hat)` labels, the test set only
//! the judge label `y_hat`. Every estimator here works from exact integer
//! cell counts and divides once at the end.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Threshold on `|q0 + q1 - 1|` below which the misclassification correction
/// is treated as singular.
pub const EPS_IDENT: f64 = 1e-6;

/// Calibration pairs `(y, y_hat)` and test-only judge labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryDataset {
    calibration: Vec<(u8, u8)>,
    test: Vec<u8>,
}

impl BinaryDataset {
    /// Builds a dataset; labels must be 0 or 1 and the calibration set must be
    /// nonempty.
    pub fn new(calibration: Vec<(u8, u8)>, test: Vec<u8>) -> Result<Self> {
        if calibration.is_empty() {
            return Err(Error::EmptyCalibrationSet);
        }
        for (index, &(y, y_hat)) in calibration.iter().enumerate() {
            for v in [y, y_hat] {
                if v > 1 {
                    return Err(Error::InvalidLabel {
                        index,
                        value: f64::from(v),
                    });
                }
            }
        }
        if let Some((index, &v)) = test.iter().enumerate().find(|(_, &v)| v > 1) {
            return Err(Error::InvalidLabel {
                index,
                value: f64::from(v),
            });
        }
        Ok(Self { calibration, test })
    }

    pub fn calibration(&self) -> &[(u8, u8)] {
        &self.calibration
    }

    pub fn test(&self) -> &[u8] {
        &self.test
    }

    /// Calibration size `m`.
    pub fn m(&self) -> usize {
        self.calibration.len()
    }

    /// Test size `n`.
    pub fn n(&self) -> usize {
        self.test.len()
    }

    /// Total size `N = n + m`.
    pub fn total(&self) -> usize {
        self.m() + self.n()
    }

    pub fn test_positives(&self) -> u64 {
        self.test.iter().map(|&v| u64::from(v)).sum()
    }

    /// Judge positives over all `N` points.
    pub fn pooled_positives(&self) -> u64 {
        self.test_positives() + self.summary().yhat_positives()
    }

    pub fn summary(&self) -> CalibrationSummary {
        CalibrationSummary::from_pairs(&self.calibration)
    }

    /// Relabels `Y -> 1 - Y` and `Y_hat -> 1 - Y_hat` everywhere.
    pub fn label_swapped(&self) -> Self {
        Self {
            calibration: self
                .calibration
                .iter()
                .map(|&(y, y_hat)| (1 - y, 1 - y_hat))
                .collect(),
            test: self.test.iter().map(|&v| 1 - v).collect(),
        }
    }
}

/// Sufficient statistics of the calibration set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSummary {
    /// `cells[a][b]` counts calibration pairs with `y = a`, `y_hat = b`.
    pub cells: [[u64; 2]; 2],
    pub m: u64,
    pub m0: u64,
    pub m1: u64,
    pub y_bar_cal: f64,
    pub yhat_bar_cal: f64,
    pub mu0_hat: Option<f64>,
    pub mu1_hat: Option<f64>,
}

impl CalibrationSummary {
    pub fn from_pairs(pairs: &[(u8, u8)]) -> Self {
        let mut cells = [[0u64; 2]; 2];
        for &(y, y_hat) in pairs {
            cells[usize::from(y)][usize::from(y_hat)] += 1;
        }
        Self::from_cells(cells)
    }

    pub fn from_cells(cells: [[u64; 2]; 2]) -> Self {
        let m1 = cells[1][0] + cells[1][1];
        let m0 = cells[0][0] + cells[0][1];
        let m = m0 + m1;
        let c1 = cells[0][1] + cells[1][1];
        let c0 = cells[0][0] + cells[1][0];
        let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
        Self {
            cells,
            m,
            m0,
            m1,
            y_bar_cal: ratio(m1, m).unwrap_or(f64::NAN),
            yhat_bar_cal: ratio(c1, m).unwrap_or(f64::NAN),
            mu0_hat: ratio(cells[1][0], c0),
            mu1_hat: ratio(cells[1][1], c1),
        }
    }

    pub fn cell(&self, y: u8, y_hat: u8) -> u64 {
        self.cells[usize::from(y)][usize::from(y_hat)]
    }

    /// Calibration pairs with `y_hat = 1`.
    pub fn yhat_positives(&self) -> u64 {
        self.cells[0][1] + self.cells[1][1]
    }

    /// Calibration pairs with `y_hat = 0`.
    pub fn yhat_negatives(&self) -> u64 {
        self.cells[0][0] + self.cells[1][0]
    }
}

/// Specificity `q0 = P(Y_hat = 0 | Y = 0)` and sensitivity
/// `q1 = P(Y_hat = 1 | Y = 1)` of the judge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JudgeErrorRates {
    pub q0: f64,
    pub q1: f64,
    /// `|q0 + q1 - 1| > EPS_IDENT`.
    pub identifiable: bool,
}

impl JudgeErrorRates {
    pub fn new(q0: f64, q1: f64) -> Result<Self> {
        check_probability("q0", q0)?;
        check_probability("q1", q1)?;
        Ok(Self {
            q0,
            q1,
            identifiable: (q0 + q1 - 1.0).abs() > EPS_IDENT,
        })
    }

    /// Youden index `q0 + q1 - 1`.
    pub fn kappa(&self) -> f64 {
        self.q0 + self.q1 - 1.0
    }
}

pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must lie in [0, 1]",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EstimatorKind {
    #[serde(rename = "naive")]
    Naive,
    #[serde(rename = "rg")]
    RoganGladen,
    #[serde(rename = "ppi")]
    Ppi,
    #[serde(rename = "ppi++")]
    PpiPlus,
    #[serde(rename = "mle")]
    Mle,
    #[serde(rename = "eif")]
    Eif,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 6] = [
        EstimatorKind::Naive,
        EstimatorKind::RoganGladen,
        EstimatorKind::Ppi,
        EstimatorKind::PpiPlus,
        EstimatorKind::Mle,
        EstimatorKind::Eif,
    ];

    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::Naive => "naive",
            EstimatorKind::RoganGladen => "rg",
            EstimatorKind::Ppi => "ppi",
            EstimatorKind::PpiPlus => "ppi++",
            EstimatorKind::Mle => "mle",
            EstimatorKind::Eif => "eif",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for EstimatorKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "naive" => Ok(EstimatorKind::Naive),
            "rg" | "rogan-gladen" => Ok(EstimatorKind::RoganGladen),
            "ppi" => Ok(EstimatorKind::Ppi),
            "ppi++" | "ppipp" | "ppiplus" => Ok(EstimatorKind::PpiPlus),
            "mle" => Ok(EstimatorKind::Mle),
            "eif" => Ok(EstimatorKind::Eif),
            other => Err(format!("unknown estimator `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointEstimate {
    pub theta_hat: f64,
    pub estimator: EstimatorKind,
    /// Tuning weight, PPI++ only.
    pub lambda: Option<f64>,
    /// Set when the raw Rogan-Gladen value fell outside `[0, 1]`.
    pub clamped: bool,
}

impl PointEstimate {
    fn plain(theta_hat: f64, estimator: EstimatorKind) -> Self {
        Self {
            theta_hat,
            estimator,
            lambda: None,
            clamped: false,
        }
    }
}

/// Share of judge positives on the test set.
pub fn naive_estimate(data: &BinaryDataset) -> Result<PointEstimate> {
    if data.n() == 0 {
        return Err(Error::EmptyTestSet);
    }
    let p_hat = data.test_positives() as f64 / data.n() as f64;
    Ok(PointEstimate::plain(p_hat, EstimatorKind::Naive))
}

/// Empirical specificity and sensitivity from the calibration cells.
pub fn estimate_error_rates(summary: &CalibrationSummary) -> Result<JudgeErrorRates> {
    match (summary.m0, summary.m1) {
        (0, 0) => Err(Error::DegenerateCalibrationClass {
            missing: "y = 0 or y = 1",
        }),
        (0, _) => Err(Error::DegenerateCalibrationClass { missing: "y = 0" }),
        (_, 0) => Err(Error::DegenerateCalibrationClass { missing: "y = 1" }),
        (m0, m1) => JudgeErrorRates::new(
            summary.cell(0, 0) as f64 / m0 as f64,
            summary.cell(1, 1) as f64 / m1 as f64,
        ),
    }
}

/// Rogan-Gladen inversion `(p + q0 - 1) / (q0 + q1 - 1)`, clamped to `[0, 1]`.
pub fn rg_estimate(p_hat: f64, rates: &JudgeErrorRates) -> Result<PointEstimate> {
    let kappa = rates.kappa();
    if kappa.abs() < EPS_IDENT {
        return Err(Error::NearSingularCorrection { kappa });
    }
    let raw = (p_hat - (1.0 - rates.q0)) / kappa;
    let clamped = !(0.0..=1.0).contains(&raw);
    Ok(PointEstimate {
        theta_hat: raw.clamp(0.0, 1.0),
        estimator: EstimatorKind::RoganGladen,
        lambda: None,
        clamped,
    })
}

/// Rogan-Gladen using the test-set judge rate and calibration error rates.
pub fn rg_estimate_from_data(data: &BinaryDataset) -> Result<PointEstimate> {
    let p_hat = naive_estimate(data)?.theta_hat;
    let rates = estimate_error_rates(&data.summary())?;
    rg_estimate(p_hat, &rates)
}

/// `ȳ_cal + λ (p̂_test - ŷ̄_cal)`; at `λ = 1` this is the PPI form
/// `p̂_test - mean(ŷ - y)` rearranged.
fn ppiplus_value(data: &BinaryDataset, lambda: f64) -> Result<f64> {
    if data.n() == 0 {
        return Err(Error::EmptyTestSet);
    }
    if data.m() == 0 {
        return Err(Error::EmptyCalibrationSet);
    }
    let s = data.summary();
    let m = s.m as f64;
    let y_bar = s.m1 as f64 / m;
    let yhat_bar = s.yhat_positives() as f64 / m;
    let p_hat = data.test_positives() as f64 / data.n() as f64;
    Ok(y_bar + lambda * (p_hat - yhat_bar))
}

/// Prediction-powered estimate: the test judge rate corrected by the mean
/// calibration residual.
pub fn ppi_estimate(data: &BinaryDataset) -> Result<PointEstimate> {
    let theta_hat = ppiplus_value(data, 1.0)?;
    Ok(PointEstimate::plain(theta_hat, EstimatorKind::Ppi))
}

pub fn ppiplus_estimate(data: &BinaryDataset, lambda: f64) -> Result<PointEstimate> {
    let theta_hat = ppiplus_value(data, lambda)?;
    Ok(PointEstimate {
        theta_hat,
        estimator: EstimatorKind::PpiPlus,
        lambda: Some(lambda),
        clamped: false,
    })
}

/// Plug-in variance-minimising weight `(n/N) Cov(Y, Ŷ) / Var(Ŷ)`, moments
/// taken on the calibration set.
pub fn optimal_lambda_plugin(data: &BinaryDataset) -> Result<f64> {
    let s = data.summary();
    let m = i128::from(s.m);
    let c1 = i128::from(s.yhat_positives());
    let c0 = i128::from(s.yhat_negatives());
    if c1 == 0 || c0 == 0 {
        return Err(Error::ConstantSurrogate);
    }
    // m^2 Cov(Y, Ŷ) and m^2 Var(Ŷ)
    let cov = i128::from(s.cell(1, 1)) * m - i128::from(s.m1) * c1;
    let var = c1 * c0;
    let share = data.n() as f64 / data.total() as f64;
    Ok(share * (cov as f64 / var as f64))
}

/// One surrogate level's contribution to the one-step estimator.
#[derive(Debug, Clone, Copy)]
pub(crate) struct OneStepCell {
    /// Points with this level over all `N` observations.
    pub all_count: u64,
    /// Calibration points with this level.
    pub cal_count: u64,
    /// Sum of `y` over those calibration points.
    pub cal_sum_y: f64,
    pub mu: f64,
}

/// `(1/N) Σ_all μ̂(ŷ) + residual_scale · Σ_cal (y - μ̂(ŷ))`, accumulated per
/// level.
pub(crate) fn one_step_from_cells(
    cells: &[OneStepCell],
    n_total: usize,
    residual_scale: f64,
) -> f64 {
    let mut imputed = 0.0;
    let mut residual = 0.0;
    for cell in cells {
        imputed += cell.all_count as f64 * cell.mu;
        residual += cell.cal_sum_y - cell.cal_count as f64 * cell.mu;
    }
    imputed / n_total as f64 + residual * residual_scale
}

pub(crate) fn binary_one_step_cells(data: &BinaryDataset) -> Result<[OneStepCell; 2]> {
    let s = data.summary();
    let (mu0, mu1) = match (s.mu0_hat, s.mu1_hat) {
        (Some(a), Some(b)) => (a, b),
        (None, _) => return Err(Error::DegenerateSurrogateCell { level: 0 }),
        (_, None) => return Err(Error::DegenerateSurrogateCell { level: 1 }),
    };
    let t1 = data.test_positives();
    let t0 = data.n() as u64 - t1;
    Ok([
        OneStepCell {
            all_count: t0 + s.yhat_negatives(),
            cal_count: s.yhat_negatives(),
            cal_sum_y: s.cell(1, 0) as f64,
            mu: mu0,
        },
        OneStepCell {
            all_count: t1 + s.yhat_positives(),
            cal_count: s.yhat_positives(),
            cal_sum_y: s.cell(1, 1) as f64,
            mu: mu1,
        },
    ])
}

/// One-step efficient estimator with `μ̂(ŷ)` the calibration mean of `Y`
/// within each judge-label cell.
pub fn eif_binary_estimate(data: &BinaryDataset) -> Result<PointEstimate> {
    let cells = binary_one_step_cells(data)?;
    let theta_hat = one_step_from_cells(&cells, data.total(), 1.0 / data.m() as f64);
    Ok(PointEstimate::plain(theta_hat, EstimatorKind::Eif))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset_from_cells(cells: [[usize; 2]; 2], test: &[u8]) -> BinaryDataset {
        let mut cal = Vec::new();
        for (y, row) in cells.iter().enumerate() {
            for (y_hat, &count) in row.iter().enumerate() {
                cal.extend(std::iter::repeat_n((y as u8, y_hat as u8), count));
            }
        }
        BinaryDataset::new(cal, test.to_vec()).unwrap()
    }

    #[test]
    fn naive_is_test_mean() {
        let data = BinaryDataset::new(vec![(1, 0)], vec![1, 1, 0, 1]).unwrap();
        assert_eq!(naive_estimate(&data).unwrap().theta_hat, 0.75);
        let zeros = BinaryDataset::new(vec![(1, 1)], vec![0; 5]).unwrap();
        assert_eq!(naive_estimate(&zeros).unwrap().theta_hat, 0.0);
    }

    #[test]
    fn naive_rejects_empty_test() {
        let data = BinaryDataset::new(vec![(1, 1)], vec![]).unwrap();
        assert!(matches!(naive_estimate(&data), Err(Error::EmptyTestSet)));
    }

    #[test]
    fn dataset_rejects_bad_labels() {
        assert!(matches!(
            BinaryDataset::new(vec![(2, 0)], vec![]),
            Err(Error::InvalidLabel { .. })
        ));
        assert!(matches!(
            BinaryDataset::new(vec![(1, 0)], vec![0, 3]),
            Err(Error::InvalidLabel { index: 1, .. })
        ));
        assert!(matches!(
            BinaryDataset::new(vec![], vec![0]),
            Err(Error::EmptyCalibrationSet)
        ));
    }

    #[test]
    fn summary_counts_are_consistent() {
        let data = dataset_from_cells([[8, 2], [3, 7]], &[]);
        let s = data.summary();
        assert_eq!(s.cells.iter().flatten().sum::<u64>(), s.m);
        assert_eq!(s.m0 + s.m1, s.m);
        assert_eq!(s.mu1_hat, Some(7.0 / 9.0));
        assert_eq!(s.mu0_hat, Some(3.0 / 11.0));
    }

    #[test]
    fn error_rates_from_cells() {
        let s = dataset_from_cells([[8, 2], [3, 7]], &[]).summary();
        let rates = estimate_error_rates(&s).unwrap();
        assert_eq!(rates.q1, 0.7);
        assert_eq!(rates.q0, 0.8);

        let perfect = dataset_from_cells([[4, 0], [0, 6]], &[]).summary();
        let rates = estimate_error_rates(&perfect).unwrap();
        assert_eq!((rates.q0, rates.q1), (1.0, 1.0));
    }

    #[test]
    fn error_rates_name_the_empty_class() {
        let s = dataset_from_cells([[0, 0], [3, 7]], &[]).summary();
        match estimate_error_rates(&s) {
            Err(Error::DegenerateCalibrationClass { missing }) => assert_eq!(missing, "y = 0"),
            other => panic!("unexpected {other:?}"),
        }
        let s = dataset_from_cells([[2, 2], [0, 0]], &[]).summary();
        match estimate_error_rates(&s) {
            Err(Error::DegenerateCalibrationClass { missing }) => assert_eq!(missing, "y = 1"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rg_direct_evaluations() {
        let r = JudgeErrorRates::new(0.8, 0.8).unwrap();
        assert!((rg_estimate(0.5, &r).unwrap().theta_hat - 0.5).abs() < 1e-15);

        let perfect = JudgeErrorRates::new(1.0, 1.0).unwrap();
        assert_eq!(rg_estimate(0.37, &perfect).unwrap().theta_hat, 0.37);

        let r = JudgeErrorRates::new(0.74, 0.69).unwrap();
        let est = rg_estimate(0.62, &r).unwrap();
        assert!((est.theta_hat - 0.36 / 0.43).abs() < 1e-12);
        assert!((est.theta_hat - 0.8372).abs() < 1e-4);
        assert!(!est.clamped);
    }

    #[test]
    fn rg_clamps_and_flags() {
        let r = JudgeErrorRates::new(0.7, 0.7).unwrap();
        let low = rg_estimate(0.1, &r).unwrap();
        assert!(low.clamped);
        assert_eq!(low.theta_hat, 0.0);
        let high = rg_estimate(0.95, &r).unwrap();
        assert!(high.clamped);
        assert_eq!(high.theta_hat, 1.0);
    }

    #[test]
    fn rg_rejects_uninformative_judge() {
        let r = JudgeErrorRates::new(0.5, 0.5 + 1e-8).unwrap();
        assert!(!r.identifiable);
        assert!(matches!(
            rg_estimate(0.5, &r),
            Err(Error::NearSingularCorrection { .. })
        ));
    }

    #[test]
    fn ppi_hand_arithmetic() {
        // 10 test points with 6 positives; calibration residual mean 0.1.
        let cal = vec![
            (1, 1),
            (0, 1),
            (1, 1),
            (0, 0),
            (1, 1),
            (0, 0),
            (1, 1),
            (0, 0),
            (1, 1),
            (0, 0),
        ];
        let test = vec![1, 1, 1, 1, 1, 1, 0, 0, 0, 0];
        let data = BinaryDataset::new(cal, test).unwrap();
        assert!((ppi_estimate(&data).unwrap().theta_hat - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ppi_zero_residual_is_test_mean() {
        let data = dataset_from_cells([[3, 0], [0, 5]], &[1, 0, 0, 1, 1]);
        assert_eq!(ppi_estimate(&data).unwrap().theta_hat, 0.6);
    }

    #[test]
    fn ppiplus_special_weights() {
        let data = dataset_from_cells([[3, 2], [1, 4]], &[1, 0, 0, 1, 1, 1, 0]);
        let s = data.summary();
        assert_eq!(ppiplus_estimate(&data, 0.0).unwrap().theta_hat, s.y_bar_cal);
        assert_eq!(
            ppiplus_estimate(&data, 1.0).unwrap().theta_hat.to_bits(),
            ppi_estimate(&data).unwrap().theta_hat.to_bits()
        );
    }

    #[test]
    fn ppiplus_hand_arithmetic() {
        // ȳ_cal = 0.4, ŷ̄_cal = 0.5, p̂_test = 0.7
        let data = dataset_from_cells([[4, 2], [1, 3]], &[1, 1, 1, 1, 1, 1, 1, 0, 0, 0]);
        let est = ppiplus_estimate(&data, 0.54).unwrap();
        assert!((est.theta_hat - 0.508).abs() < 1e-12);
        assert_eq!(est.lambda, Some(0.54));
    }

    #[test]
    fn optimal_lambda_cases() {
        // Y independent of Ŷ in the sample: cells proportional.
        let data = dataset_from_cells([[2, 2], [3, 3]], &[1, 0]);
        assert_eq!(optimal_lambda_plugin(&data).unwrap(), 0.0);

        // Perfect agreement, n = m.
        let data = dataset_from_cells([[3, 0], [0, 2]], &[1, 0, 1, 1, 0]);
        assert_eq!(optimal_lambda_plugin(&data).unwrap(), 0.5);

        let constant = dataset_from_cells([[3, 0], [2, 0]], &[1]);
        assert!(matches!(
            optimal_lambda_plugin(&constant),
            Err(Error::ConstantSurrogate)
        ));
    }

    #[test]
    fn eif_perfect_agreement_is_pooled_mean() {
        let data = dataset_from_cells([[3, 0], [0, 2]], &[1, 0, 1, 1, 0, 0, 0]);
        // pooled judge positives 2 + 3 over N = 12
        let est = eif_binary_estimate(&data).unwrap();
        assert!((est.theta_hat - 5.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn eif_without_test_is_calibration_mean() {
        let data = dataset_from_cells([[3, 2], [1, 4]], &[]);
        let est = eif_binary_estimate(&data).unwrap();
        assert!((est.theta_hat - 0.5).abs() < 1e-15);
    }

    #[test]
    fn eif_matches_ppiplus_at_cell_slope() {
        let data = dataset_from_cells([[5, 2], [1, 4]], &[1, 0, 0, 1, 1, 1, 0, 1]);
        let s = data.summary();
        let lambda =
            data.n() as f64 / data.total() as f64 * (s.mu1_hat.unwrap() - s.mu0_hat.unwrap());
        let eif = eif_binary_estimate(&data).unwrap().theta_hat;
        let ppp = ppiplus_estimate(&data, lambda).unwrap().theta_hat;
        assert!((eif - ppp).abs() < 1e-12);
        assert!((optimal_lambda_plugin(&data).unwrap() - lambda).abs() < 1e-12);
    }

    #[test]
    fn eif_requires_both_cells() {
        let data = dataset_from_cells([[3, 0], [2, 0]], &[1]);
        assert!(matches!(
            eif_binary_estimate(&data),
            Err(Error::DegenerateSurrogateCell { level: 1 })
        ));
        let data = dataset_from_cells([[0, 3], [0, 2]], &[1]);
        assert!(matches!(
            eif_binary_estimate(&data),
            Err(Error::DegenerateSurrogateCell { level: 0 })
        ));
    }

    #[test]
    fn perfect_judge_estimates_in_unit_interval() {
        let data = dataset_from_cells([[6, 0], [0, 4]], &[1, 1, 0, 0, 0, 1, 0, 1]);
        let rg = rg_estimate_from_data(&data).unwrap();
        let p_hat = naive_estimate(&data).unwrap().theta_hat;
        assert_eq!(rg.theta_hat, p_hat);
        for v in [
            rg.theta_hat,
            ppi_estimate(&data).unwrap().theta_hat,
            eif_binary_estimate(&data).unwrap().theta_hat,
        ] {
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn estimator_labels_round_trip() {
        for kind in EstimatorKind::ALL {
            assert_eq!(kind.label().parse::<EstimatorKind>().unwrap(), kind);
        }
    }
}
