use judgecal::estimators::{
    eif_binary_estimate, naive_estimate, ppi_estimate, ppiplus_estimate, rg_estimate_from_data,
    BinaryDataset,
};
use judgecal::inference::{
    eif_variance, logit_ci, ppi_variance, ppiplus_variance, rg_variance, PopulationParams,
    VarianceEstimate, VarianceSource,
};
use judgecal::mle::{fit_mle, MleConfig};
use judgecal::regression::{eif_continuous_estimate, fit_mu, ContinuousDataset, MuFamily};
use judgecal::simulation::ContinuousEstimator;
use proptest::prelude::*;

fn binary_dataset() -> impl Strategy<Value = BinaryDataset> {
    (
        prop::collection::vec((0u8..2, 0u8..2), 1..40),
        prop::collection::vec(0u8..2, 1..60),
    )
        .prop_map(|(cal, test)| BinaryDataset::new(cal, test).unwrap())
}

/// Calibration with every `(y, y_hat)` cell occupied.
fn full_cell_dataset() -> impl Strategy<Value = BinaryDataset> {
    (
        prop::collection::vec((0u8..2, 0u8..2), 0..40),
        prop::collection::vec(0u8..2, 1..200),
    )
        .prop_map(|(mut cal, test)| {
            cal.extend([(0, 0), (0, 1), (1, 0), (1, 1)]);
            BinaryDataset::new(cal, test).unwrap()
        })
}

fn params() -> impl Strategy<Value = PopulationParams> {
    (0.02..0.98f64, 0.51..0.995f64, 0.51..0.995f64, -1.5..2.5f64)
        .prop_map(|(t, q0, q1, lg)| PopulationParams::new(t, q0, q1, 10f64.powf(lg)).unwrap())
}

fn cal_mean(data: &BinaryDataset) -> f64 {
    let s: u32 = data.calibration().iter().map(|&(y, _)| u32::from(y)).sum();
    f64::from(s) / data.m() as f64
}

fn continuous_dataset() -> impl Strategy<Value = ContinuousDataset> {
    let pair = (0u8..3, -3.0..3.0f64).prop_map(|(l, e)| (2.0 * f64::from(l) + e, f64::from(l)));
    (
        prop::collection::vec(pair, 12..60),
        prop::collection::vec(0u8..3, 1..120),
    )
        .prop_map(|(mut cal, test)| {
            cal.extend([
                (0.5, 0.0),
                (2.5, 1.0),
                (3.5, 2.0),
                (-0.5, 0.0),
                (1.5, 1.0),
                (4.5, 2.0),
            ]);
            let test = test.into_iter().map(f64::from).collect();
            ContinuousDataset::new(cal, test).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn ppiplus_endpoints(data in binary_dataset()) {
        let ppi = ppi_estimate(&data).unwrap().theta_hat;
        prop_assert_eq!(ppiplus_estimate(&data, 1.0).unwrap().theta_hat.to_bits(), ppi.to_bits());
        prop_assert_eq!(ppiplus_estimate(&data, 0.0).unwrap().theta_hat, cal_mean(&data));
    }

    #[test]
    fn eif_is_ppiplus_at_cell_slope(data in full_cell_dataset()) {
        let s = data.summary();
        let lambda = data.n() as f64 / data.total() as f64 * (s.mu1_hat.unwrap() - s.mu0_hat.unwrap());
        let eif = eif_binary_estimate(&data).unwrap().theta_hat;
        let ppipp = ppiplus_estimate(&data, lambda).unwrap().theta_hat;
        prop_assert!((eif - ppipp).abs() <= 1e-12);
    }

    #[test]
    fn estimates_are_deterministic(data in full_cell_dataset()) {
        let a = eif_binary_estimate(&data).unwrap();
        let b = eif_binary_estimate(&data.clone()).unwrap();
        prop_assert_eq!(a.theta_hat.to_bits(), b.theta_hat.to_bits());
        let a = fit_mle(&data, &MleConfig::default()).unwrap();
        let b = fit_mle(&data, &MleConfig::default()).unwrap();
        prop_assert_eq!(a.params.theta.to_bits(), b.params.theta.to_bits());
    }

    #[test]
    fn label_swap_reflects_estimates(data in full_cell_dataset()) {
        let swapped = data.label_swapped();
        let pairs = [
            (naive_estimate(&data).unwrap(), naive_estimate(&swapped).unwrap()),
            (ppi_estimate(&data).unwrap(), ppi_estimate(&swapped).unwrap()),
            (eif_binary_estimate(&data).unwrap(), eif_binary_estimate(&swapped).unwrap()),
        ];
        for (a, b) in pairs {
            prop_assert!((a.theta_hat + b.theta_hat - 1.0).abs() <= 1e-12);
        }
        if let (Ok(a), Ok(b)) = (rg_estimate_from_data(&data), rg_estimate_from_data(&swapped)) {
            prop_assert!((a.theta_hat + b.theta_hat - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn mle_ascends_monotonically(data in full_cell_dataset()) {
        let fit = fit_mle(&data, &MleConfig::default()).unwrap();
        for w in fit.loglik_trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 4.0 * f64::EPSILON * w[0].abs());
        }
        prop_assert!(fit.loglik >= fit.loglik_trace[0]);
    }

    #[test]
    fn efficiency_ordering(p in params(), lambda in -1.0..2.0f64) {
        let v_eif = eif_variance(&p).unwrap();
        let v_ppi = ppi_variance(&p);
        let v_rg = rg_variance(&p).unwrap();
        let slack = 1e-12 * v_eif;
        prop_assert!(v_eif <= ppiplus_variance(&p, lambda) + slack);
        prop_assert!(v_eif <= v_ppi + slack);
        prop_assert!(v_ppi < v_rg);
        let star = p.lambda_star();
        prop_assert!(ppiplus_variance(&p, star + 0.1) > ppiplus_variance(&p, star));
        prop_assert!(ppiplus_variance(&p, star - 0.1) > ppiplus_variance(&p, star));
    }

    #[test]
    fn mu_difference_identity(p in params()) {
        let kappa = p.kappa();
        let lhs = p.theta * p.q1 / p.p - p.theta * (1.0 - p.q1) / (1.0 - p.p);
        let rhs = p.theta * (1.0 - p.theta) * kappa / (p.p * (1.0 - p.p));
        prop_assert!((lhs - rhs).abs() <= 1e-12);
    }

    #[test]
    fn logit_ci_shape(theta in 0.0..=1.0f64, se in 0.0..0.5f64, extra in 0.0..0.5f64, n in 2usize..5000) {
        let v = |s: f64| VarianceEstimate { v_n: s * s * n as f64, se: s, n_total: n, source: VarianceSource::ClosedFormPlugIn };
        let ci = logit_ci(theta, &v(se), 0.9);
        prop_assert!(0.0 <= ci.lower && ci.lower <= ci.upper && ci.upper <= 1.0);
        let wider = logit_ci(theta, &v(se + extra), 0.9);
        prop_assert!(wider.width() >= ci.width() - 1e-15);
        let mirror = logit_ci(1.0 - theta, &v(se), 0.9);
        prop_assert!((mirror.lower - (1.0 - ci.upper)).abs() <= 1e-12);
        prop_assert!((mirror.upper - (1.0 - ci.lower)).abs() <= 1e-12);
    }

    #[test]
    fn continuous_shift_and_scale(data in continuous_dataset(), a in -5.0..5.0f64, b in 0.2..4.0f64) {
        let moved = data.scale_outcomes(b).shift_outcomes(a);
        let estimators = [
            ContinuousEstimator::PpiPlus,
            ContinuousEstimator::Eif(MuFamily::Categorical),
            ContinuousEstimator::Eif(MuFamily::Linear),
            ContinuousEstimator::Eif(MuFamily::Spline),
        ];
        for est in estimators {
            let base = est.infer(&data, 0.9).unwrap();
            let other = est.infer(&moved, 0.9).unwrap();
            let scale = 1.0 + base.theta_hat.abs() * b + a.abs();
            prop_assert!((other.theta_hat - (a + b * base.theta_hat)).abs() <= 1e-9 * scale, "{}", base.estimator);
            prop_assert!((other.variance.se - b * base.variance.se).abs() <= 1e-7 * (1.0 + b * base.variance.se), "{}", base.estimator);
        }
        // Raw-surrogate PPI moves with a shift of y only.
        let base = ContinuousEstimator::Ppi.infer(&data, 0.9).unwrap();
        let shifted = ContinuousEstimator::Ppi.infer(&data.shift_outcomes(a), 0.9).unwrap();
        prop_assert!((shifted.theta_hat - base.theta_hat - a).abs() <= 1e-12 * (1.0 + a.abs() + base.theta_hat.abs()) * 10.0);
        prop_assert!((shifted.variance.se - base.variance.se).abs() <= 1e-9 * (1.0 + base.variance.se));
    }

    #[test]
    fn binary_data_through_continuous_path(data in full_cell_dataset()) {
        let cal = data.calibration().iter().map(|&(y, yh)| (f64::from(y), f64::from(yh))).collect();
        let test = data.test().iter().map(|&v| f64::from(v)).collect();
        let cont = ContinuousDataset::new(cal, test).unwrap();
        let mu = fit_mu(&cont, MuFamily::Categorical).unwrap();
        let via_regression = eif_continuous_estimate(&cont, &mu, 0.9).unwrap().theta_hat;
        let binary = eif_binary_estimate(&data).unwrap().theta_hat;
        prop_assert_eq!(via_regression.to_bits(), binary.to_bits());
    }
}
