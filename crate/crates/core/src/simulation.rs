//! Seeded Monte Carlo experiments for the binary and mixture designs.
//!
//! Replicate `b` of an experiment with seed `s` draws from the ChaCha8
//! stream `b` under a key expanded from `s`, so every replicate is
//! reproducible on its own and results do not depend on the worker count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{self, check_probability, BinaryDataset, EstimatorKind};
use crate::inference::{self, ConfidenceInterval, InferenceResult};
use crate::regression::{self, ContinuousDataset, MuFamily};

pub const SCHEMA_VERSION: u32 = 1;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for replicate `replicate` of an experiment seeded with `seed`.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut state = seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(replicate);
    rng
}

/// Draws calibration membership until both sides are nonempty, trying twice.
fn draw_membership<R: Rng + ?Sized>(
    n_total: usize,
    fraction: f64,
    rng: &mut R,
) -> Result<Vec<bool>> {
    let mut side = "test";
    for _ in 0..2 {
        let member: Vec<bool> = (0..n_total)
            .map(|_| rng.random::<f64>() < fraction)
            .collect();
        let m = member.iter().filter(|&&b| b).count();
        if m > 0 && m < n_total {
            return Ok(member);
        }
        side = if m == 0 { "calibration" } else { "test" };
    }
    Err(Error::EmptySplitSide { side })
}

fn check_fraction(fraction: f64) -> Result<()> {
    if fraction > 0.0 && fraction < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "labeled_fraction",
            value: fraction,
            reason: "must lie in (0, 1)",
        })
    }
}

/// Draws `N` points with `Y ~ Bern(θ)` and judge labels with the given
/// specificity and sensitivity; each point joins the calibration set
/// independently with probability `labeled_fraction`.
pub fn generate_binary_dataset<R: Rng + ?Sized>(
    theta: f64,
    q0: f64,
    q1: f64,
    n_total: usize,
    labeled_fraction: f64,
    rng: &mut R,
) -> Result<BinaryDataset> {
    check_probability("theta", theta)?;
    check_probability("q0", q0)?;
    check_probability("q1", q1)?;
    check_fraction(labeled_fraction)?;
    if n_total < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            have: n_total,
        });
    }
    let labels: Vec<(u8, u8)> = (0..n_total)
        .map(|_| {
            let y = rng.random::<f64>() < theta;
            let correct = rng.random::<f64>() < if y { q1 } else { q0 };
            let y_hat = if correct { y } else { !y };
            (y as u8, y_hat as u8)
        })
        .collect();
    let member = draw_membership(n_total, labeled_fraction, rng)?;
    let mut calibration = Vec::new();
    let mut test = Vec::new();
    for (pair, cal) in labels.into_iter().zip(member) {
        if cal {
            calibration.push(pair);
        } else {
            test.push(pair.1);
        }
    }
    BinaryDataset::new(calibration, test)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySimConfig {
    pub theta: f64,
    pub q0: f64,
    pub q1: f64,
    pub n_total: usize,
    pub labeled_fraction: f64,
    pub replicates: usize,
    pub level: f64,
    pub seed: u64,
    pub estimators: Vec<EstimatorKind>,
}

impl BinarySimConfig {
    pub fn validate(&self) -> Result<()> {
        check_probability("theta", self.theta)?;
        check_probability("q0", self.q0)?;
        check_probability("q1", self.q1)?;
        check_fraction(self.labeled_fraction)?;
        check_level(self.level)?;
        check_sizes(self.n_total, self.replicates)
    }

    pub fn label(&self) -> String {
        format!(
            "theta={} q0={} q1={} N={} budget={}",
            self.theta, self.q0, self.q1, self.n_total, self.labeled_fraction
        )
    }
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "level",
            value: level,
            reason: "must lie in (0, 1)",
        })
    }
}

fn check_sizes(n_total: usize, replicates: usize) -> Result<()> {
    if n_total < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            have: n_total,
        });
    }
    if replicates == 0 {
        return Err(Error::InvalidParameter {
            name: "replicates",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    Ok(())
}

/// Full factorial grid: θ ∈ {0.1, …, 0.9}, q0 = q1 ∈ {0.6, 0.7, 0.8},
/// budget ∈ {1%, 5%, 10%}, N = 2000.
pub fn default_binary_grid(replicates: usize, level: f64, seed: u64) -> Vec<BinarySimConfig> {
    let mut grid = Vec::new();
    for t in 1..=9 {
        for q in [0.6, 0.7, 0.8] {
            for budget in [0.01, 0.05, 0.1] {
                grid.push(BinarySimConfig {
                    theta: t as f64 / 10.0,
                    q0: q,
                    q1: q,
                    n_total: 2000,
                    labeled_fraction: budget,
                    replicates,
                    level,
                    seed,
                    estimators: EstimatorKind::ALL.to_vec(),
                });
            }
        }
    }
    grid
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ContinuousEstimator {
    Naive,
    Ppi,
    PpiPlus,
    Eif(MuFamily),
}

impl ContinuousEstimator {
    pub fn label(self) -> String {
        match self {
            ContinuousEstimator::Naive => "naive".into(),
            ContinuousEstimator::Ppi => "ppi".into(),
            ContinuousEstimator::PpiPlus => "ppi++".into(),
            ContinuousEstimator::Eif(f) => format!("eif-{f}"),
        }
    }

    pub fn infer(self, data: &ContinuousDataset, level: f64) -> Result<InferenceResult> {
        match self {
            ContinuousEstimator::Naive => regression::naive_continuous(data, level),
            ContinuousEstimator::Ppi => regression::ppi_continuous(data, level),
            ContinuousEstimator::PpiPlus => regression::ppiplus_continuous(data, level),
            ContinuousEstimator::Eif(family) => {
                let mu = regression::fit_mu(data, family)?;
                regression::eif_continuous_estimate(data, &mu, level)
            }
        }
    }

    /// Baselines followed by the one-step estimator under each family.
    pub fn standard_set(families: &[MuFamily]) -> Vec<Self> {
        let mut set = vec![
            ContinuousEstimator::Naive,
            ContinuousEstimator::Ppi,
            ContinuousEstimator::PpiPlus,
        ];
        set.extend(families.iter().map(|&f| ContinuousEstimator::Eif(f)));
        set
    }
}

impl std::str::FromStr for ContinuousEstimator {
    type Err = String;

    /// Accepts `naive`, `ppi`, `ppi++` and `eif-<family>`.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "naive" => Ok(ContinuousEstimator::Naive),
            "ppi" => Ok(ContinuousEstimator::Ppi),
            "ppi++" | "ppiplus" => Ok(ContinuousEstimator::PpiPlus),
            other => match other.strip_prefix("eif-") {
                Some(family) => family.parse().map(ContinuousEstimator::Eif),
                None => Err(format!("unknown continuous estimator `{other}`")),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousSimConfig {
    pub mu: [f64; 3],
    pub sigma: f64,
    pub n_total: usize,
    pub labeled_fraction: f64,
    pub replicates: usize,
    pub level: f64,
    pub seed: u64,
    pub estimators: Vec<ContinuousEstimator>,
}

impl ContinuousSimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "sigma",
                value: self.sigma,
                reason: "must be finite and nonnegative",
            });
        }
        check_fraction(self.labeled_fraction)?;
        check_level(self.level)?;
        check_sizes(self.n_total, self.replicates)
    }

    /// `E[Y] = (μ1 + μ2 + μ3) / 3`.
    pub fn truth(&self) -> f64 {
        self.mu.iter().sum::<f64>() / 3.0
    }

    pub fn label(&self) -> String {
        format!(
            "mu=({},{},{}) sigma={} N={} budget={}",
            self.mu[0], self.mu[1], self.mu[2], self.sigma, self.n_total, self.labeled_fraction
        )
    }
}

/// `Z ~ Unif{1,2,3}`, `Y | Z ~ N(μ_Z, σ²)`, `Ŷ = Z`, with Bernoulli
/// calibration membership.
pub fn generate_mixture_dataset<R: Rng + ?Sized>(
    config: &ContinuousSimConfig,
    rng: &mut R,
) -> Result<ContinuousDataset> {
    config.validate()?;
    let points: Vec<(f64, f64)> = (0..config.n_total)
        .map(|_| {
            let z = rng.random_range(0..3usize);
            let noise: f64 = StandardNormal.sample(rng);
            (config.mu[z] + config.sigma * noise, (z + 1) as f64)
        })
        .collect();
    let member = draw_membership(config.n_total, config.labeled_fraction, rng)?;
    let mut calibration = Vec::new();
    let mut test = Vec::new();
    for (pair, cal) in points.into_iter().zip(member) {
        if cal {
            calibration.push(pair);
        } else {
            test.push(pair.1);
        }
    }
    ContinuousDataset::new(calibration, test)
}

/// Serializes non-finite metrics as `null`.
mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

/// Metrics for one estimator under one configuration. Metrics cover
/// successful replicates only; `failures` counts the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub experiment: String,
    pub config: String,
    pub estimator: String,
    pub truth: f64,
    pub replicates: usize,
    pub failures: usize,
    #[serde(with = "nan_as_null")]
    pub bias: f64,
    #[serde(with = "nan_as_null")]
    pub bias_se: f64,
    #[serde(with = "nan_as_null")]
    pub coverage: f64,
    #[serde(with = "nan_as_null")]
    pub coverage_se: f64,
    #[serde(with = "nan_as_null")]
    pub mean_width: f64,
    #[serde(with = "nan_as_null")]
    pub mean_width_se: f64,
    #[serde(with = "nan_as_null")]
    pub rmse: f64,
    #[serde(with = "nan_as_null")]
    pub rmse_se: f64,
}

impl ReportRow {
    pub const COLUMNS: [&'static str; 14] = [
        "experiment",
        "config",
        "estimator",
        "truth",
        "replicates",
        "failures",
        "bias",
        "bias_se",
        "coverage",
        "coverage_se",
        "mean_width",
        "mean_width_se",
        "rmse",
        "rmse_se",
    ];

    pub fn successes(&self) -> usize {
        self.replicates - self.failures
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub schema_version: u32,
    pub seed: Option<u64>,
    pub rows: Vec<ReportRow>,
}

impl MonteCarloReport {
    pub fn new(seed: Option<u64>, rows: Vec<ReportRow>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed,
            rows,
        }
    }

    pub fn find(&self, config: &str, estimator: &str) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.config == config && r.estimator == estimator)
    }
}

/// Point estimate and interval from one successful replicate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicateOutcome {
    pub theta_hat: f64,
    pub lower: f64,
    pub upper: f64,
}

impl ReplicateOutcome {
    pub fn from_ci(theta_hat: f64, ci: &ConfidenceInterval) -> Option<Self> {
        let out = Self {
            theta_hat,
            lower: ci.lower,
            upper: ci.upper,
        };
        (theta_hat.is_finite() && ci.lower.is_finite() && ci.upper.is_finite()).then_some(out)
    }
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Aggregates replicate outcomes (in replicate order) into a report row.
pub fn summarize(
    experiment: &str,
    config: &str,
    estimator: &str,
    truth: f64,
    outcomes: &[Option<ReplicateOutcome>],
) -> ReportRow {
    let ok: Vec<ReplicateOutcome> = outcomes.iter().flatten().copied().collect();
    let mut row = ReportRow {
        experiment: experiment.into(),
        config: config.into(),
        estimator: estimator.into(),
        truth,
        replicates: outcomes.len(),
        failures: outcomes.len() - ok.len(),
        bias: f64::NAN,
        bias_se: f64::NAN,
        coverage: f64::NAN,
        coverage_se: f64::NAN,
        mean_width: f64::NAN,
        mean_width_se: f64::NAN,
        rmse: f64::NAN,
        rmse_se: f64::NAN,
    };
    if ok.is_empty() {
        return row;
    }
    let k = ok.len() as f64;
    let errors: Vec<f64> = ok.iter().map(|o| o.theta_hat - truth).collect();
    (row.bias, row.bias_se) = mean_and_se(&errors);
    let covered = ok
        .iter()
        .filter(|o| o.lower <= truth && truth <= o.upper)
        .count() as f64;
    row.coverage = covered / k;
    row.coverage_se = (row.coverage * (1.0 - row.coverage) / k).sqrt();
    let widths: Vec<f64> = ok.iter().map(|o| o.upper - o.lower).collect();
    (row.mean_width, row.mean_width_se) = mean_and_se(&widths);
    let squared: Vec<f64> = errors.iter().map(|e| e * e).collect();
    let (mse, mse_se) = mean_and_se(&squared);
    row.rmse = mse.sqrt();
    row.rmse_se = if row.rmse > 0.0 {
        mse_se / (2.0 * row.rmse)
    } else {
        0.0
    };
    row
}

fn thread_pool(parallelism: Option<usize>) -> rayon::ThreadPool {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(threads) = parallelism {
        builder = builder.num_threads(threads.max(1));
    }
    builder.build().expect("failed to start worker pool")
}

/// Runs `replicate(config_index, b)` for every replicate of every config on
/// the pool and returns the results grouped by config in replicate order.
pub(crate) fn run_replicates<T, F>(
    counts: &[usize],
    parallelism: Option<usize>,
    replicate: F,
) -> Vec<Vec<T>>
where
    T: Send,
    F: Fn(usize, usize) -> T + Sync,
{
    let jobs: Vec<(usize, usize)> = counts
        .iter()
        .enumerate()
        .flat_map(|(c, &b)| (0..b).map(move |r| (c, r)))
        .collect();
    let results: Vec<T> = thread_pool(parallelism)
        .install(|| jobs.par_iter().map(|&(c, r)| replicate(c, r)).collect());
    let mut grouped: Vec<Vec<T>> = counts.iter().map(|&b| Vec::with_capacity(b)).collect();
    for ((c, _), value) in jobs.into_iter().zip(results) {
        grouped[c].push(value);
    }
    grouped
}

fn common_seed(seeds: impl Iterator<Item = u64>) -> Option<u64> {
    let seeds: Vec<u64> = seeds.collect();
    let first = *seeds.first()?;
    seeds.iter().all(|&s| s == first).then_some(first)
}

fn binary_replicate(config: &BinarySimConfig, b: usize) -> Vec<Option<ReplicateOutcome>> {
    let mut rng = replicate_rng(config.seed, b as u64);
    let data = match generate_binary_dataset(
        config.theta,
        config.q0,
        config.q1,
        config.n_total,
        config.labeled_fraction,
        &mut rng,
    ) {
        Ok(d) => d,
        Err(_) => return vec![None; config.estimators.len()],
    };
    config
        .estimators
        .iter()
        .map(|&kind| {
            inference::infer(&data, kind, config.level)
                .ok()
                .and_then(|r| ReplicateOutcome::from_ci(r.theta_hat, &r.ci))
        })
        .collect()
}

/// Runs every binary configuration, `B` replicates each, with all requested
/// estimators applied to the same simulated dataset. Estimator failures are
/// counted per row and never abort the run.
pub fn run_grid(
    configs: &[BinarySimConfig],
    parallelism: Option<usize>,
) -> Result<MonteCarloReport> {
    if configs.is_empty() {
        return Err(Error::InsufficientData { needed: 1, have: 0 });
    }
    for c in configs {
        c.validate()?;
    }
    let counts: Vec<usize> = configs.iter().map(|c| c.replicates).collect();
    let results = run_replicates(&counts, parallelism, |c, b| {
        binary_replicate(&configs[c], b)
    });
    let mut rows = Vec::new();
    for (config, reps) in configs.iter().zip(results) {
        let label = config.label();
        for (e, kind) in config.estimators.iter().enumerate() {
            let outcomes: Vec<Option<ReplicateOutcome>> = reps.iter().map(|r| r[e]).collect();
            rows.push(summarize(
                "binary",
                &label,
                kind.label(),
                config.theta,
                &outcomes,
            ));
        }
    }
    Ok(MonteCarloReport::new(
        common_seed(configs.iter().map(|c| c.seed)),
        rows,
    ))
}

fn continuous_outcome(
    data: &ContinuousDataset,
    est: ContinuousEstimator,
    level: f64,
) -> Result<ReplicateOutcome> {
    let result = est.infer(data, level)?;
    ReplicateOutcome::from_ci(result.theta_hat, &result.ci).ok_or(Error::InvalidParameter {
        name: "estimate",
        value: result.theta_hat,
        reason: "non-finite estimate or interval",
    })
}

fn continuous_replicate(config: &ContinuousSimConfig, b: usize) -> Vec<Option<ReplicateOutcome>> {
    let mut rng = replicate_rng(config.seed, b as u64);
    match generate_mixture_dataset(config, &mut rng) {
        Ok(data) => config
            .estimators
            .iter()
            .map(|&e| continuous_outcome(&data, e, config.level).ok())
            .collect(),
        Err(_) => vec![None; config.estimators.len()],
    }
}

/// Mixture-design counterpart of [`run_grid`].
pub fn run_continuous_grid(
    configs: &[ContinuousSimConfig],
    parallelism: Option<usize>,
) -> Result<MonteCarloReport> {
    if configs.is_empty() {
        return Err(Error::InsufficientData { needed: 1, have: 0 });
    }
    for c in configs {
        c.validate()?;
    }
    let counts: Vec<usize> = configs.iter().map(|c| c.replicates).collect();
    let results = run_replicates(&counts, parallelism, |c, b| {
        continuous_replicate(&configs[c], b)
    });
    let mut rows = Vec::new();
    for (config, reps) in configs.iter().zip(results) {
        let label = config.label();
        for (e, est) in config.estimators.iter().enumerate() {
            let outcomes: Vec<Option<ReplicateOutcome>> = reps.iter().map(|r| r[e]).collect();
            rows.push(summarize(
                "mixture",
                &label,
                &est.label(),
                config.truth(),
                &outcomes,
            ));
        }
    }
    Ok(MonteCarloReport::new(
        common_seed(configs.iter().map(|c| c.seed)),
        rows,
    ))
}

/// Root mean squared error of the calibration error-rate estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRmseRow {
    pub config: String,
    pub replicates: usize,
    pub failures: usize,
    pub rmse_q0: f64,
    pub rmse_q0_se: f64,
    pub rmse_q1: f64,
    pub rmse_q1_se: f64,
    /// Mean calibration size over successful replicates.
    pub mean_m: f64,
}

fn rmse_with_se(errors: &[f64]) -> (f64, f64) {
    if errors.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let squared: Vec<f64> = errors.iter().map(|e| e * e).collect();
    let (mse, mse_se) = mean_and_se(&squared);
    let rmse = mse.sqrt();
    (
        rmse,
        if rmse > 0.0 {
            mse_se / (2.0 * rmse)
        } else {
            0.0
        },
    )
}

/// RMSE of `(q̂0, q̂1)` against the configured rates. Replicates with an
/// empty `Y` class in calibration count as failures.
pub fn calibration_rmse_study(
    configs: &[BinarySimConfig],
    parallelism: Option<usize>,
) -> Result<Vec<CalibrationRmseRow>> {
    for c in configs {
        c.validate()?;
    }
    let counts: Vec<usize> = configs.iter().map(|c| c.replicates).collect();
    let results = run_replicates(&counts, parallelism, |c, b| {
        let config = &configs[c];
        let mut rng = replicate_rng(config.seed, b as u64);
        let data = generate_binary_dataset(
            config.theta,
            config.q0,
            config.q1,
            config.n_total,
            config.labeled_fraction,
            &mut rng,
        )
        .ok()?;
        let rates = estimators::estimate_error_rates(&data.summary()).ok()?;
        Some((rates.q0 - config.q0, rates.q1 - config.q1, data.m()))
    });
    Ok(configs
        .iter()
        .zip(results)
        .map(|(config, reps)| {
            let ok: Vec<(f64, f64, usize)> = reps.iter().flatten().copied().collect();
            let e0: Vec<f64> = ok.iter().map(|r| r.0).collect();
            let e1: Vec<f64> = ok.iter().map(|r| r.1).collect();
            let (rmse_q0, rmse_q0_se) = rmse_with_se(&e0);
            let (rmse_q1, rmse_q1_se) = rmse_with_se(&e1);
            CalibrationRmseRow {
                config: config.label(),
                replicates: reps.len(),
                failures: reps.len() - ok.len(),
                rmse_q0,
                rmse_q0_se,
                rmse_q1,
                rmse_q1_se,
                mean_m: ok.iter().map(|r| r.2 as f64).sum::<f64>() / ok.len() as f64,
            }
        })
        .collect())
}
