use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use judgecal::data_io::{self, Domain, LabeledRecord, RecordFormat, ReportFormat, SplitSpec};
use judgecal::estimators::EstimatorKind;
use judgecal::identities::{identity_check, IdentityCheckConfig, IdentityReport};
use judgecal::inference::{self, InferenceResult, PopulationParams};
use judgecal::regression::MuFamily;
use judgecal::simulation::{
    self, BinarySimConfig, ContinuousEstimator, ContinuousSimConfig, MonteCarloReport,
};

#[derive(Parser)]
#[command(
    name = "judgecal",
    version,
    about = "Debiased win-rate estimation from noisy judge labels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the mean of y from a record file.
    Estimate(EstimateArgs),
    /// Run a seeded Monte Carlo grid.
    Simulate(SimulateArgs),
    /// Tabulate asymptotic variances at population parameters.
    Compare(CompareArgs),
    /// Score intervals over random calibration/test resplits of labeled data.
    SplitCoverage(SplitCoverageArgs),
    /// Sweep random parameters and verify the variance identities.
    IdentityCheck(IdentityArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.9)]
    level: f64,
    /// Worker threads for replicates; defaults to available cores.
    #[arg(long)]
    parallelism: Option<usize>,
    /// Emit JSON instead of CSV or text.
    #[arg(long)]
    json: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DomainArg {
    Binary,
    Continuous,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Dgp {
    Binary,
    Mixture,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    input: PathBuf,
    /// Record format, `csv` or `jsonl`; guessed from the extension otherwise.
    #[arg(long)]
    format: Option<String>,
    #[arg(long, value_enum, default_value_t = DomainArg::Binary)]
    domain: DomainArg,
    /// Comma-separated estimator names.
    #[arg(long, value_delimiter = ',')]
    estimators: Vec<String>,
    /// Regression families for the continuous one-step estimator.
    #[arg(long, value_delimiter = ',')]
    mu_family: Vec<MuFamily>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value_t = Dgp::Binary)]
    dgp: Dgp,
    /// Replicates per configuration.
    #[arg(long = "B", default_value_t = 1000)]
    replicates: usize,
    #[arg(long, visible_alias = "grid-theta", value_delimiter = ',')]
    theta: Vec<f64>,
    /// Sets both judge accuracies.
    #[arg(long, visible_alias = "grid-q", value_delimiter = ',')]
    q: Vec<f64>,
    #[arg(long, visible_alias = "grid-budget", value_delimiter = ',')]
    budget: Vec<f64>,
    #[arg(long, default_value_t = 2000)]
    n_total: usize,
    /// Mean of the third mixture component.
    #[arg(long, visible_alias = "grid-mu3", value_delimiter = ',')]
    mu3: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, value_delimiter = ',')]
    estimators: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    mu_family: Vec<MuFamily>,
    /// Report format, `csv` or `json`.
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
    #[arg(
        long,
        visible_alias = "grid-theta",
        value_delimiter = ',',
        default_value = "0.5"
    )]
    theta: Vec<f64>,
    #[arg(
        long,
        visible_alias = "grid-q",
        value_delimiter = ',',
        default_value = "0.8"
    )]
    q: Vec<f64>,
    /// Labeled fraction; the test/calibration ratio is `(1 - b) / b`.
    #[arg(
        long,
        visible_alias = "grid-budget",
        value_delimiter = ',',
        default_value = "0.1"
    )]
    budget: Vec<f64>,
    #[arg(long, default_value_t = 2000)]
    n_total: usize,
}

#[derive(Args)]
struct SplitCoverageArgs {
    #[command(flatten)]
    common: Common,
    /// Fully labeled records; omit to use a synthetic corpus.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Report format, `csv` or `json`.
    #[arg(long)]
    format: Option<String>,
    #[arg(long = "B", default_value_t = 1000)]
    replicates: usize,
    /// Calibration fraction of each resplit.
    #[arg(long, default_value_t = 0.1)]
    budget: f64,
    #[arg(long)]
    stratify: bool,
    #[arg(long, value_delimiter = ',')]
    estimators: Vec<String>,
    /// Synthetic corpus parameters.
    #[arg(long, default_value_t = 0.523)]
    theta: f64,
    #[arg(long, default_value_t = 0.74)]
    q0: f64,
    #[arg(long, default_value_t = 0.69)]
    q1: f64,
    #[arg(long, default_value_t = 493)]
    n_total: usize,
}

#[derive(Args)]
struct IdentityArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 10_000)]
    points: usize,
    #[arg(long, default_value_t = 1e-10)]
    tolerance: f64,
    /// Every k-th point uses a perfect judge; 0 disables.
    #[arg(long, default_value_t = 100)]
    perfect_every: usize,
    #[arg(long)]
    perfect_only: bool,
    /// Added to the efficient variance before comparison.
    #[arg(long, default_value_t = 0.0)]
    perturb_eif: f64,
}

enum CliError {
    Core(judgecal::Error),
    Usage(String),
    Identity(usize),
}

impl From<judgecal::Error> for CliError {
    fn from(e: judgecal::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::Usage(_) => "InvalidArguments",
            CliError::Identity(_) => "IdentityViolation",
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Core(e) => e.to_string(),
            CliError::Usage(m) => m.clone(),
            CliError::Identity(k) => format!("{k} identity violations"),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn stdout_error(e: io::Error) -> CliError {
    CliError::Core(judgecal::Error::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    })
}

fn file_error(path: &Path, e: io::Error) -> CliError {
    CliError::Core(judgecal::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Writes through `f` to `--output` or stdout.
fn emit(output: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> CliResult<()> {
    match output {
        Some(path) => {
            let file = File::create(path).map_err(|e| file_error(path, e))?;
            let mut w = BufWriter::new(file);
            f(&mut w)
                .and_then(|_| w.flush())
                .map_err(|e| file_error(path, e))
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            f(&mut w).and_then(|_| w.flush()).map_err(stdout_error)
        }
    }
}

fn check_level(level: f64) -> CliResult<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "--level must lie in (0, 1), got {level}"
        )))
    }
}

fn parse_list<T: std::str::FromStr<Err = String>>(names: &[String]) -> CliResult<Vec<T>> {
    names
        .iter()
        .map(|n| n.parse().map_err(CliError::Usage))
        .collect()
}

fn binary_estimators(names: &[String]) -> CliResult<Vec<EstimatorKind>> {
    if names.is_empty() {
        return Ok(EstimatorKind::ALL.to_vec());
    }
    parse_list(names)
}

fn continuous_estimators(
    names: &[String],
    families: &[MuFamily],
) -> CliResult<Vec<ContinuousEstimator>> {
    if names.is_empty() {
        let families = if families.is_empty() {
            &MuFamily::ALL[..]
        } else {
            families
        };
        return Ok(ContinuousEstimator::standard_set(families));
    }
    parse_list(names)
}

fn report_format(format: Option<&str>, json: bool) -> CliResult<ReportFormat> {
    match format {
        Some(f) => f.parse().map_err(CliError::Usage),
        None if json => Ok(ReportFormat::Json),
        None => Ok(ReportFormat::Csv),
    }
}

fn group_label(pair: &str, judge: &str) -> String {
    match (pair.is_empty(), judge.is_empty()) {
        (true, true) => "all".into(),
        (false, true) => pair.into(),
        (true, false) => judge.into(),
        (false, false) => format!("{pair}/{judge}"),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.6}"))
}

fn flags(r: &InferenceResult) -> String {
    let d = &r.diagnostics;
    let mut out = Vec::new();
    if d.clamped {
        out.push("clamped".to_string());
    }
    if d.converged == Some(false) {
        out.push("not-converged".to_string());
    }
    out.extend(d.warnings.iter().cloned());
    if out.is_empty() {
        "-".into()
    } else {
        out.join("; ")
    }
}

struct GroupResults {
    label: String,
    m: usize,
    n: usize,
    results: Vec<InferenceResult>,
}

fn estimate(args: EstimateArgs) -> CliResult<()> {
    let level = args.common.level;
    check_level(level)?;
    let format = match &args.format {
        Some(f) => f.parse().map_err(CliError::Usage)?,
        None => RecordFormat::from_path(&args.input),
    };
    let domain = match args.domain {
        DomainArg::Binary => Domain::Binary,
        DomainArg::Continuous => Domain::Continuous,
    };
    let records = data_io::read_records(&args.input, format, domain)?;
    let mut groups = Vec::new();
    for ((pair, judge), rows) in data_io::group_records(&records) {
        let label = group_label(&pair, &judge);
        let group = match domain {
            Domain::Binary => {
                let data = data_io::binary_dataset_from_records(&rows)?;
                let results = binary_estimators(&args.estimators)?
                    .into_iter()
                    .map(|k| inference::infer(&data, k, level))
                    .collect::<judgecal::Result<Vec<_>>>()?;
                GroupResults {
                    label,
                    m: data.m(),
                    n: data.n(),
                    results,
                }
            }
            Domain::Continuous => {
                let data = data_io::continuous_dataset_from_records(&rows)?;
                let results = continuous_estimators(&args.estimators, &args.mu_family)?
                    .into_iter()
                    .map(|e| e.infer(&data, level))
                    .collect::<judgecal::Result<Vec<_>>>()?;
                GroupResults {
                    label,
                    m: data.m(),
                    n: data.n(),
                    results,
                }
            }
        };
        groups.push(group);
    }
    let seed = args.common.seed;
    emit(args.common.output.as_deref(), |w| {
        if args.common.json {
            let groups: Vec<_> = groups
                .iter()
                .map(|g| json!({"group": g.label, "m": g.m, "n": g.n, "results": g.results}))
                .collect();
            let doc = json!({"seed": seed, "level": level, "groups": groups});
            serde_json::to_writer_pretty(&mut *w, &doc)?;
            return writeln!(w);
        }
        writeln!(w, "# seed={seed} level={level}")?;
        writeln!(
            w,
            "{:<16} {:<16} {:>5} {:>6} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}  flags",
            "group",
            "estimator",
            "m",
            "n",
            "theta_hat",
            "se",
            "lower",
            "upper",
            "lambda",
            "q0_hat",
            "q1_hat"
        )?;
        for g in &groups {
            for r in &g.results {
                let d = &r.diagnostics;
                writeln!(
                    w,
                    "{:<16} {:<16} {:>5} {:>6} {:>10.6} {:>10.6} {:>10.6} {:>10.6} {:>10} {:>10} {:>10}  {}",
                    g.label,
                    r.estimator,
                    g.m,
                    g.n,
                    r.theta_hat,
                    r.variance.se,
                    r.ci.lower,
                    r.ci.upper,
                    fmt_opt(d.lambda),
                    fmt_opt(d.q0_hat),
                    fmt_opt(d.q1_hat),
                    flags(r)
                )?;
            }
        }
        Ok(())
    })
}

fn write_report(report: &MonteCarloReport, common: &Common, format: Option<&str>) -> CliResult<()> {
    let format = report_format(format, common.json)?;
    emit(common.output.as_deref(), |mut w| {
        data_io::write_report_to(report, &mut w, format)
    })
}

fn simulate(args: SimulateArgs) -> CliResult<()> {
    let c = &args.common;
    check_level(c.level)?;
    let report = match args.dgp {
        Dgp::Binary => {
            let estimators = binary_estimators(&args.estimators)?;
            let overridden =
                !(args.theta.is_empty() && args.q.is_empty() && args.budget.is_empty());
            let mut configs = simulation::default_binary_grid(args.replicates, c.level, c.seed);
            if overridden {
                let pick = |given: &[f64], default: &[f64]| {
                    if given.is_empty() {
                        default.to_vec()
                    } else {
                        given.to_vec()
                    }
                };
                let thetas = pick(&args.theta, &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]);
                let qs = pick(&args.q, &[0.6, 0.7, 0.8]);
                let budgets = pick(&args.budget, &[0.01, 0.05, 0.1]);
                configs.clear();
                for &theta in &thetas {
                    for &q in &qs {
                        for &budget in &budgets {
                            configs.push(BinarySimConfig {
                                theta,
                                q0: q,
                                q1: q,
                                n_total: args.n_total,
                                labeled_fraction: budget,
                                replicates: args.replicates,
                                level: c.level,
                                seed: c.seed,
                                estimators: estimators.clone(),
                            });
                        }
                    }
                }
            } else {
                for cfg in &mut configs {
                    cfg.n_total = args.n_total;
                    cfg.estimators = estimators.clone();
                }
            }
            simulation::run_grid(&configs, c.parallelism)?
        }
        Dgp::Mixture => {
            let estimators = continuous_estimators(&args.estimators, &args.mu_family)?;
            let mu3s = if args.mu3.is_empty() {
                vec![9.0]
            } else {
                args.mu3.clone()
            };
            let budgets = if args.budget.is_empty() {
                vec![0.1]
            } else {
                args.budget.clone()
            };
            let mut configs = Vec::new();
            for &mu3 in &mu3s {
                for &budget in &budgets {
                    configs.push(ContinuousSimConfig {
                        mu: [1.0, 2.0, mu3],
                        sigma: args.sigma,
                        n_total: args.n_total,
                        labeled_fraction: budget,
                        replicates: args.replicates,
                        level: c.level,
                        seed: c.seed,
                        estimators: estimators.clone(),
                    });
                }
            }
            simulation::run_continuous_grid(&configs, c.parallelism)?
        }
    };
    write_report(&report, c, args.format.as_deref())
}

fn compare(args: CompareArgs) -> CliResult<()> {
    let c = &args.common;
    let mut rows = Vec::new();
    for &theta in &args.theta {
        for &q in &args.q {
            for &budget in &args.budget {
                if !(budget > 0.0 && budget < 1.0) {
                    return Err(CliError::Usage(format!(
                        "--budget must lie in (0, 1), got {budget}"
                    )));
                }
                let gamma1 = (1.0 - budget) / budget;
                let params = PopulationParams::new(theta, q, q, gamma1)?;
                let v_eif = inference::eif_variance(&params)?;
                let variances = [
                    ("rg", inference::rg_variance(&params).ok()),
                    ("ppi", Some(inference::ppi_variance(&params))),
                    (
                        "ppi++(lambda*)",
                        Some(inference::ppiplus_variance(&params, params.lambda_star())),
                    ),
                    ("mle", inference::mle_variance(&params).ok()),
                    ("eif", Some(v_eif)),
                ];
                for (name, v) in variances {
                    rows.push((theta, q, budget, name, v, v.map(|v| v / v_eif)));
                }
            }
        }
    }
    let n = args.n_total as f64;
    emit(c.output.as_deref(), |w| {
        if c.json {
            let rows: Vec<_> = rows
                .iter()
                .map(|(theta, q, budget, name, v, ratio)| {
                    json!({
                        "theta": theta, "q": q, "budget": budget, "estimator": name,
                        "variance": v, "se": v.map(|v| (v / n).sqrt()), "ratio_to_eif": ratio,
                    })
                })
                .collect();
            serde_json::to_writer_pretty(
                &mut *w,
                &json!({"seed": c.seed, "n_total": args.n_total, "rows": rows}),
            )?;
            return writeln!(w);
        }
        writeln!(w, "# seed={} N={}", c.seed, args.n_total)?;
        writeln!(w, "theta,q,budget,estimator,variance,se,ratio_to_eif")?;
        for (theta, q, budget, name, v, ratio) in &rows {
            let cell = |x: Option<f64>| x.map_or_else(String::new, |x| format!("{x:.10}"));
            writeln!(
                w,
                "{theta},{q},{budget},{name},{},{},{}",
                cell(*v),
                cell(v.map(|v| (v / n).sqrt())),
                cell(*ratio)
            )?;
        }
        Ok(())
    })
}

fn split_coverage(args: SplitCoverageArgs) -> CliResult<()> {
    let c = &args.common;
    check_level(c.level)?;
    let estimators = binary_estimators(&args.estimators)?;
    let mut spec = SplitSpec::new(args.budget, c.seed)?;
    spec.stratify = args.stratify;
    let groups: Vec<(String, Vec<LabeledRecord>)> = match &args.input {
        Some(path) => {
            let records =
                data_io::read_records(path, RecordFormat::from_path(path), Domain::Binary)?;
            data_io::group_records(&records)
                .into_iter()
                .map(|((pair, judge), rows)| (group_label(&pair, &judge), rows))
                .collect()
        }
        None => {
            let corpus = data_io::synthetic_matched_corpus(
                args.theta,
                args.q0,
                args.q1,
                args.n_total,
                c.seed,
            );
            vec![("synthetic".into(), corpus)]
        }
    };
    let mut rows = Vec::new();
    for (label, records) in groups {
        let report = data_io::split_coverage_experiment(
            &records,
            &spec,
            args.replicates,
            &estimators,
            c.level,
            c.parallelism,
        )?;
        for mut row in report.rows {
            row.config = format!("group={label} {}", row.config);
            rows.push(row);
        }
    }
    let report = MonteCarloReport::new(Some(c.seed), rows);
    write_report(&report, c, args.format.as_deref())
}

fn identity(args: IdentityArgs) -> CliResult<()> {
    let c = &args.common;
    let config = IdentityCheckConfig {
        points: args.points,
        seed: c.seed,
        tolerance: args.tolerance,
        perfect_every: args.perfect_every,
        perfect_only: args.perfect_only,
        eif_perturbation: args.perturb_eif,
    };
    let report = identity_check(&config)?;
    emit(c.output.as_deref(), |w| {
        if c.json {
            let doc = json!({"seed": c.seed, "passed": report.passed(), "report": report});
            serde_json::to_writer_pretty(&mut *w, &doc)?;
            return writeln!(w);
        }
        writeln!(
            w,
            "# seed={} points={} tolerance={:e}",
            c.seed, report.points, args.tolerance
        )?;
        for (slot, name) in IdentityReport::CHECKS.iter().enumerate() {
            let failed = report
                .violations
                .iter()
                .filter(|v| v.check == *name)
                .count();
            let status = if failed == 0 { "PASS" } else { "FAIL" };
            writeln!(
                w,
                "{status} {name:<22} max_gap={:.3e} violations={failed}",
                report.max_relative_gap[slot]
            )?;
        }
        writeln!(
            w,
            "perfect-judge points={} exact ppi=rg equalities={}",
            report.perfect_points, report.exact_ppi_rg_equalities
        )
    })?;
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Identity(report.violations.len()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Estimate(a) => estimate(a),
        Command::Simulate(a) => simulate(a),
        Command::Compare(a) => compare(a),
        Command::SplitCoverage(a) => split_coverage(a),
        Command::IdentityCheck(a) => identity(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {}", e.code(), e.message());
            ExitCode::FAILURE
        }
    }
}
