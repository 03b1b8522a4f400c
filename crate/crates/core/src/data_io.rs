//! Record files, calibration/test splits and report serialization.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{BinaryDataset, EstimatorKind};
use crate::inference;
use crate::regression::ContinuousDataset;
use crate::simulation::{self, replicate_rng, MonteCarloReport, ReplicateOutcome, ReportRow};

pub const RECORD_COLUMNS: [&str; 5] = ["id", "y", "y_hat", "judge", "pair"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordFormat {
    Csv,
    Jsonl,
}

impl RecordFormat {
    /// Guesses the format from a file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext)
                if ext.eq_ignore_ascii_case("jsonl") || ext.eq_ignore_ascii_case("ndjson") =>
            {
                RecordFormat::Jsonl
            }
            _ => RecordFormat::Csv,
        }
    }
}

impl FromStr for RecordFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(RecordFormat::Csv),
            "jsonl" | "ndjson" => Ok(RecordFormat::Jsonl),
            other => Err(format!("unknown record format `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown report format `{other}`")),
        }
    }
}

/// Value domain that `y` and `y_hat` are validated against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Binary,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRecord {
    pub id: String,
    pub y: Option<f64>,
    pub y_hat: f64,
    pub judge: Option<String>,
    pub pair: Option<String>,
}

impl LabeledRecord {
    pub fn is_labeled(&self) -> bool {
        self.y.is_some()
    }
}

fn check_domain(line: u64, field: &str, value: f64, domain: Domain) -> Result<()> {
    let ok = match domain {
        Domain::Binary => value == 0.0 || value == 1.0,
        Domain::Continuous => value.is_finite(),
    };
    if ok {
        Ok(())
    } else {
        let expected = match domain {
            Domain::Binary => "0 or 1",
            Domain::Continuous => "a finite number",
        };
        Err(Error::DomainError {
            line,
            reason: format!("{field} = {value} (expected {expected})"),
        })
    }
}

fn validate(record: &LabeledRecord, line: u64, domain: Domain) -> Result<()> {
    if let Some(y) = record.y {
        check_domain(line, "y", y, domain)?;
    }
    check_domain(line, "y_hat", record.y_hat, domain)
}

fn parse_number(line: u64, field: &str, raw: &str) -> Result<f64> {
    raw.trim().parse::<f64>().map_err(|_| Error::MalformedRow {
        line,
        reason: format!("{field} `{raw}` is not a number"),
    })
}

fn optional_tag(raw: &str) -> Option<String> {
    (!raw.is_empty()).then(|| raw.to_string())
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    match err.into_kind() {
        csv::ErrorKind::Io(e) => Error::io(path, e),
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => Error::MalformedRow {
            line,
            reason: format!("expected {expected_len} fields, found {len}"),
        },
        other => Error::MalformedRow {
            line,
            reason: format!("{other:?}"),
        },
    }
}

fn read_csv_records(path: &Path, domain: Domain) -> Result<Vec<LabeledRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .quoting(false)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.iter().ne(RECORD_COLUMNS) {
        return Err(Error::Format {
            path: path.to_path_buf(),
            reason: format!(
                "header must be `{}`, found `{}`",
                RECORD_COLUMNS.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let y = match &row[1] {
            "" => None,
            raw => Some(parse_number(line, "y", raw)?),
        };
        if row[2].is_empty() {
            return Err(Error::MalformedRow {
                line,
                reason: "y_hat is missing".into(),
            });
        }
        let record = LabeledRecord {
            id: row[0].to_string(),
            y,
            y_hat: parse_number(line, "y_hat", &row[2])?,
            judge: optional_tag(&row[3]),
            pair: optional_tag(&row[4]),
        };
        validate(&record, line, domain)?;
        records.push(record);
    }
    Ok(records)
}

/// JSONL rows may give `id` as a string or a number.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonRecord {
    id: serde_json::Value,
    #[serde(default)]
    y: Option<f64>,
    y_hat: f64,
    #[serde(default)]
    judge: Option<String>,
    #[serde(default)]
    pair: Option<String>,
}

fn read_jsonl_records(path: &Path, domain: Domain) -> Result<Vec<LabeledRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (index, line) in BufReader::new(file).lines().enumerate() {
        let line_no = index as u64 + 1;
        let text = line.map_err(|e| Error::io(path, e))?;
        if text.trim().is_empty() {
            continue;
        }
        let raw: JsonRecord = serde_json::from_str(&text).map_err(|e| Error::MalformedRow {
            line: line_no,
            reason: e.to_string(),
        })?;
        let id = match raw.id {
            serde_json::Value::String(s) => s,
            serde_json::Value::Number(n) => n.to_string(),
            other => {
                return Err(Error::MalformedRow {
                    line: line_no,
                    reason: format!("id must be a string or number, found {other}"),
                })
            }
        };
        let record = LabeledRecord {
            id,
            y: raw.y,
            y_hat: raw.y_hat,
            judge: raw.judge,
            pair: raw.pair,
        };
        validate(&record, line_no, domain)?;
        records.push(record);
    }
    Ok(records)
}

/// Reads records, validating `y` and `y_hat` against `domain`. Errors carry
/// the 1-based line number of the offending row.
pub fn read_records(
    path: impl AsRef<Path>,
    format: RecordFormat,
    domain: Domain,
) -> Result<Vec<LabeledRecord>> {
    let path = path.as_ref();
    match format {
        RecordFormat::Csv => read_csv_records(path, domain),
        RecordFormat::Jsonl => read_jsonl_records(path, domain),
    }
}

pub fn write_records(
    path: impl AsRef<Path>,
    records: &[LabeledRecord],
    format: RecordFormat,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    match format {
        RecordFormat::Csv => {
            writeln!(out, "{}", RECORD_COLUMNS.join(",")).map_err(io)?;
            for r in records {
                for (field, value) in [
                    ("id", &r.id),
                    ("judge", r.judge.as_ref().unwrap_or(&String::new())),
                    ("pair", r.pair.as_ref().unwrap_or(&String::new())),
                ] {
                    if value.contains([',', '\n', '\r', '"']) || value.starts_with('#') {
                        return Err(Error::Format {
                            path: path.to_path_buf(),
                            reason: format!("{field} `{value}` cannot be written without quoting"),
                        });
                    }
                }
                let y = r.y.map(|v| v.to_string()).unwrap_or_default();
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    r.id,
                    y,
                    r.y_hat,
                    r.judge.as_deref().unwrap_or(""),
                    r.pair.as_deref().unwrap_or("")
                )
                .map_err(io)?;
            }
        }
        RecordFormat::Jsonl => {
            for r in records {
                serde_json::to_writer(&mut out, r).map_err(|e| Error::Format {
                    path: path.to_path_buf(),
                    reason: e.to_string(),
                })?;
                writeln!(out).map_err(io)?;
            }
        }
    }
    out.flush().map_err(io)
}

/// Groups records by `(pair, judge)` tag, preserving file order within each
/// group.
pub fn group_records(records: &[LabeledRecord]) -> BTreeMap<(String, String), Vec<LabeledRecord>> {
    let mut groups: BTreeMap<(String, String), Vec<LabeledRecord>> = BTreeMap::new();
    for r in records {
        let key = (
            r.pair.clone().unwrap_or_default(),
            r.judge.clone().unwrap_or_default(),
        );
        groups.entry(key).or_default().push(r.clone());
    }
    groups
}

fn binary_value(v: f64) -> u8 {
    u8::from(v == 1.0)
}

/// Labeled records form the calibration set and unlabeled ones the test set.
pub fn binary_dataset_from_records(records: &[LabeledRecord]) -> Result<BinaryDataset> {
    let mut calibration = Vec::new();
    let mut test = Vec::new();
    for (index, r) in records.iter().enumerate() {
        for v in r.y.iter().chain([&r.y_hat]) {
            if *v != 0.0 && *v != 1.0 {
                return Err(Error::InvalidLabel { index, value: *v });
            }
        }
        match r.y {
            Some(y) => calibration.push((binary_value(y), binary_value(r.y_hat))),
            None => test.push(binary_value(r.y_hat)),
        }
    }
    if calibration.is_empty() {
        return Err(Error::DegenerateCalibrationClass {
            missing: "y = 0 or y = 1",
        });
    }
    BinaryDataset::new(calibration, test)
}

pub fn continuous_dataset_from_records(records: &[LabeledRecord]) -> Result<ContinuousDataset> {
    let mut calibration = Vec::new();
    let mut test = Vec::new();
    for r in records {
        match r.y {
            Some(y) => calibration.push((y, r.y_hat)),
            None => test.push(r.y_hat),
        }
    }
    ContinuousDataset::new(calibration, test)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub calibration_fraction: f64,
    pub seed: u64,
    /// Draw a fixed share of each `y` class instead of Bernoulli membership.
    pub stratify: bool,
}

impl SplitSpec {
    pub fn new(calibration_fraction: f64, seed: u64) -> Result<Self> {
        if !(calibration_fraction > 0.0 && calibration_fraction < 1.0) {
            return Err(Error::InvalidParameter {
                name: "calibration_fraction",
                value: calibration_fraction,
                reason: "must lie in (0, 1)",
            });
        }
        Ok(Self {
            calibration_fraction,
            seed,
            stratify: false,
        })
    }
}

fn require_labels(records: &[LabeledRecord]) -> Result<Vec<f64>> {
    records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r.y.ok_or_else(|| Error::MalformedRow {
                line: i as u64 + 1,
                reason: format!("record `{}` has no y; splits need fully labeled data", r.id),
            })
        })
        .collect()
}

/// Calibration membership for resplit `replicate`. Bernoulli membership
/// never looks at the labels; stratified membership takes
/// `round(fraction · n_y)` points from each class.
pub fn split_membership(labels: &[f64], spec: &SplitSpec, replicate: u64) -> Result<Vec<bool>> {
    let mut rng = replicate_rng(spec.seed, replicate);
    let n = labels.len();
    let member = if spec.stratify {
        let mut member = vec![false; n];
        let mut classes: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        for (i, y) in labels.iter().enumerate() {
            classes.entry(y.to_bits()).or_default().push(i);
        }
        for idx in classes.values_mut() {
            let take = (spec.calibration_fraction * idx.len() as f64).round() as usize;
            idx.shuffle(&mut rng);
            for &i in &idx[..take] {
                member[i] = true;
            }
        }
        member
    } else {
        (0..n)
            .map(|_| rng.random::<f64>() < spec.calibration_fraction)
            .collect()
    };
    let m = member.iter().filter(|&&b| b).count();
    if m == 0 {
        return Err(Error::EmptySplitSide {
            side: "calibration",
        });
    }
    if m == n {
        return Err(Error::EmptySplitSide { side: "test" });
    }
    Ok(member)
}

/// A split of fully labeled data. The held-out labels live beside the
/// dataset and are never part of it.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySplit {
    pub dataset: BinaryDataset,
    pub test_truth: Vec<u8>,
    pub membership: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousSplit {
    pub dataset: ContinuousDataset,
    pub test_truth: Vec<f64>,
    pub membership: Vec<bool>,
}

fn binary_split_at(
    records: &[LabeledRecord],
    labels: &[f64],
    spec: &SplitSpec,
    replicate: u64,
) -> Result<BinarySplit> {
    for (index, (r, &y)) in records.iter().zip(labels).enumerate() {
        for v in [y, r.y_hat] {
            if v != 0.0 && v != 1.0 {
                return Err(Error::InvalidLabel { index, value: v });
            }
        }
    }
    let membership = split_membership(labels, spec, replicate)?;
    let mut calibration = Vec::new();
    let mut test = Vec::new();
    let mut test_truth = Vec::new();
    for ((r, &y), &cal) in records.iter().zip(labels).zip(&membership) {
        let pair = (binary_value(y), binary_value(r.y_hat));
        if cal {
            calibration.push(pair);
        } else {
            test.push(pair.1);
            test_truth.push(pair.0);
        }
    }
    Ok(BinarySplit {
        dataset: BinaryDataset::new(calibration, test)?,
        test_truth,
        membership,
    })
}

/// Masks `y` on a random test side of fully labeled binary records.
pub fn apply_split_binary(records: &[LabeledRecord], spec: &SplitSpec) -> Result<BinarySplit> {
    let labels = require_labels(records)?;
    binary_split_at(records, &labels, spec, 0)
}

pub fn apply_split_continuous(
    records: &[LabeledRecord],
    spec: &SplitSpec,
) -> Result<ContinuousSplit> {
    let labels = require_labels(records)?;
    let membership = split_membership(&labels, spec, 0)?;
    let mut calibration = Vec::new();
    let mut test = Vec::new();
    let mut test_truth = Vec::new();
    for ((r, &y), &cal) in records.iter().zip(&labels).zip(&membership) {
        if cal {
            calibration.push((y, r.y_hat));
        } else {
            test.push(r.y_hat);
            test_truth.push(y);
        }
    }
    Ok(ContinuousSplit {
        dataset: ContinuousDataset::new(calibration, test)?,
        test_truth,
        membership,
    })
}

/// Mean of `y` over all records.
pub fn full_data_mean(records: &[LabeledRecord]) -> Result<f64> {
    let labels = require_labels(records)?;
    if labels.is_empty() {
        return Err(Error::InsufficientData { needed: 1, have: 0 });
    }
    Ok(labels.iter().sum::<f64>() / labels.len() as f64)
}

/// Repeats the random split `replicates` times and scores each estimator's
/// interval against the full-data mean of `y`.
pub fn split_coverage_experiment(
    records: &[LabeledRecord],
    spec: &SplitSpec,
    replicates: usize,
    estimators: &[EstimatorKind],
    level: f64,
    parallelism: Option<usize>,
) -> Result<MonteCarloReport> {
    let labels = require_labels(records)?;
    let truth = full_data_mean(records)?;
    let results = simulation::run_replicates(&[replicates], parallelism, |_, b| {
        match binary_split_at(records, &labels, spec, b as u64) {
            Ok(split) => estimators
                .iter()
                .map(|&kind| {
                    inference::infer(&split.dataset, kind, level)
                        .ok()
                        .and_then(|r| ReplicateOutcome::from_ci(r.theta_hat, &r.ci))
                })
                .collect(),
            Err(_) => vec![None; estimators.len()],
        }
    });
    let reps = &results[0];
    let config = format!(
        "N={} fraction={} stratify={}",
        records.len(),
        spec.calibration_fraction,
        spec.stratify
    );
    let rows = estimators
        .iter()
        .enumerate()
        .map(|(e, kind)| {
            let outcomes: Vec<Option<ReplicateOutcome>> = reps.iter().map(|r| r[e]).collect();
            simulation::summarize("split", &config, kind.label(), truth, &outcomes)
        })
        .collect();
    Ok(MonteCarloReport::new(Some(spec.seed), rows))
}

/// Fully labeled binary corpus whose class and confusion counts match
/// `(θ, q0, q1)` as closely as `n` allows, in a seeded random order.
pub fn synthetic_matched_corpus(
    theta: f64,
    q0: f64,
    q1: f64,
    n: usize,
    seed: u64,
) -> Vec<LabeledRecord> {
    let n1 = (theta * n as f64).round() as usize;
    let n0 = n - n1;
    let tp = (q1 * n1 as f64).round() as usize;
    let tn = (q0 * n0 as f64).round() as usize;
    let mut pairs = Vec::with_capacity(n);
    pairs.extend(std::iter::repeat_n((1.0, 1.0), tp));
    pairs.extend(std::iter::repeat_n((1.0, 0.0), n1 - tp));
    pairs.extend(std::iter::repeat_n((0.0, 0.0), tn));
    pairs.extend(std::iter::repeat_n((0.0, 1.0), n0 - tn));
    pairs.shuffle(&mut replicate_rng(seed, 0));
    pairs
        .into_iter()
        .enumerate()
        .map(|(i, (y, y_hat))| LabeledRecord {
            id: (i + 1).to_string(),
            y: Some(y),
            y_hat,
            judge: Some("synthetic".into()),
            pair: Some("matched".into()),
        })
        .collect()
}

/// 17 significant digits; non-finite values as `NaN`.
fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "NaN".into()
    }
}

fn format_error(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Writes a report as CSV (fixed column order, preceded by a `# seed=` line
/// when the seed is known) or versioned JSON.
pub fn write_report(
    report: &MonteCarloReport,
    path: impl AsRef<Path>,
    format: ReportFormat,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_report_to(report, &mut out, format).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

/// Serializes a report to any writer.
pub fn write_report_to<W: Write>(
    report: &MonteCarloReport,
    out: &mut W,
    format: ReportFormat,
) -> std::io::Result<()> {
    match format {
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut *out, report)?;
            writeln!(out)
        }
        ReportFormat::Csv => {
            if let Some(seed) = report.seed {
                writeln!(out, "# seed={seed}")?;
            }
            writeln!(out, "{}", ReportRow::COLUMNS.join(","))?;
            for r in &report.rows {
                let cells = [
                    r.experiment.clone(),
                    r.config.clone(),
                    r.estimator.clone(),
                    format_float(r.truth),
                    r.replicates.to_string(),
                    r.failures.to_string(),
                    format_float(r.bias),
                    format_float(r.bias_se),
                    format_float(r.coverage),
                    format_float(r.coverage_se),
                    format_float(r.mean_width),
                    format_float(r.mean_width_se),
                    format_float(r.rmse),
                    format_float(r.rmse_se),
                ];
                writeln!(out, "{}", cells.join(","))?;
            }
            Ok(())
        }
    }
}

fn parse_field<T: FromStr>(path: &Path, line: u64, column: &str, raw: &str) -> Result<T> {
    raw.parse().map_err(|_| Error::MalformedRow {
        line,
        reason: format!("{column} `{raw}` does not parse in {}", path.display()),
    })
}

pub fn read_report(path: impl AsRef<Path>, format: ReportFormat) -> Result<MonteCarloReport> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    match format {
        ReportFormat::Json => {
            let report: MonteCarloReport = serde_json::from_reader(BufReader::new(file))
                .map_err(|e| format_error(path, e.to_string()))?;
            if report.schema_version != simulation::SCHEMA_VERSION {
                return Err(format_error(
                    path,
                    format!("unsupported schema_version {}", report.schema_version),
                ));
            }
            Ok(report)
        }
        ReportFormat::Csv => {
            let mut seed = None;
            let mut rows = Vec::new();
            let mut header_seen = false;
            for (index, line) in BufReader::new(file).lines().enumerate() {
                let line_no = index as u64 + 1;
                let text = line.map_err(|e| Error::io(path, e))?;
                if let Some(comment) = text.strip_prefix('#') {
                    if let Some(v) = comment.trim().strip_prefix("seed=") {
                        seed = Some(parse_field(path, line_no, "seed", v)?);
                    }
                    continue;
                }
                if !header_seen {
                    if text != ReportRow::COLUMNS.join(",") {
                        return Err(format_error(path, "unexpected report header"));
                    }
                    header_seen = true;
                    continue;
                }
                let f: Vec<&str> = text.split(',').collect();
                if f.len() != ReportRow::COLUMNS.len() {
                    return Err(Error::MalformedRow {
                        line: line_no,
                        reason: format!(
                            "expected {} fields, found {}",
                            ReportRow::COLUMNS.len(),
                            f.len()
                        ),
                    });
                }
                let num = |i: usize| parse_field::<f64>(path, line_no, ReportRow::COLUMNS[i], f[i]);
                rows.push(ReportRow {
                    experiment: f[0].into(),
                    config: f[1].into(),
                    estimator: f[2].into(),
                    truth: num(3)?,
                    replicates: parse_field(path, line_no, "replicates", f[4])?,
                    failures: parse_field(path, line_no, "failures", f[5])?,
                    bias: num(6)?,
                    bias_se: num(7)?,
                    coverage: num(8)?,
                    coverage_se: num(9)?,
                    mean_width: num(10)?,
                    mean_width_se: num(11)?,
                    rmse: num(12)?,
                    rmse_se: num(13)?,
                });
            }
            if !header_seen {
                return Err(format_error(path, "missing report header"));
            }
            Ok(MonteCarloReport::new(seed, rows))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        std::fs::write(&path, body).unwrap();
        path
    }

    #[test]
    fn parses_labeled_and_unlabeled_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "r.csv",
            "id,y,y_hat,judge,pair\n7,1,0,gpt4omini,flash\n8,,1,gpt52,pro\n",
        );
        let r = read_records(&p, RecordFormat::Csv, Domain::Binary).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].y, Some(1.0));
        assert_eq!(r[0].y_hat, 0.0);
        assert_eq!(r[0].judge.as_deref(), Some("gpt4omini"));
        assert!(!r[1].is_labeled());
        assert_eq!(r[1].pair.as_deref(), Some("pro"));
    }

    #[test]
    fn binary_domain_violation_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "r.csv",
            "id,y,y_hat,judge,pair\n1,1,0,a,b\n2,2,0,a,b\n",
        );
        match read_records(&p, RecordFormat::Csv, Domain::Binary) {
            Err(Error::DomainError { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(read_records(&p, RecordFormat::Csv, Domain::Continuous).is_ok());
    }

    #[test]
    fn malformed_rows_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "r.csv", "id,y,y_hat,judge,pair\n1,1,0,a\n");
        assert!(matches!(
            read_records(&p, RecordFormat::Csv, Domain::Binary),
            Err(Error::MalformedRow { line: 2, .. })
        ));
        let p = write(&dir, "s.csv", "id,y,y_hat,judge,pair\n1,x,0,a,b\n");
        assert!(matches!(
            read_records(&p, RecordFormat::Csv, Domain::Binary),
            Err(Error::MalformedRow { line: 2, .. })
        ));
        let p = write(&dir, "t.csv", "id;y;y_hat\n");
        assert!(matches!(
            read_records(&p, RecordFormat::Csv, Domain::Binary),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn jsonl_accepts_numeric_ids() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "r.jsonl",
            "{\"id\": 3, \"y\": 1, \"y_hat\": 1}\n\n{\"id\": \"x\", \"y\": null, \"y_hat\": 0, \"judge\": \"j\"}\n",
        );
        let r = read_records(&p, RecordFormat::Jsonl, Domain::Binary).unwrap();
        assert_eq!(r[0].id, "3");
        assert_eq!(r[1].y, None);
        assert_eq!(r[1].judge.as_deref(), Some("j"));
    }

    #[test]
    fn split_rejects_empty_side() {
        let records = synthetic_matched_corpus(0.5, 0.8, 0.8, 3, 1);
        let spec = SplitSpec {
            calibration_fraction: 0.999_999_999,
            seed: 4,
            stratify: false,
        };
        assert!(matches!(
            apply_split_binary(&records, &spec),
            Err(Error::EmptySplitSide { side: "test" })
        ));
        assert!(SplitSpec::new(1.0, 0).is_err());
    }

    #[test]
    fn stratified_split_takes_class_shares() {
        let records = synthetic_matched_corpus(0.3, 0.8, 0.8, 200, 2);
        let spec = SplitSpec {
            calibration_fraction: 0.1,
            seed: 9,
            stratify: true,
        };
        let split = apply_split_binary(&records, &spec).unwrap();
        let s = split.dataset.summary();
        assert_eq!((s.m0, s.m1), (14, 6));
    }

    #[test]
    fn matched_corpus_counts() {
        let records = synthetic_matched_corpus(0.523, 0.74, 0.69, 493, 11);
        let d = binary_dataset_from_records(&records).unwrap();
        let s = d.summary();
        assert_eq!(s.m1, 258);
        assert_eq!(s.cell(1, 1), 178);
        assert_eq!(s.m0, 235);
        assert_eq!(s.cell(0, 0), 174);
    }

    #[test]
    fn no_labeled_rows_is_degenerate() {
        let records = vec![LabeledRecord {
            id: "1".into(),
            y: None,
            y_hat: 1.0,
            judge: None,
            pair: None,
        }];
        assert!(matches!(
            binary_dataset_from_records(&records),
            Err(Error::DegenerateCalibrationClass { .. })
        ));
    }
}
