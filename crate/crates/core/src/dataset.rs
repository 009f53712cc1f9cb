//! Long-format multivariate longitudinal data: ingestion, validation and the
//! baseline/time-window preprocessing used before fitting.
//!
//! One row holds one (subject, time) pair with `k` responses and `p`
//! covariates. After construction rows are sorted subject-major, then by
//! time, and every subject owns a contiguous block of rows.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::ops::Range;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("column `{0}` declared in the schema is not present in the header")]
    MissingColumn(String),
    #[error("column `{0}` is assigned more than one role")]
    DuplicateRole(String),
    #[error("line {line}, column `{column}`: cannot parse `{value}` as a number")]
    Parse {
        line: u64,
        column: String,
        value: String,
    },
    #[error("line {line}, column `{column}`: missing value (use --drop-incomplete to drop such rows)")]
    MissingValue { line: u64, column: String },
    #[error("duplicate observation for subject `{subject}` at time {time} (line {line})")]
    Duplicate {
        subject: String,
        time: i64,
        line: u64,
    },
    #[error("row {row}: expected {expected} values, found {found}")]
    Width {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("dataset has no complete rows")]
    Empty,
    #[error("at least one response column is required")]
    NoResponses,
    #[error("invalid preprocessing windows: {0}")]
    Window(String),
    #[error("subjects with no observations in the baseline window: {}", .0.join(", "))]
    EmptyBaseline(Vec<String>),
    #[error("subjects with no observations in the analysis window: {}", .0.join(", "))]
    EmptyAnalysis(Vec<String>),
    #[error("baseline covariate names: expected one per response ({expected}), got {found}")]
    BaselineNames { expected: usize, found: usize },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Which columns play which role in a long-format file.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnRoles {
    pub subject: String,
    pub time: String,
    pub responses: Vec<String>,
    pub covariates: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MissingPolicy {
    Error,
    DropRow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IngestOptions {
    pub delimiter: u8,
    pub missing: MissingPolicy,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            missing: MissingPolicy::Error,
        }
    }
}

/// One observation before validation.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub subject: String,
    pub time: i64,
    pub responses: Vec<f64>,
    pub covariates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectBlock {
    pub id: String,
    pub rows: Range<usize>,
}

impl SubjectBlock {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Validated long-format panel.
#[derive(Debug, Clone, PartialEq)]
pub struct LongitudinalDataset {
    subject_column: String,
    time_column: String,
    response_names: Vec<String>,
    covariate_names: Vec<String>,
    subjects: Vec<String>,
    times: Vec<i64>,
    responses: Vec<f64>,
    covariates: Vec<f64>,
    blocks: Vec<SubjectBlock>,
}

/// Orders subject identifiers numerically when both parse as integers,
/// otherwise lexically; numeric ids sort before non-numeric ones.
pub fn compare_subject_ids(a: &str, b: &str) -> Ordering {
    match (a.parse::<i64>(), b.parse::<i64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        (Err(_), Err(_)) => a.cmp(b),
    }
}

impl LongitudinalDataset {
    /// Builds a dataset from in-memory observations, sorting and validating
    /// them.
    pub fn from_observations(
        roles: &ColumnRoles,
        mut rows: Vec<Observation>,
    ) -> Result<Self, DatasetError> {
        check_roles(roles)?;
        let k = roles.responses.len();
        let p = roles.covariates.len();
        for (i, row) in rows.iter().enumerate() {
            if row.responses.len() != k {
                return Err(DatasetError::Width {
                    row: i,
                    expected: k,
                    found: row.responses.len(),
                });
            }
            if row.covariates.len() != p {
                return Err(DatasetError::Width {
                    row: i,
                    expected: p,
                    found: row.covariates.len(),
                });
            }
        }
        if rows.is_empty() {
            return Err(DatasetError::Empty);
        }
        rows.sort_by(|a, b| compare_subject_ids(&a.subject, &b.subject).then(a.time.cmp(&b.time)));
        Self::from_sorted(roles, rows, None)
    }

    fn from_sorted(
        roles: &ColumnRoles,
        rows: Vec<Observation>,
        lines: Option<&HashMap<(String, i64), u64>>,
    ) -> Result<Self, DatasetError> {
        let m = rows.len();
        let mut data = Self {
            subject_column: roles.subject.clone(),
            time_column: roles.time.clone(),
            response_names: roles.responses.clone(),
            covariate_names: roles.covariates.clone(),
            subjects: Vec::with_capacity(m),
            times: Vec::with_capacity(m),
            responses: Vec::with_capacity(m * roles.responses.len()),
            covariates: Vec::with_capacity(m * roles.covariates.len()),
            blocks: Vec::new(),
        };
        for (idx, row) in rows.into_iter().enumerate() {
            let same_subject = data.subjects.last() == Some(&row.subject);
            if same_subject && data.times.last() == Some(&row.time) {
                let line = lines
                    .and_then(|l| l.get(&(row.subject.clone(), row.time)).copied())
                    .unwrap_or(idx as u64 + 1);
                return Err(DatasetError::Duplicate {
                    subject: row.subject,
                    time: row.time,
                    line,
                });
            }
            if same_subject {
                data.blocks.last_mut().expect("block exists").rows.end = idx + 1;
            } else {
                data.blocks.push(SubjectBlock {
                    id: row.subject.clone(),
                    rows: idx..idx + 1,
                });
            }
            data.subjects.push(row.subject);
            data.times.push(row.time);
            data.responses.extend(row.responses);
            data.covariates.extend(row.covariates);
        }
        Ok(data)
    }

    /// Number of responses `k`.
    pub fn k(&self) -> usize {
        self.response_names.len()
    }

    /// Number of covariates `p`.
    pub fn p(&self) -> usize {
        self.covariate_names.len()
    }

    /// Total number of (subject, time) rows `M`.
    pub fn n_rows(&self) -> usize {
        self.times.len()
    }

    /// Number of subjects `N`.
    pub fn n_subjects(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[SubjectBlock] {
        &self.blocks
    }

    pub fn response_names(&self) -> &[String] {
        &self.response_names
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn subject_column(&self) -> &str {
        &self.subject_column
    }

    pub fn time_column(&self) -> &str {
        &self.time_column
    }

    pub fn subject(&self, row: usize) -> &str {
        &self.subjects[row]
    }

    pub fn time(&self, row: usize) -> i64 {
        self.times[row]
    }

    pub fn response_row(&self, row: usize) -> &[f64] {
        let k = self.k();
        &self.responses[row * k..(row + 1) * k]
    }

    pub fn covariate_row(&self, row: usize) -> &[f64] {
        let p = self.p();
        &self.covariates[row * p..(row + 1) * p]
    }

    pub fn response_index(&self, name: &str) -> Option<usize> {
        self.response_names.iter().position(|n| n == name)
    }

    pub fn covariate_index(&self, name: &str) -> Option<usize> {
        self.covariate_names.iter().position(|n| n == name)
    }

    pub fn roles(&self) -> ColumnRoles {
        ColumnRoles {
            subject: self.subject_column.clone(),
            time: self.time_column.clone(),
            responses: self.response_names.clone(),
            covariates: self.covariate_names.clone(),
        }
    }

    pub fn observations(&self) -> Vec<Observation> {
        (0..self.n_rows())
            .map(|r| Observation {
                subject: self.subjects[r].clone(),
                time: self.times[r],
                responses: self.response_row(r).to_vec(),
                covariates: self.covariate_row(r).to_vec(),
            })
            .collect()
    }

    /// Observations per subject, `n_i`.
    pub fn cluster_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(SubjectBlock::len).collect()
    }

    /// Writes the dataset as delimited text with full-precision numbers.
    pub fn write_csv<W: Write>(&self, writer: W, delimiter: u8) -> Result<(), DatasetError> {
        let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(writer);
        let mut header = vec![self.subject_column.clone(), self.time_column.clone()];
        header.extend(self.response_names.iter().cloned());
        header.extend(self.covariate_names.iter().cloned());
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(header.len());
        for r in 0..self.n_rows() {
            record.clear();
            record.push(self.subjects[r].clone());
            record.push(self.times[r].to_string());
            record.extend(self.response_row(r).iter().map(|v| v.to_string()));
            record.extend(self.covariate_row(r).iter().map(|v| v.to_string()));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_roles(roles: &ColumnRoles) -> Result<(), DatasetError> {
    if roles.responses.is_empty() {
        return Err(DatasetError::NoResponses);
    }
    let mut seen = std::collections::HashSet::new();
    let all = [&roles.subject, &roles.time]
        .into_iter()
        .chain(roles.responses.iter())
        .chain(roles.covariates.iter());
    for name in all {
        if !seen.insert(name.as_str()) {
            return Err(DatasetError::DuplicateRole(name.clone()));
        }
    }
    Ok(())
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "na" | "N/A" | "NaN" | "nan" | "null")
}

fn parse_time(cell: &str) -> Option<i64> {
    if let Ok(t) = cell.parse::<i64>() {
        return Some(t);
    }
    let v = cell.parse::<f64>().ok()?;
    (v.fract() == 0.0 && v.abs() < 9.0e15).then_some(v as i64)
}

/// Numeric cells of `cols`, plus the name of the first missing one.
fn parse_cells<'n>(
    record: &csv::StringRecord,
    line: u64,
    cols: &[usize],
    names: &'n [String],
) -> Result<(Vec<f64>, Option<&'n String>), DatasetError> {
    let mut out = Vec::with_capacity(cols.len());
    let mut missing = None;
    for (&c, name) in cols.iter().zip(names) {
        let raw = record.get(c).unwrap_or("");
        if is_missing(raw) {
            missing.get_or_insert(name);
            continue;
        }
        let v = raw.parse::<f64>().map_err(|_| DatasetError::Parse {
            line,
            column: name.clone(),
            value: raw.to_string(),
        })?;
        out.push(v);
    }
    Ok((out, missing))
}

/// Reads long-format delimited text with a header row.
pub fn ingest_long<R: Read>(
    source: R,
    roles: &ColumnRoles,
    options: IngestOptions,
) -> Result<LongitudinalDataset, DatasetError> {
    check_roles(roles)?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .trim(csv::Trim::All)
        .from_reader(source);
    let header = reader.headers()?.clone();
    let find = |name: &String| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DatasetError::MissingColumn(name.clone()))
    };
    let subject_col = find(&roles.subject)?;
    let time_col = find(&roles.time)?;
    let response_cols = roles.responses.iter().map(find).collect::<Result<Vec<_>, _>>()?;
    let covariate_cols = roles.covariates.iter().map(find).collect::<Result<Vec<_>, _>>()?;

    let mut rows = Vec::new();
    let mut lines: HashMap<(String, i64), u64> = HashMap::new();
    'records: for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let cell = |idx: usize| record.get(idx).unwrap_or("");

        let mut missing = None;
        let subject = cell(subject_col);
        if is_missing(subject) {
            missing = Some(&roles.subject);
        }
        let time_cell = cell(time_col);
        if missing.is_none() && is_missing(time_cell) {
            missing = Some(&roles.time);
        }
        let (responses, gap) = parse_cells(&record, line, &response_cols, &roles.responses)?;
        missing = missing.or(gap);
        let (covariates, gap) = parse_cells(&record, line, &covariate_cols, &roles.covariates)?;
        missing = missing.or(gap);
        if let Some(column) = missing {
            match options.missing {
                MissingPolicy::Error => {
                    return Err(DatasetError::MissingValue {
                        line,
                        column: column.clone(),
                    })
                }
                MissingPolicy::DropRow => continue 'records,
            }
        }
        let time = parse_time(time_cell).ok_or_else(|| DatasetError::Parse {
            line,
            column: roles.time.clone(),
            value: time_cell.to_string(),
        })?;
        if let Some(first) = lines.insert((subject.to_string(), time), line) {
            return Err(DatasetError::Duplicate {
                subject: subject.to_string(),
                time,
                line: line.max(first),
            });
        }
        rows.push(Observation {
            subject: subject.to_string(),
            time,
            responses,
            covariates,
        });
    }
    if rows.is_empty() {
        return Err(DatasetError::Empty);
    }
    rows.sort_by(|a, b| compare_subject_ids(&a.subject, &b.subject).then(a.time.cmp(&b.time)));
    LongitudinalDataset::from_sorted(roles, rows, Some(&lines))
}

/// Baseline-average and time-transform derivation.
///
/// Rows in the baseline window are summarised into one subject-level mean
/// per response; only analysis-window rows are kept, with the baseline
/// means and the rescaled time `(time - offset) / divisor` appended as
/// covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessSpec {
    pub analysis_window: (i64, i64),
    pub baseline_window: (i64, i64),
    pub baseline_names: Vec<String>,
    pub time_offset: f64,
    pub time_divisor: f64,
    pub time_name: String,
}

impl PreprocessSpec {
    pub fn validate(&self, k: usize) -> Result<(), DatasetError> {
        let (t0, t1) = self.analysis_window;
        let (b0, b1) = self.baseline_window;
        if t0 > t1 {
            return Err(DatasetError::Window(format!("analysis window {t0}..{t1} is empty")));
        }
        if b0 > b1 {
            return Err(DatasetError::Window(format!("baseline window {b0}..{b1} is empty")));
        }
        if b1 >= t0 {
            return Err(DatasetError::Window(format!(
                "baseline window must end before the analysis window starts ({b1} >= {t0})"
            )));
        }
        if self.time_divisor == 0.0 || !self.time_divisor.is_finite() {
            return Err(DatasetError::Window("time divisor must be finite and non-zero".into()));
        }
        if !self.time_offset.is_finite() {
            return Err(DatasetError::Window("time offset must be finite".into()));
        }
        if self.baseline_names.len() != k {
            return Err(DatasetError::BaselineNames {
                expected: k,
                found: self.baseline_names.len(),
            });
        }
        Ok(())
    }

    pub fn transform_time(&self, t: i64) -> f64 {
        (t as f64 - self.time_offset) / self.time_divisor
    }
}

pub fn preprocess_baseline(
    data: &LongitudinalDataset,
    spec: &PreprocessSpec,
) -> Result<LongitudinalDataset, DatasetError> {
    spec.validate(data.k())?;
    let (t0, t1) = spec.analysis_window;
    let (b0, b1) = spec.baseline_window;
    let k = data.k();

    let mut no_baseline = Vec::new();
    let mut no_analysis = Vec::new();
    let mut rows = Vec::new();
    for block in data.blocks() {
        let mut sums = vec![0.0; k];
        let mut count = 0usize;
        for r in block.rows.clone() {
            let t = data.time(r);
            if (b0..=b1).contains(&t) {
                count += 1;
                for (s, y) in sums.iter_mut().zip(data.response_row(r)) {
                    *s += y;
                }
            }
        }
        if count == 0 {
            no_baseline.push(block.id.clone());
            continue;
        }
        let means: Vec<f64> = sums.iter().map(|s| s / count as f64).collect();
        let before = rows.len();
        for r in block.rows.clone() {
            let t = data.time(r);
            if !(t0..=t1).contains(&t) {
                continue;
            }
            let mut covariates = data.covariate_row(r).to_vec();
            covariates.extend_from_slice(&means);
            covariates.push(spec.transform_time(t));
            rows.push(Observation {
                subject: block.id.clone(),
                time: t,
                responses: data.response_row(r).to_vec(),
                covariates,
            });
        }
        if rows.len() == before {
            no_analysis.push(block.id.clone());
        }
    }
    if !no_baseline.is_empty() {
        return Err(DatasetError::EmptyBaseline(no_baseline));
    }
    if !no_analysis.is_empty() {
        return Err(DatasetError::EmptyAnalysis(no_analysis));
    }
    let mut roles = data.roles();
    roles.covariates.extend(spec.baseline_names.iter().cloned());
    roles.covariates.push(spec.time_name.clone());
    check_roles(&roles)?;
    // input order is already sorted
    LongitudinalDataset::from_sorted(&roles, rows, None)
}

/// Distinct cluster sizes with their multiplicities.
pub fn size_histogram(data: &LongitudinalDataset) -> BTreeMap<usize, usize> {
    let mut hist = BTreeMap::new();
    for b in data.blocks() {
        *hist.entry(b.len()).or_insert(0) += 1;
    }
    hist
}
