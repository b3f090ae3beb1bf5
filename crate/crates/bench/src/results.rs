//! CSV emission and parsing for trial results, sweep summaries, and
//! per-viewpoint diagnostics.
//!
//! Every file starts with a `# incransac-<kind> v<N>` comment naming the
//! column layout, followed by a header row. Readers reject files whose
//! version comment does not match. Wall-clock timings are never written, so
//! equal inputs give byte-identical files.

use std::io::{self, BufRead, Read, Write};

use incransac::Scheme;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trial::{TrialResult, ViewpointRecord};

pub const RESULTS_HEADER: &str = "# incransac-results v1";
pub const SUMMARY_HEADER: &str = "# incransac-summary v1";
pub const DIAGNOSTICS_HEADER: &str = "# incransac-diagnostics v1";

/// Goal error below which a trial counts as relocated.
pub const SUCCESS_RADIUS: f64 = 2.0;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("expected version line `{expected}`, found `{found}`")]
    Version { expected: &'static str, found: String },
}

mod scheme_name {
    use incransac::Scheme;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(scheme: &Scheme, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(scheme.as_str())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Scheme, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(|e| de::Error::custom(format!("scheme `{text}`: {e}")))
    }
}

/// One row of the results CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub change_ratio: f64,
    #[serde(with = "scheme_name")]
    pub scheme: Scheme,
    pub seed: u64,
    /// Empty when the trial ended without an estimate.
    pub error_at_goal: Option<f64>,
    pub heading_error: Option<f64>,
    pub features: usize,
    pub hypotheses: usize,
    pub live_hypotheses: usize,
    pub near_truth_hypotheses: usize,
    pub scored_pairs: u64,
    pub skipped_pairs: u64,
}

impl From<&TrialResult> for ResultRow {
    fn from(r: &TrialResult) -> Self {
        Self {
            change_ratio: r.change_ratio,
            scheme: r.scheme,
            seed: r.seed,
            error_at_goal: r.error_at_goal,
            heading_error: r.heading_error,
            features: r.features,
            hypotheses: r.hypotheses,
            live_hypotheses: r.live_hypotheses,
            near_truth_hypotheses: r.near_truth_hypotheses,
            scored_pairs: r.viewpoints.iter().map(|v| v.scored as u64).sum(),
            skipped_pairs: r.viewpoints.iter().map(|v| v.skipped as u64).sum(),
        }
    }
}

/// Median goal error of one (ratio, scheme) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub change_ratio: f64,
    #[serde(with = "scheme_name")]
    pub scheme: Scheme,
    pub trials: usize,
    /// Trials that could not be run at all.
    pub failed: usize,
    pub no_estimate: usize,
    /// Trials with goal error below [`SUCCESS_RADIUS`].
    pub relocated: usize,
    /// Median over completed trials; a missing estimate counts as infinite.
    pub median_error: Option<f64>,
}

/// Median with the usual midpoint rule for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Stable order of schemes in emitted files.
pub fn scheme_rank(s: Scheme) -> usize {
    Scheme::ALL.iter().position(|&x| x == s).unwrap_or(usize::MAX)
}

/// Groups rows by (ratio, scheme) in sorted order. `failed` lists the cells
/// of trials that errored before producing a row.
pub fn summarize(rows: &[ResultRow], failed: &[(f64, Scheme)]) -> Vec<SummaryRow> {
    let mut cells: Vec<(f64, Scheme)> = rows
        .iter()
        .map(|r| (r.change_ratio, r.scheme))
        .chain(failed.iter().copied())
        .collect();
    cells.sort_by(|a, b| a.0.total_cmp(&b.0).then(scheme_rank(a.1).cmp(&scheme_rank(b.1))));
    cells.dedup();
    cells
        .into_iter()
        .map(|(ratio, scheme)| {
            let mine: Vec<&ResultRow> = rows
                .iter()
                .filter(|r| r.change_ratio == ratio && r.scheme == scheme)
                .collect();
            let errors: Vec<f64> = mine.iter().map(|r| r.error_at_goal.unwrap_or(f64::INFINITY)).collect();
            let failed = failed.iter().filter(|c| **c == (ratio, scheme)).count();
            SummaryRow {
                change_ratio: ratio,
                scheme,
                trials: mine.len() + failed,
                failed,
                no_estimate: mine.iter().filter(|r| r.error_at_goal.is_none()).count(),
                relocated: errors.iter().filter(|&&e| e < SUCCESS_RADIUS).count(),
                median_error: median(&errors),
            }
        })
        .collect()
}

fn write_rows<W: Write, T: Serialize>(out: W, version: &str, rows: &[T]) -> Result<(), CsvError> {
    let mut out = io::BufWriter::new(out);
    writeln!(out, "{version}")?;
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<R: Read, T: for<'de> Deserialize<'de>>(input: R, version: &'static str) -> Result<Vec<T>, CsvError> {
    let mut input = io::BufReader::new(input);
    let mut first = String::new();
    input.read_line(&mut first)?;
    if first.trim_end() != version {
        return Err(CsvError::Version {
            expected: version,
            found: first.trim_end().to_string(),
        });
    }
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    r.deserialize().map(|row| row.map_err(CsvError::from)).collect()
}

pub fn write_results<W: Write>(out: W, rows: &[ResultRow]) -> Result<(), CsvError> {
    write_rows(out, RESULTS_HEADER, rows)
}

pub fn read_results<R: Read>(input: R) -> Result<Vec<ResultRow>, CsvError> {
    read_rows(input, RESULTS_HEADER)
}

pub fn write_summary<W: Write>(out: W, rows: &[SummaryRow]) -> Result<(), CsvError> {
    write_rows(out, SUMMARY_HEADER, rows)
}

pub fn read_summary<R: Read>(input: R) -> Result<Vec<SummaryRow>, CsvError> {
    read_rows(input, SUMMARY_HEADER)
}

/// Per-viewpoint series of one trial. Group columns `n_i` (sizes) and
/// `alloc_i` (allocations) follow the fixed columns; they are left empty
/// for schemes without groups.
pub fn write_diagnostics<W: Write>(out: W, groups: usize, viewpoints: &[ViewpointRecord]) -> Result<(), CsvError> {
    let mut out = io::BufWriter::new(out);
    writeln!(out, "{DIAGNOSTICS_HEADER}")?;
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = [
        "viewpoint",
        "new_features",
        "new_hypotheses",
        "consumed",
        "scored",
        "skipped",
        "inliers",
        "pair_memory_peak",
        "features",
        "hypotheses",
        "live_hypotheses",
        "best_ratio",
        "best_group",
        "error",
    ]
    .map(String::from)
    .to_vec();
    header.extend((0..groups).map(|i| format!("n_{i}")));
    header.extend((0..groups).map(|i| format!("alloc_{i}")));
    w.write_record(&header)?;

    let opt = |v: Option<String>| v.unwrap_or_default();
    for v in viewpoints {
        let mut rec = vec![
            v.viewpoint.to_string(),
            v.new_features.to_string(),
            v.new_hypotheses.to_string(),
            v.consumed.to_string(),
            v.scored.to_string(),
            v.skipped.to_string(),
            v.inliers.to_string(),
            v.pair_memory_peak.to_string(),
            v.features.to_string(),
            v.hypotheses.to_string(),
            v.live_hypotheses.to_string(),
            opt(v.best_ratio.map(|x| x.to_string())),
            opt(v.best_group.map(|x| x.to_string())),
            opt(v.error.map(|x| x.to_string())),
        ];
        for series in [&v.group_sizes, &v.allocation] {
            rec.extend((0..groups).map(|i| opt(series.get(i).map(|x| x.to_string()))));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
