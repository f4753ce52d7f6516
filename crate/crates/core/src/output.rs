//! Report rendering for the `cwa-sim` binary.
//!
//! CSV column sets are fixed; see the `*_COLUMNS` constants.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::Serialize;

use crate::coverage::{CoverageReport, Estimate};
use crate::enf::RiskReport;
use crate::model::{ModelVersion, RiskClass};
use crate::scenario::{CompareRow, RunReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    Json,
    Csv,
    #[default]
    Table,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            "table" => Ok(Self::Table),
            other => Err(format!(
                "unknown format {other:?}, expected json, csv or table"
            )),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Json => "json",
            Self::Csv => "csv",
            Self::Table => "table",
        })
    }
}

pub const RUN_COLUMNS: [&str; 9] = [
    "person",
    "evaluation_date",
    "model",
    "class",
    "tcr_minutes",
    "r_max",
    "weighted_minutes",
    "low_days",
    "high_days",
];

pub const COMPARE_COLUMNS: [&str; 8] = [
    "person",
    "evaluation_date",
    "day",
    "v1_tcr_minutes",
    "v1_class",
    "v2_weighted_minutes",
    "v2_class",
    "agree",
];

pub const COVERAGE_COLUMNS: [&str; 5] = ["metric", "value", "std_error", "ci_low", "ci_high"];

pub const SCORE_COLUMNS: [&str; 1] = ["score"];

/// One flat line per device and evaluation date. v1 fills the minute
/// columns, v2 the day counts; the other side stays empty.
#[derive(Debug, Serialize)]
struct RunRow<'a> {
    person: &'a str,
    evaluation_date: NaiveDate,
    model: ModelVersion,
    class: RiskClass,
    tcr_minutes: Option<f64>,
    r_max: Option<u32>,
    weighted_minutes: Option<f64>,
    low_days: Option<usize>,
    high_days: Option<usize>,
}

/// Highest class any part of the report reached.
pub fn overall_class(report: &RiskReport) -> RiskClass {
    match report {
        RiskReport::V1 { combined, .. } => combined.class,
        RiskReport::V2 { days, .. } => days
            .iter()
            .map(|d| d.class)
            .max()
            .unwrap_or(RiskClass::None),
    }
}

fn run_rows(run: &RunReport) -> Vec<RunRow<'_>> {
    run.reports
        .iter()
        .map(|d| {
            let mut row = RunRow {
                person: d.person.as_str(),
                evaluation_date: d.report.evaluation_date(),
                model: run.model,
                class: overall_class(&d.report),
                tcr_minutes: None,
                r_max: None,
                weighted_minutes: None,
                low_days: None,
                high_days: None,
            };
            match &d.report {
                RiskReport::V1 { combined, .. } => {
                    row.tcr_minutes = Some(combined.tcr_minutes);
                    row.r_max = Some(combined.r_max.0);
                    row.weighted_minutes = Some(combined.weighted_minutes);
                }
                RiskReport::V2 { counts, .. } => {
                    row.low_days = Some(counts.low_days);
                    row.high_days = Some(counts.high_days);
                }
            }
            row
        })
        .collect()
}

fn json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn csv<T: Serialize>(columns: &[&str], rows: impl IntoIterator<Item = T>) -> String {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(columns).expect("write to memory");
    for row in rows {
        w.serialize(row).expect("write to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is utf-8")
}

/// Left-aligned columns separated by two spaces.
fn table(columns: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = columns.iter().map(|c| c.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: &mut dyn Iterator<Item = &str>| {
        let mut s = cells
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ");
        s.truncate(s.trim_end().len());
        s.push('\n');
        s
    };
    let mut out = line(&mut columns.iter().copied());
    for row in rows {
        out.push_str(&line(&mut row.iter().map(String::as_str)));
    }
    out
}

fn cell<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "-".into(), |v| v.to_string())
}

pub fn render_run(run: &RunReport, format: Format) -> String {
    match format {
        Format::Json => json(run),
        Format::Csv => csv(&RUN_COLUMNS, run_rows(run)),
        Format::Table => {
            let rows: Vec<Vec<String>> = run_rows(run)
                .into_iter()
                .map(|r| {
                    vec![
                        r.person.to_string(),
                        r.evaluation_date.to_string(),
                        r.model.to_string(),
                        r.class.to_string(),
                        cell(r.tcr_minutes),
                        cell(r.r_max),
                        cell(r.weighted_minutes),
                        cell(r.low_days),
                        cell(r.high_days),
                    ]
                })
                .collect();
            table(&RUN_COLUMNS, &rows)
        }
    }
}

pub fn render_compare(rows: &[CompareRow], format: Format) -> String {
    match format {
        Format::Json => json(rows),
        Format::Csv => csv(&COMPARE_COLUMNS, rows),
        Format::Table => {
            let cells: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.person.to_string(),
                        r.evaluation_date.to_string(),
                        r.day.to_string(),
                        r.v1_tcr_minutes.to_string(),
                        r.v1_class.to_string(),
                        r.v2_weighted_minutes.to_string(),
                        r.v2_class.to_string(),
                        if r.agree { "yes" } else { "NO" }.to_string(),
                    ]
                })
                .collect();
            table(&COMPARE_COLUMNS, &cells)
        }
    }
}

#[derive(Serialize)]
struct MetricRow {
    metric: &'static str,
    value: f64,
    std_error: Option<f64>,
    ci_low: Option<f64>,
    ci_high: Option<f64>,
}

fn metric_rows(report: &CoverageReport) -> Vec<MetricRow> {
    let metrics: [(&'static str, Option<Estimate>); 5] = [
        ("registered_fraction", Some(report.registered_fraction)),
        ("effective_fraction", Some(report.effective_fraction)),
        (
            "short_contact_miss_rate",
            Some(report.short_contact_miss_rate),
        ),
        ("underestimation_factor", report.underestimation_factor),
        (
            "individual_underestimation_factor",
            report.individual_underestimation_factor,
        ),
    ];
    metrics
        .into_iter()
        .map(|(metric, e)| MetricRow {
            metric,
            value: e.map_or(f64::INFINITY, |e| e.value),
            std_error: e.map(|e| e.std_error),
            ci_low: e.map(|e| e.ci_low),
            ci_high: e.map(|e| e.ci_high),
        })
        .collect()
}

pub fn render_coverage(report: &CoverageReport, format: Format) -> String {
    match format {
        Format::Json => json(report),
        Format::Csv => csv(&COVERAGE_COLUMNS, metric_rows(report)),
        Format::Table => {
            let rows: Vec<Vec<String>> = metric_rows(report)
                .into_iter()
                .map(|m| {
                    let fixed = |v: Option<f64>| cell(v.map(|v| format!("{v:.6}")));
                    vec![
                        m.metric.to_string(),
                        format!("{:.6}", m.value),
                        fixed(m.std_error),
                        fixed(m.ci_low),
                        fixed(m.ci_high),
                    ]
                })
                .collect();
            let mut out = format!("trials: {}\n", report.trials);
            out.push_str(&table(&COVERAGE_COLUMNS, &rows));
            out
        }
    }
}

pub fn render_scores(scores: &BTreeSet<u32>, format: Format) -> String {
    match format {
        Format::Json => json(scores),
        Format::Csv => csv(&SCORE_COLUMNS, scores.iter().map(|s| (s,))),
        Format::Table => {
            let rows: Vec<Vec<String>> = scores.iter().map(|s| vec![s.to_string()]).collect();
            table(&SCORE_COLUMNS, &rows)
        }
    }
}
