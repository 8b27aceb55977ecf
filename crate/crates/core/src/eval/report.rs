//! Text and CSV tables of cross-validation reports.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{t_test, CvReport, MetricSummary, TTestMode};
use crate::{Error, Result};

/// `"mean [low high]"` in percent with two decimals.
pub fn format_summary(summary: &MetricSummary) -> String {
    let pct = |v: f64| format!("{:.2}", v * 100.0);
    match (summary.mean, summary.ci95) {
        (Some(m), Some((lo, hi))) => format!("{} [{} {}]", pct(m), pct(lo), pct(hi)),
        (Some(m), None) => format!("{} [n/a n/a]", pct(m)),
        (None, _) => "undefined".to_string(),
    }
}

/// Reports sorted into catalog order.
fn ordered(reports: &[CvReport]) -> Vec<&CvReport> {
    let mut sorted: Vec<&CvReport> = reports.iter().collect();
    sorted.sort_by_key(|r| r.architecture);
    sorted
}

/// Pairwise p-values on fold balanced accuracies, in catalog order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonMatrix {
    pub mode: TTestMode,
    pub architectures: Vec<String>,
    pub p_values: Vec<Vec<Option<f64>>>,
}

pub fn comparison_matrix(reports: &[CvReport], mode: TTestMode) -> ComparisonMatrix {
    let sorted = ordered(reports);
    let values: Vec<Option<Vec<f64>>> = sorted.iter().map(|r| r.balanced_accuracy.defined()).collect();
    let p_values = values
        .iter()
        .map(|a| {
            values
                .iter()
                .map(|b| match (a, b) {
                    (Some(a), Some(b)) => t_test(a, b, mode).ok(),
                    _ => None,
                })
                .collect()
        })
        .collect();
    ComparisonMatrix {
        mode,
        architectures: sorted.iter().map(|r| r.architecture.to_string()).collect(),
        p_values,
    }
}

/// Per-architecture table plus the pairwise t-test matrix.
pub fn render_text(reports: &[CvReport], mode: TTestMode) -> Result<String> {
    if reports.is_empty() {
        return Err(Error::Empty("reports"));
    }
    let sorted = ordered(reports);
    let rows: Vec<[String; 4]> = sorted
        .iter()
        .map(|r| {
            [
                r.architecture.to_string(),
                format_summary(&r.sensitivity),
                format_summary(&r.specificity),
                format_summary(&r.balanced_accuracy),
            ]
        })
        .collect();
    let header = [
        "Classifier",
        "Sensitivity (%)",
        "Specificity (%)",
        "Balanced Accuracy (%)",
    ];
    let widths: Vec<usize> = (0..4)
        .map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap())
        .collect();
    let mut out = String::new();
    let line = |out: &mut String, cells: [&str; 4]| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", padded.join("  ").trim_end());
    };
    line(&mut out, header);
    for r in &rows {
        line(&mut out, [&r[0], &r[1], &r[2], &r[3]]);
    }
    for r in &sorted {
        if r.resubstitution {
            let _ = writeln!(
                out,
                "{}: single-fold resubstitution run, metrics are training-set scores",
                r.architecture
            );
        }
    }

    let matrix = comparison_matrix(reports, mode);
    if matrix.architectures.len() > 1 {
        let mode_name = match mode {
            TTestMode::Paired => "paired",
            TTestMode::Welch => "Welch",
        };
        let _ = writeln!(out, "\nBalanced accuracy t-test p-values ({mode_name}):");
        let w = matrix.architectures.iter().map(String::len).max().unwrap().max(6);
        let _ = write!(out, "{:w$}", "");
        for a in &matrix.architectures {
            let _ = write!(out, "  {a:>w$}");
        }
        out.push('\n');
        for (a, row) in matrix.architectures.iter().zip(&matrix.p_values) {
            let _ = write!(out, "{a:w$}");
            for p in row {
                let cell = p.map_or_else(|| "-".to_string(), |p| format!("{p:.4}"));
                let _ = write!(out, "  {cell:>w$}");
            }
            out.push('\n');
        }
    }
    Ok(out)
}

/// One row of the CSV table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub architecture: String,
    pub metric: String,
    pub mean: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub folds: Vec<Option<f64>>,
}

pub const METRIC_NAMES: [&str; 3] = ["sensitivity", "specificity", "balanced_accuracy"];

pub fn summary_rows(reports: &[CvReport]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for r in ordered(reports) {
        for (name, s) in METRIC_NAMES
            .iter()
            .zip([&r.sensitivity, &r.specificity, &r.balanced_accuracy])
        {
            rows.push(SummaryRow {
                architecture: r.architecture.to_string(),
                metric: name.to_string(),
                mean: s.mean,
                ci_low: s.ci95.map(|c| c.0),
                ci_high: s.ci95.map(|c| c.1),
                folds: s.values.clone(),
            });
        }
    }
    rows
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| format!("{v}"))
}

/// Full-precision fractions; empty cells are undefined values.
pub fn render_csv(reports: &[CvReport]) -> Result<String> {
    if reports.is_empty() {
        return Err(Error::Empty("reports"));
    }
    let rows = summary_rows(reports);
    let k = rows.iter().map(|r| r.folds.len()).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "architecture".to_string(),
        "metric".into(),
        "mean".into(),
        "ci_low".into(),
        "ci_high".into(),
    ];
    header.extend((1..=k).map(|i| format!("fold_{i}")));
    let csv_err = |e: csv::Error| Error::Csv {
        row: 0,
        message: e.to_string(),
    };
    w.write_record(&header).map_err(csv_err)?;
    for r in &rows {
        let mut rec = vec![
            r.architecture.clone(),
            r.metric.clone(),
            cell(r.mean),
            cell(r.ci_low),
            cell(r.ci_high),
        ];
        rec.extend((0..k).map(|i| cell(r.folds.get(i).copied().flatten())));
        w.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Csv {
        row: 0,
        message: e.to_string(),
    })?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

/// Parses the output of [`render_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<SummaryRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Csv {
            row,
            message: e.to_string(),
        })?;
        let num = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| Error::Csv {
                    row,
                    message: format!("not a number: {s:?}"),
                })
            }
        };
        if rec.len() < 5 {
            return Err(Error::Csv {
                row,
                message: "too few columns".into(),
            });
        }
        rows.push(SummaryRow {
            architecture: rec[0].to_string(),
            metric: rec[1].to_string(),
            mean: num(&rec[2])?,
            ci_low: num(&rec[3])?,
            ci_high: num(&rec[4])?,
            folds: rec.iter().skip(5).map(num).collect::<Result<_>>()?,
        });
    }
    Ok(rows)
}
