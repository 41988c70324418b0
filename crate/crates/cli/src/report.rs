//! Serialization of evaluation reports.
//!
//! JSON carries the full report and round-trips losslessly; CSV is a flat
//! export of the per-case records for spreadsheet work. Both renderers are
//! deterministic: same report in, same bytes out.

use std::path::Path;

use voxmetric_core::MetricRecord;

use crate::error::{HarnessError, Result};
use crate::evaluate::EvaluationReport;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

/// Renders the report in the requested format.
pub fn render(report: &EvaluationReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => render_json(report),
        ReportFormat::Csv => Ok(render_csv(report)),
    }
}

/// Full report as pretty-printed JSON, newline-terminated.
pub fn render_json(report: &EvaluationReport) -> Result<String> {
    let mut text = serde_json::to_string_pretty(report)
        .map_err(|e| HarnessError::Report(format!("could not encode report: {e}")))?;
    text.push('\n');
    Ok(text)
}

/// Per-case records as CSV. Undefined metrics render as empty cells.
pub fn render_csv(report: &EvaluationReport) -> String {
    let mut out = String::from("patient_id,model_id,dsc,hd_mm,hd95_mm,dsc_bones_excluded\n");
    for record in &report.records {
        out.push_str(&csv_row(record));
        out.push('\n');
    }
    out
}

fn csv_row(record: &MetricRecord) -> String {
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    [
        csv_field(&record.patient_id),
        csv_field(&record.model_id),
        record.dsc.to_string(),
        opt(record.hd_mm),
        opt(record.hd95_mm),
        opt(record.dsc_bones_excluded),
    ]
    .join(",")
}

fn csv_field(raw: &str) -> String {
    if raw.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", raw.replace('"', "\"\""))
    } else {
        raw.to_string()
    }
}

/// Writes the rendered report to `path`.
pub fn write_report(report: &EvaluationReport, format: ReportFormat, path: &Path) -> Result<()> {
    let text = render(report, format)?;
    std::fs::write(path, text).map_err(|e| HarnessError::Write {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Reads a JSON report back, e.g. for follow-up statistics.
pub fn load_report(path: &Path) -> Result<EvaluationReport> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Read {
        path: path.to_path_buf(),
        source: e,
    })?;
    serde_json::from_str(&text)
        .map_err(|e| HarnessError::Report(format!("{}: not a report file: {e}", path.display())))
}
