//! Report sinks: a JSONL header line plus one report line, or CSV rows.

use std::io::Write;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde_json::json;

use crate::config::RunSettings;
use mallows_asep::verify::ExperimentReport;

/// The only line that differs between two identical runs.
pub fn header_line(report: &ExperimentReport) -> String {
    let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    json!({
        "header": {
            "timestamp_unix": now,
            "experiment": report.experiment,
            "engine_version": report.engine_version,
        }
    })
    .to_string()
}

pub fn render(report: &ExperimentReport, format: &str) -> String {
    match format {
        "csv" => {
            let mut out = String::from(ExperimentReport::CSV_HEADER);
            out.push('\n');
            for row in report.csv_rows() {
                out += &row;
                out.push('\n');
            }
            out
        }
        _ => format!("{}\n{}\n", header_line(report), report.to_jsonl()),
    }
}

pub fn file_name(report: &ExperimentReport, format: &str) -> String {
    format!("{}_seed{}.{format}", report.experiment, report.master_seed)
}

/// Writes to the output directory when one is set, else to stdout.
pub fn write_report(report: &ExperimentReport, settings: &RunSettings) -> Result<Option<PathBuf>> {
    let text = render(report, &settings.format);
    match &settings.output {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let path = dir.join(file_name(report, &settings.format));
            std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {}", path.display());
            Ok(Some(path))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(None)
        }
    }
}
