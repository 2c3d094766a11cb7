use std::fs;
use std::path::Path;

use serde_json::Value;
use thiserror::Error;

use crate::campaign::{FieldVerdict, FuzzReport};

/// Keys that vary from run to run with wall-clock timing.
pub const TIMING_KEYS: &[&str] = &["duration_ms", "campaign_wall_time_ms", "tests_per_minute"];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("I/O failure on {path}: {source}")]
    IoFailure {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed report: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

pub fn to_json(report: &FuzzReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes")
}

pub fn from_json(text: &str) -> Result<FuzzReport, ReportError> {
    serde_json::from_str(text).map_err(|e| ReportError::Malformed(e.to_string()))
}

/// One row per field, ordered by canonical path text.
pub fn to_csv(report: &FuzzReport) -> String {
    let mut rows: Vec<&FieldVerdict> = report.verdicts().collect();
    rows.sort_by_key(|v| v.path.to_string());
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["path", "verdict", "duration_ms"])
        .expect("in-memory write");
    for v in rows {
        writer
            .write_record([v.path.to_string(), format!("{:?}", v.verdict), v.duration_ms.to_string()])
            .expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("csv is UTF-8")
}

pub fn emit_report(report: &FuzzReport, format: ReportFormat, path: &Path) -> Result<(), ReportError> {
    let text = match format {
        ReportFormat::Json => to_json(report),
        ReportFormat::Csv => to_csv(report),
    };
    fs::write(path, text).map_err(|source| ReportError::IoFailure {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_report(path: &Path) -> Result<FuzzReport, ReportError> {
    let text = fs::read_to_string(path).map_err(|source| ReportError::IoFailure {
        path: path.display().to_string(),
        source,
    })?;
    from_json(&text)
}

/// Removes timing fields at every depth so reports can be compared
/// byte-for-byte.
pub fn strip_timing(value: &mut Value) {
    match value {
        Value::Object(map) => {
            for key in TIMING_KEYS {
                map.shift_remove(*key);
            }
            map.values_mut().for_each(strip_timing);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_timing),
        _ => {}
    }
}

/// The report JSON without timing fields.
pub fn timing_free_json(report: &FuzzReport) -> String {
    let mut value = serde_json::to_value(report).expect("report serializes");
    strip_timing(&mut value);
    serde_json::to_string_pretty(&value).expect("value serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::campaign::{FieldVerdictKind, Summary, ValidationOutcome, ValidationResult};
    use exposure_core::FieldPath;

    fn verdict(path: &str, kind: FieldVerdictKind, ms: u64) -> FieldVerdict {
        FieldVerdict {
            path: FieldPath::parse(path).unwrap(),
            verdict: kind,
            divergence: None,
            detail: None,
            duration_ms: ms,
        }
    }

    fn report(flagged: usize, total: usize) -> FuzzReport {
        let flagged_list: Vec<_> = (0..flagged)
            .map(|i| verdict(&format!("f[{i}]"), FieldVerdictKind::Excessive, 10))
            .collect();
        let others: Vec<_> = (flagged..total)
            .map(|i| verdict(&format!("f[{i}]"), FieldVerdictKind::NonExcessive, 12))
            .collect();
        let summary = Summary::from_verdicts(flagged_list.iter().chain(&others));
        FuzzReport {
            target_url: "http://shop.test/api".into(),
            total_fields: total,
            iterations: total,
            retries: 0,
            flagged: flagged_list,
            others,
            mask_size: 0,
            validation: ValidationResult {
                outcome: ValidationOutcome::Pass,
                detail: None,
                divergence: None,
            },
            campaign_wall_time_ms: 1234,
            workers: 4,
            tests_per_minute: 8.5,
            summary,
        }
    }

    #[test]
    fn json_round_trip() {
        let r = report(3, 8);
        assert_eq!(from_json(&to_json(&r)).unwrap(), r);
    }

    #[test]
    fn csv_rows() {
        let csv = to_csv(&report(3, 8));
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 9);
        assert_eq!(lines[0], "path,verdict,duration_ms");
        assert_eq!(lines[1], "f[0],Excessive,10");
        assert_eq!(lines[8], "f[7],NonExcessive,12");
    }

    #[test]
    fn large_summary_counts_survive() {
        let r = report(2580, 2600);
        let back = from_json(&to_json(&r)).unwrap();
        assert_eq!((back.summary.total_fields, back.summary.excessive), (2600, 2580));
        assert_eq!(back.flagged.len(), 2580);
    }

    #[test]
    fn timing_is_stripped() {
        let mut a = report(1, 2);
        let mut b = a.clone();
        b.campaign_wall_time_ms = 99;
        b.tests_per_minute = 1.0;
        b.flagged[0].duration_ms = 77;
        assert_eq!(timing_free_json(&a), timing_free_json(&b));
        a.flagged[0].verdict = FieldVerdictKind::ClientError;
        assert_ne!(timing_free_json(&a), timing_free_json(&b));
        assert!(!timing_free_json(&b).contains("duration_ms"));
    }
}
