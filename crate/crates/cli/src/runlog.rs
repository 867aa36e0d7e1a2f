//! Per-epoch run records, one JSON object per line.
//!
//! Records carry no wall-clock data, so a rerun with the same config writes
//! the same bytes. Timings go to a separate file (see [`TimingRecord`]).

use std::fs;
use std::io::Write;
use std::path::Path;

use lungcnn::metrics::{Averaging, MetricConventions, MetricSummary};
use lungcnn::train::EpochLog;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    pub run_id: String,
    pub model: String,
    pub epoch: usize,
    pub train: MetricSummary,
    pub validation: MetricSummary,
    /// Test-split metrics of the final parameters; final record only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<MetricSummary>,
    pub auc_averaging: Averaging,
    pub recall_threshold: f64,
}

impl RunRecord {
    pub fn new(run_id: &str, model: &str, log: &EpochLog, conventions: MetricConventions) -> Self {
        RunRecord {
            run_id: run_id.into(),
            model: model.into(),
            epoch: log.epoch,
            train: log.train,
            validation: log.validation,
            test: log.test,
            auc_averaging: conventions.auc_averaging,
            recall_threshold: conventions.recall_threshold,
        }
    }

    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("record serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub run_id: String,
    pub epoch: usize,
    /// Seconds since the Unix epoch when the epoch finished.
    pub finished_at: f64,
    pub wall_time_s: f64,
}

/// Appends records to a log file as they are produced.
pub struct LogWriter {
    file: fs::File,
    path: std::path::PathBuf,
}

impl LogWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let file = fs::File::create(path).map_err(CliError::io(path))?;
        Ok(LogWriter {
            file,
            path: path.to_path_buf(),
        })
    }

    pub fn write<T: Serialize>(&mut self, record: &T) -> Result<()> {
        let mut line = serde_json::to_string(record).expect("record serializes");
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.flush())
            .map_err(CliError::io(&self.path))
    }
}

pub fn parse_runlog(text: &str, origin: &str) -> Result<Vec<RunRecord>> {
    let mut records: Vec<RunRecord> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: RunRecord = serde_json::from_str(line)
            .map_err(|e| CliError::Data(format!("{origin} line {}: {e}", i + 1)))?;
        if let Some(prev) = records.last() {
            if rec.epoch <= prev.epoch {
                return Err(CliError::Data(format!(
                    "{origin} line {}: epoch {} does not follow epoch {}",
                    i + 1,
                    rec.epoch,
                    prev.epoch
                )));
            }
        }
        records.push(rec);
    }
    if records.is_empty() {
        return Err(CliError::Data(format!("{origin}: no records")));
    }
    Ok(records)
}

pub fn read_runlog(path: &Path) -> Result<Vec<RunRecord>> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    parse_runlog(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(x: f64) -> MetricSummary {
        MetricSummary {
            accuracy: x,
            auc: x,
            auc_micro: x,
            auc_macro: Some(x),
            recall: x,
            recall_macro: x,
            loss: 1.0 - x,
        }
    }

    fn record(epoch: usize) -> RunRecord {
        RunRecord {
            run_id: "abc".into(),
            model: "CNN".into(),
            epoch,
            train: summary(0.5),
            validation: summary(0.25),
            test: None,
            auc_averaging: Averaging::Micro,
            recall_threshold: 0.5,
        }
    }

    #[test]
    fn lines_parse_back() {
        let mut last = record(2);
        last.test = Some(summary(0.125));
        let text = record(1).to_line() + &last.to_line();
        assert_eq!(parse_runlog(&text, "log").unwrap(), vec![record(1), last]);
    }

    #[test]
    fn epochs_must_increase() {
        let text = record(2).to_line() + &record(2).to_line();
        let err = parse_runlog(&text, "log").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn malformed_line_is_named() {
        let text = record(1).to_line() + "{\"epoch\": 2}\n";
        let err = parse_runlog(&text, "log").unwrap_err().to_string();
        assert!(err.contains("log line 2"), "{err}");
    }

    #[test]
    fn test_field_omitted_when_absent() {
        assert!(!record(1).to_line().contains("\"test\""));
    }
}
