use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::batch::RunConfig;
use super::stats::RunStats;
use super::sweep::{PointStatus, SweepReport};
use super::HarnessError;
use crate::protocol::Transcript;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

/// A batch result with the config that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub stats: RunStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub point: usize,
    pub status: String,
    pub metric: String,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub count: Option<usize>,
    pub ci95_low: Option<f64>,
    pub ci95_high: Option<f64>,
    pub note: String,
}

fn stat_rows(point: usize, stats: &RunStats, out: &mut Vec<CsvRow>) {
    for (name, m) in &stats.metrics {
        out.push(CsvRow {
            point,
            status: "completed".into(),
            metric: name.clone(),
            mean: Some(m.mean),
            std: Some(m.std),
            count: Some(m.count),
            ci95_low: Some(m.ci95_low),
            ci95_high: Some(m.ci95_high),
            note: String::new(),
        });
    }
    for g in &stats.gates {
        out.push(CsvRow {
            point,
            status: "completed".into(),
            metric: format!("gate:{}", g.name),
            mean: Some(g.observed),
            std: None,
            count: Some(stats.trials),
            ci95_low: Some(g.target - g.tolerance),
            ci95_high: Some(g.target + g.tolerance),
            note: if g.passed { "pass".into() } else { "fail".into() },
        });
    }
}

/// One row per metric and gate; a sweep adds one row per skipped or
/// failed point.
pub fn csv_rows<T: CsvSource>(source: &T) -> Vec<CsvRow> {
    source.rows()
}

pub trait CsvSource {
    fn rows(&self) -> Vec<CsvRow>;
}

impl CsvSource for RunReport {
    fn rows(&self) -> Vec<CsvRow> {
        let mut out = Vec::new();
        stat_rows(0, &self.stats, &mut out);
        out
    }
}

impl CsvSource for SweepReport {
    fn rows(&self) -> Vec<CsvRow> {
        let mut out = Vec::new();
        for row in &self.rows {
            let i = row.point.index;
            match (&row.status, &row.stats) {
                (PointStatus::Completed, Some(stats)) => stat_rows(i, stats, &mut out),
                (status, _) => {
                    let (label, reason) = match status {
                        PointStatus::Skipped(r) => ("skipped", r.clone()),
                        PointStatus::Failed(r) => ("failed", r.clone()),
                        PointStatus::Completed => ("completed", String::new()),
                    };
                    out.push(CsvRow {
                        point: i,
                        status: label.into(),
                        metric: String::new(),
                        mean: None,
                        std: None,
                        count: None,
                        ci95_low: None,
                        ci95_high: None,
                        note: reason,
                    });
                }
            }
        }
        out
    }
}

/// Writes through a temporary file in the target directory, then renames.
fn atomic_write(path: &Path, f: impl FnOnce(&mut dyn Write) -> Result<(), HarnessError>) -> Result<(), HarnessError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| HarnessError::io(path, e))?;
    f(tmp.as_file_mut())?;
    tmp.as_file_mut().flush().map_err(|e| HarnessError::io(path, e))?;
    tmp.persist(path).map_err(|e| HarnessError::io(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), HarnessError> {
    atomic_write(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n").map_err(|e| HarnessError::io(path, e))
    })
}

pub fn write_csv<T: CsvSource>(source: &T, path: &Path) -> Result<(), HarnessError> {
    atomic_write(path, |w| {
        let mut wr = csv::Writer::from_writer(w);
        for row in source.rows() {
            wr.serialize(row)?;
        }
        wr.flush().map_err(|e| HarnessError::io(path, e))
    })
}

pub fn write_report<T: Serialize + CsvSource>(
    report: &T,
    format: ReportFormat,
    path: &Path,
) -> Result<(), HarnessError> {
    match format {
        ReportFormat::Json => write_json(report, path),
        ReportFormat::Csv => write_csv(report, path),
    }
}

/// One `trial-NNNNN.jsonl` file per transcript.
pub fn write_transcripts(dir: &Path, transcripts: &[Transcript]) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    for (i, t) in transcripts.iter().enumerate() {
        let path = dir.join(format!("trial-{i:05}.jsonl"));
        atomic_write(&path, |w| t.write_jsonl(w).map_err(|e| HarnessError::io(&path, e)))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{run_batch, SweepGrid};

    fn small() -> RunConfig {
        RunConfig {
            trials: 3,
            params: crate::protocol::ProtocolParams { s: 200, ..Default::default() },
            ..Default::default()
        }
    }

    #[test]
    fn json_round_trip() {
        let config = small();
        let report = RunReport { stats: run_batch(&config).unwrap(), config };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out/report.json");
        write_report(&report, ReportFormat::Json, &path).unwrap();
        let back: RunReport = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn csv_has_commit_accept_row() {
        let config = small();
        let report = RunReport { stats: run_batch(&config).unwrap(), config };
        let rows = csv_rows(&report);
        let row = rows.iter().find(|r| r.metric == "commit_accept_rate").unwrap();
        assert_eq!(row.mean, Some(1.0));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        write_report(&report, ReportFormat::Csv, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("point,status,metric,mean,std,count,ci95_low,ci95_high,note"));
    }

    #[test]
    fn skipped_points_appear_in_csv() {
        let grid = SweepGrid { f: vec![[0.3, 0.1, 0.05]], ..Default::default() };
        let rows = csv_rows(&crate::harness::run_sweep(&grid, &small()));
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].status, "skipped");
    }

    #[test]
    fn unwritable_path_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let path = blocker.join("report.json");
        let err = write_json(&1, &path).unwrap_err().to_string();
        assert!(err.contains("file"), "{err}");
    }
}
