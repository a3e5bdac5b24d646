//! Per-seed metric series files and their cross-seed aggregate.
//!
//! A series file is CSV: `#`-prefixed config-echo lines, a column header,
//! then one row per checkpoint. Undefined values are empty cells.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::MetricsReport;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: line {line}: {message}")]
    Format { path: PathBuf, line: usize, message: String },
    #[error("{path}: checkpoints {got:?} do not match {expected:?}")]
    Alignment { path: PathBuf, expected: Vec<u64>, got: Vec<u64> },
    #[error("no series to aggregate")]
    Empty,
}

pub const METRIC_NAMES: [&str; 5] = ["modularity", "clustering", "path_length", "density", "stance_accuracy"];

#[derive(Clone, Debug, PartialEq)]
pub struct MetricSeries {
    /// Config echo, one `key = value` entry per line, without the `# `.
    pub header: Vec<String>,
    pub rows: Vec<MetricsReport>,
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl MetricSeries {
    pub fn write(&self, mut out: impl Write) -> std::io::Result<()> {
        for line in &self.header {
            writeln!(out, "# {line}")?;
        }
        writeln!(out, "{}", MetricsReport::COLUMNS.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row.values().iter().map(|&v| cell(v)).collect();
            writeln!(out, "{},{}", row.step, cells.join(","))?;
        }
        Ok(())
    }

    pub fn read(reader: impl BufRead, path: &Path) -> Result<Self, ReportError> {
        let mut header = Vec::new();
        let mut rows = Vec::new();
        let mut columns_seen = false;
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|source| ReportError::Io { path: path.to_path_buf(), source })?;
            let bad = |message: String| ReportError::Format { path: path.to_path_buf(), line: i + 1, message };
            if let Some(rest) = line.strip_prefix('#') {
                header.push(rest.trim_start().to_string());
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            if !columns_seen {
                if line.trim() != MetricsReport::COLUMNS.join(",") {
                    return Err(bad(format!("unexpected column header {line:?}")));
                }
                columns_seen = true;
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != MetricsReport::COLUMNS.len() {
                return Err(bad(format!("{} cells, expected {}", cells.len(), MetricsReport::COLUMNS.len())));
            }
            let step = cells[0].trim().parse::<u64>().map_err(|e| bad(format!("step {:?}: {e}", cells[0])))?;
            let mut values = [None; 5];
            for (slot, text) in values.iter_mut().zip(&cells[1..]) {
                let text = text.trim();
                if !text.is_empty() {
                    *slot = Some(text.parse::<f64>().map_err(|e| bad(format!("{text:?}: {e}")))?);
                }
            }
            rows.push(MetricsReport {
                step,
                modularity: values[0],
                clustering: values[1].ok_or_else(|| bad("clustering is never undefined".into()))?,
                path_length: values[2],
                density: values[3],
                stance_accuracy: values[4],
            });
        }
        if !columns_seen {
            return Err(ReportError::Format { path: path.to_path_buf(), line: 1, message: "no column header".into() });
        }
        Ok(MetricSeries { header, rows })
    }

    pub fn load(path: &Path) -> Result<Self, ReportError> {
        let file = std::fs::File::open(path).map_err(|source| ReportError::Io { path: path.to_path_buf(), source })?;
        Self::read(std::io::BufReader::new(file), path)
    }

    pub fn steps(&self) -> Vec<u64> {
        self.rows.iter().map(|r| r.step).collect()
    }
}

/// Mean and sample standard deviation of one metric at one checkpoint.
/// Both are `None` when any seed's value is undefined there.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub n: usize,
}

impl Stat {
    /// With a single value the std is reported as 0.
    pub fn of(values: &[Option<f64>]) -> Stat {
        let n = values.len();
        let defined: Option<Vec<f64>> = values.iter().copied().collect();
        match defined {
            Some(xs) if !xs.is_empty() => {
                let mean = xs.iter().sum::<f64>() / n as f64;
                let std = if n < 2 {
                    0.0
                } else {
                    (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
                };
                Stat { mean: Some(mean), std: Some(std), n }
            }
            _ => Stat { mean: None, std: None, n },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointStats {
    pub step: u64,
    pub metrics: BTreeMap<String, Stat>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedSeries {
    pub file: String,
    pub rows: Vec<MetricsReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub seeds: usize,
    /// Set when only one series was given, so every std is a placeholder 0.
    pub single_sample: bool,
    pub checkpoints: Vec<CheckpointStats>,
    pub per_seed: Vec<SeedSeries>,
    pub fallback_counts: BTreeMap<String, u64>,
    /// Config echo of the first series.
    pub config: Vec<String>,
}

/// Aligns checkpoints across series and summarizes each metric.
pub fn aggregate(series: &[(PathBuf, MetricSeries)]) -> Result<AggregateReport, ReportError> {
    let Some((_, first)) = series.first() else {
        return Err(ReportError::Empty);
    };
    let expected = first.steps();
    for (path, s) in series {
        let got = s.steps();
        if got != expected {
            return Err(ReportError::Alignment { path: path.clone(), expected, got });
        }
    }
    let checkpoints = expected
        .iter()
        .enumerate()
        .map(|(row, &step)| {
            let metrics = METRIC_NAMES
                .iter()
                .enumerate()
                .map(|(m, name)| {
                    let values: Vec<Option<f64>> = series.iter().map(|(_, s)| s.rows[row].values()[m]).collect();
                    (name.to_string(), Stat::of(&values))
                })
                .collect();
            CheckpointStats { step, metrics }
        })
        .collect();
    Ok(AggregateReport {
        seeds: series.len(),
        single_sample: series.len() == 1,
        checkpoints,
        per_seed: series.iter().map(|(p, s)| SeedSeries { file: p.display().to_string(), rows: s.rows.clone() }).collect(),
        fallback_counts: BTreeMap::new(),
        config: first.header.clone(),
    })
}

impl AggregateReport {
    /// Wide CSV: `step`, then `<metric>_mean,<metric>_std` per metric.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "# seeds = {}", self.seeds)?;
        if self.single_sample {
            writeln!(out, "# single_sample = true")?;
        }
        for line in &self.config {
            writeln!(out, "# {line}")?;
        }
        let mut columns = vec!["step".to_string()];
        for name in METRIC_NAMES {
            columns.push(format!("{name}_mean"));
            columns.push(format!("{name}_std"));
        }
        writeln!(out, "{}", columns.join(","))?;
        for cp in &self.checkpoints {
            let mut cells = vec![cp.step.to_string()];
            for name in METRIC_NAMES {
                let stat = cp.metrics[name];
                cells.push(cell(stat.mean));
                cells.push(cell(stat.std));
            }
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }
}
