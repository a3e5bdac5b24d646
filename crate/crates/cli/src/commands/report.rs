use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use echosim::report::{aggregate, MetricSeries, ReportError};

use super::simulate::SeedSummary;
use super::{write_json, write_with};
use crate::CliError;

/// `summary_seed<s>.json` next to `metrics_seed<s>.csv`, if present.
fn sibling_summary(series: &Path) -> Option<SeedSummary> {
    let name = series.file_name()?.to_str()?;
    let seed = name.strip_prefix("metrics_seed")?.strip_suffix(".csv")?;
    let path = series.with_file_name(format!("summary_seed{seed}.json"));
    serde_json::from_str(&std::fs::read_to_string(path).ok()?).ok()
}

pub fn run(paths: &[PathBuf], out: &Path) -> Result<(), CliError> {
    let invalid = |e: ReportError| CliError::Invalid(e.to_string());
    let series = paths
        .iter()
        .map(|p| MetricSeries::load(p).map(|s| (p.clone(), s)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(invalid)?;
    let mut report = aggregate(&series).map_err(invalid)?;
    report.fallback_counts = paths
        .iter()
        .filter_map(|p| sibling_summary(p).map(|s| (p.display().to_string(), s.fallback_count)))
        .collect::<BTreeMap<_, _>>();
    write_json(&out.join("report.json"), &report)?;
    write_with(&out.join("report.csv"), |w| report.write_csv(w))?;
    eprintln!("aggregated {} series over {} checkpoints", report.seeds, report.checkpoints.len());
    Ok(())
}
