//! CSV writers. Every file has a header row and uses `.` as the decimal
//! separator; floats use Rust's shortest round-trip formatting.

use std::fs;
use std::path::Path;

use uorrl_core::MetricReport;

use crate::error::{CliError, CliResult};

pub fn write_csv<I, R>(path: &Path, header: &[String], rows: I) -> CliResult<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let csv_err = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row.into_iter().collect::<Vec<_>>()).map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// One row per ranked unit: rank, source_id, J, mass, weight,
/// cumulative_mass.
pub fn write_audit(path: &Path, report: &MetricReport) -> CliResult<()> {
    let rows = report.ledger.entries().iter().enumerate().map(|(rank, e)| {
        vec![
            rank.to_string(),
            e.source_id.to_string(),
            e.value.to_string(),
            e.mass.to_string(),
            e.weight.to_string(),
            e.cumulative_mass().to_string(),
        ]
    });
    write_csv(
        path,
        &header(&["rank", "source_id", "J", "mass", "weight", "cumulative_mass"]),
        rows,
    )
}

pub fn write_history(path: &Path, history: &[MetricReport]) -> CliResult<()> {
    let rows = history
        .iter()
        .enumerate()
        .map(|(i, r)| vec![i.to_string(), r.value.to_string()]);
    write_csv(path, &header(&["iteration", "metric_value"]), rows)
}

pub fn write_timing(path: &Path, seconds: &[f64]) -> CliResult<()> {
    let rows = seconds
        .iter()
        .enumerate()
        .map(|(i, s)| vec![i.to_string(), s.to_string()]);
    write_csv(path, &header(&["iteration", "wall_time_s"]), rows)
}

pub fn read_csv(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<String>>)> {
    let csv_err = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let head = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()))
        .collect::<Result<Vec<Vec<String>>, _>>()
        .map_err(csv_err)?;
    Ok((head, rows))
}
