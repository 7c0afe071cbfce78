//! Append-only CSV metrics with a stable header, plus the matching reader.

use std::fs::OpenOptions;
use std::io::Read;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

pub const HEADER: &str = "instance,algorithm,objective,runtime_ms,ratio_vs_offline,bound,bound_satisfied";

/// One measurement: an algorithm's objective on an instance, its runtime,
/// and — when an exact offline objective was available in the same run —
/// the offline/online ratio against the proven admission bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub instance: String,
    pub algorithm: String,
    pub objective: usize,
    pub runtime_ms: f64,
    pub ratio_vs_offline: Option<f64>,
    pub bound: f64,
    pub bound_satisfied: Option<bool>,
}

/// Appends rows, writing the header only when the file is new or empty.
/// Refuses to append to a file whose header differs.
pub fn append_rows(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut existing = String::new();
    if path.exists() {
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_string(&mut existing))
            .with_context(|| format!("reading {}", path.display()))?;
    }
    let needs_header = existing.trim().is_empty();
    if !needs_header {
        let first = existing.lines().next().unwrap_or("");
        if first != HEADER {
            bail!(
                "metrics file {} has header `{first}`, expected `{HEADER}`",
                path.display()
            );
        }
    }
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut writer = csv::WriterBuilder::new()
        .has_headers(needs_header)
        .from_writer(file);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut rows = Vec::new();
    for row in reader.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(algorithm: &str, objective: usize, ratio: Option<f64>) -> MetricsRow {
        MetricsRow {
            instance: "a.json".into(),
            algorithm: algorithm.into(),
            objective,
            runtime_ms: 1.25,
            ratio_vs_offline: ratio,
            bound: 6.169925001442312,
            bound_satisfied: ratio.map(|r| r <= 6.169925001442312),
        }
    }

    #[test]
    fn append_twice_then_read_back() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        append_rows(&path, &[row("ace", 3, Some(1.5))]).unwrap();
        append_rows(&path, &[row("offline-bb", 4, None)]).unwrap();
        let rows = read_rows(&path).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0], row("ace", 3, Some(1.5)));
        assert_eq!(rows[1].ratio_vs_offline, None);

        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), HEADER);
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn foreign_header_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        std::fs::write(&path, "something,else\n1,2\n").unwrap();
        assert!(append_rows(&path, &[row("ace", 1, None)]).is_err());
    }

    #[test]
    fn infinite_ratio_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        append_rows(&path, &[row("ace", 0, Some(f64::INFINITY))]).unwrap();
        let rows = read_rows(&path).unwrap();
        assert!(rows[0].ratio_vs_offline.unwrap().is_infinite());
    }
}
