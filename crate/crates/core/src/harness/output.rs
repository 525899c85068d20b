//! CSV and JSON artifacts. Numbers are written in shortest round-trip form
//! and nothing time- or host-dependent is recorded, so identical runs give
//! byte-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::OutputFormat;
use crate::error::{Error, Result};
use crate::lorenz_core::{DensityField, LorenzCurve, MetricSeries};

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// `coordinate,value` CSV body with a header row.
pub fn curve_csv(coordinates: &[f64], values: &[f64]) -> String {
    let mut s = String::from("coordinate,value\n");
    for (x, v) in coordinates.iter().zip(values) {
        let _ = writeln!(s, "{},{}", fmt_f64(*x), fmt_f64(*v));
    }
    s
}

/// Metrics CSV with columns in [`MetricSeries::COLUMNS`] order. Missing
/// entries are empty fields.
pub fn metrics_csv(m: &MetricSeries) -> String {
    let mut s = MetricSeries::COLUMNS.join(",");
    s.push('\n');
    for i in 0..m.len() {
        let r = m.record(i);
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            fmt_f64(r.time),
            fmt_opt(r.gini),
            fmt_opt(r.hoover),
            fmt_f64(r.mean),
            fmt_f64(r.std),
            fmt_f64(r.mass_error),
            fmt_opt(r.convexity_margin)
        );
    }
    s
}

/// One sampled profile: a density on `x` or a Lorenz curve on `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: f64,
    pub coordinates: Vec<f64>,
    pub values: Vec<f64>,
}

impl From<&LorenzCurve> for Snapshot {
    fn from(c: &LorenzCurve) -> Self {
        Self {
            time: c.time(),
            coordinates: c.fgrid(),
            values: c.values().to_vec(),
        }
    }
}

impl From<&DensityField> for Snapshot {
    fn from(d: &DensityField) -> Self {
        Self {
            time: d.time(),
            coordinates: d.nodes().to_vec(),
            values: d.values().to_vec(),
        }
    }
}

/// Index entry for a written file; `path` is relative to the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
}

/// Writes files under one directory and remembers what it wrote.
#[derive(Debug)]
pub struct OutputSink {
    dir: PathBuf,
    format: OutputFormat,
    files: Vec<FileEntry>,
}

impl OutputSink {
    /// Creates the directory if needed.
    pub fn new(dir: &Path, format: OutputFormat) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            format,
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn format(&self) -> OutputFormat {
        self.format
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }

    fn write_raw(&self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::io(path, e))
    }

    /// Writes a file and records it in the index.
    pub fn write(&mut self, name: &str, kind: &str, time: Option<f64>, body: &str) -> Result<()> {
        self.write_raw(name, body)?;
        self.files.push(FileEntry {
            path: name.to_string(),
            kind: kind.to_string(),
            time,
        });
        Ok(())
    }

    /// Pretty JSON with a trailing newline.
    pub fn write_json<T: Serialize>(&mut self, name: &str, kind: &str, value: &T) -> Result<()> {
        let mut body = serde_json::to_string_pretty(value)?;
        body.push('\n');
        self.write(name, kind, None, &body)
    }

    /// Writes a file that is not listed in the index (the index and manifest).
    pub fn write_unindexed_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut body = serde_json::to_string_pretty(value)?;
        body.push('\n');
        self.write_raw(name, &body)
    }
}

#[derive(Serialize)]
struct Index<'a> {
    files: &'a [FileEntry],
}

/// One file per snapshot named `{prefix}_{index}` with a zero-padded index,
/// a metrics table and `index.json` listing every file written so far.
///
/// The format selects CSV, JSON or both for snapshots and metrics.
pub fn emit_plot_data(
    sink: &mut OutputSink,
    prefix: &str,
    snapshots: &[Snapshot],
    metrics: &MetricSeries,
) -> Result<()> {
    write_snapshots(sink, prefix, snapshots)?;
    if sink.format().csv() {
        sink.write("metrics.csv", "metrics", None, &metrics_csv(metrics))?;
    }
    if sink.format().json() {
        sink.write_json("metrics.json", "metrics", metrics)?;
    }
    write_index(sink)
}

/// Snapshot files only, named as in [`emit_plot_data`].
pub fn write_snapshots(sink: &mut OutputSink, prefix: &str, snapshots: &[Snapshot]) -> Result<()> {
    let width = snapshots.len().saturating_sub(1).to_string().len().max(4);
    for (k, snap) in snapshots.iter().enumerate() {
        let stem = format!("{prefix}_{k:0width$}");
        if sink.format().csv() {
            let body = curve_csv(&snap.coordinates, &snap.values);
            sink.write(&format!("{stem}.csv"), prefix, Some(snap.time), &body)?;
        }
        if sink.format().json() {
            let mut body = serde_json::to_string(snap)?;
            body.push('\n');
            sink.write(&format!("{stem}.json"), prefix, Some(snap.time), &body)?;
        }
    }
    Ok(())
}

/// Rewrites `index.json` from the sink's file list.
pub fn write_index(sink: &OutputSink) -> Result<()> {
    sink.write_unindexed_json("index.json", &Index { files: sink.files() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lorenz_core::{Domain, MetricRecord};

    #[test]
    fn shortest_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 123456.789, -0.0, 5e-324] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
        assert_eq!(fmt_f64(0.1), "0.1");
        assert_eq!(fmt_f64(2.0), "2.0");
    }

    #[test]
    fn metrics_header_is_fixed() {
        let mut m = MetricSeries::default();
        m.push(MetricRecord {
            time: 0.5,
            gini: None,
            hoover: Some(0.25),
            mean: 1.0,
            std: 0.5,
            mass_error: 0.0,
            convexity_margin: None,
        });
        assert_eq!(
            metrics_csv(&m),
            "time,gini,hoover,mean,std,mass_error,convexity_margin\n0.5,,0.25,1.0,0.5,0.0,\n"
        );
    }

    #[test]
    fn three_snapshots_make_five_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut sink = OutputSink::new(dir.path(), OutputFormat::Csv).unwrap();
        let snaps: Vec<Snapshot> = (0..3)
            .map(|k| {
                let c = LorenzCurve::from_fn(5, k as f64, Domain::PositiveHalfLine, |f| f * f).unwrap();
                Snapshot::from(&c)
            })
            .collect();
        emit_plot_data(&mut sink, "curve", &snaps, &MetricSeries::default()).unwrap();
        let mut names: Vec<String> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        assert_eq!(
            names,
            [
                "curve_0000.csv",
                "curve_0001.csv",
                "curve_0002.csv",
                "index.json",
                "metrics.csv"
            ]
        );
        let first = std::fs::read_to_string(dir.path().join("curve_0001.csv")).unwrap();
        assert!(first.starts_with("coordinate,value\n0.0,0.0\n0.25,0.0625\n"));
        let index: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("index.json")).unwrap()).unwrap();
        assert_eq!(index["files"].as_array().unwrap().len(), 4);
        assert_eq!(index["files"][2]["time"], 2.0);
    }

    #[test]
    fn unwritable_directory_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let e = OutputSink::new(&blocker.join("sub"), OutputFormat::Csv).unwrap_err();
        assert!(e.is_numerical());
    }
}
