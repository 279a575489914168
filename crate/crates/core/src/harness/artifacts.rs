//! Results JSON and the plot-ready accuracy grid.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::experiment::{ExperimentOutcome, StageSeconds};
use super::metrics::AccuracyMatrix;
use super::split::TaskSplit;
use super::timing::mean_seconds;

/// Keys of [`ResultsDocument`] that hold wall-clock measurements.
pub const TIMING_FIELDS: [&str; 3] = ["tt", "tt_mean", "stage_seconds"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultsDocument {
    pub config: serde_json::Value,
    pub acc: f64,
    pub bwt: f64,
    pub bwt_defined: bool,
    pub tt: Vec<f64>,
    pub tt_mean: f64,
    pub extra_memory_elements: usize,
    #[serde(rename = "A")]
    pub a: Vec<f64>,
    pub split: TaskSplit,
    pub stage_seconds: StageSeconds,
}

impl ResultsDocument {
    pub fn new(config: serde_json::Value, outcome: &ExperimentOutcome, split: &TaskSplit) -> Self {
        let tt = outcome.measure_tt().to_vec();
        Self {
            config,
            acc: outcome.report.acc,
            bwt: outcome.report.bwt.value,
            bwt_defined: outcome.report.bwt.defined,
            tt_mean: mean_seconds(&tt),
            tt,
            extra_memory_elements: outcome.report.extra_memory_elements,
            a: outcome.accuracy.accuracies().to_vec(),
            split: split.clone(),
            stage_seconds: outcome.stage_seconds,
        }
    }

    /// JSON value with the timing fields removed, for determinism checks.
    pub fn without_timing(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("results serialize");
        if let Some(map) = v.as_object_mut() {
            for key in TIMING_FIELDS {
                map.remove(key);
            }
        }
        v
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("results serialize");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: e.line() as u64,
            message: e.to_string(),
        })
    }
}

/// Header `step,0,1,..`, then an `n` row of test-set sizes, then one row per
/// step with empty cells above the diagonal.
pub fn write_grid_csv(acc: &AccuracyMatrix, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let tasks = acc.test_counts().len();
    let mut text = String::from("step");
    for i in 0..tasks {
        text.push_str(&format!(",{i}"));
    }
    text.push_str("\nn");
    for n in acc.test_counts() {
        text.push_str(&format!(",{n}"));
    }
    text.push('\n');
    for (t, row) in acc.grid().iter().enumerate() {
        text.push_str(&t.to_string());
        for i in 0..tasks {
            text.push(',');
            if let Some(v) = row.get(i) {
                text.push_str(&format!("{v:?}"));
            }
        }
        text.push('\n');
    }
    w.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a grid written by [`write_grid_csv`]. Without the `n` row every
/// task is weighted equally.
pub fn read_grid_csv(path: &Path) -> Result<AccuracyMatrix> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| Error::io(path, e))?;
    parse_grid(&text)
}

fn parse_err(line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

pub(crate) fn parse_grid(text: &str) -> Result<AccuracyMatrix> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut records = r.records().peekable();
    let header = match records.next() {
        Some(h) => h.map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), e.to_string()))?,
        None => return Err(parse_err(1, "empty grid")),
    };
    if header.get(0) != Some("step") || header.len() < 2 {
        return Err(parse_err(1, "header must be `step,0,1,...`"));
    }
    for (i, name) in header.iter().skip(1).enumerate() {
        if name != i.to_string() {
            return Err(parse_err(1, format!("expected task column `{i}`, found `{name}`")));
        }
    }
    let tasks = header.len() - 1;
    let mut counts = None;
    let mut grid = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != tasks + 1 {
            return Err(parse_err(line, format!("expected {} fields, found {}", tasks + 1, rec.len())));
        }
        if rec.get(0) == Some("n") {
            if counts.is_some() || !grid.is_empty() {
                return Err(parse_err(line, "the `n` row must come right after the header"));
            }
            let n = rec
                .iter()
                .skip(1)
                .map(|c| c.trim().parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| parse_err(line, format!("bad test count: {e}")))?;
            counts = Some(n);
            continue;
        }
        let t = grid.len();
        if rec.get(0).map(str::trim) != Some(t.to_string().as_str()) {
            return Err(parse_err(line, format!("expected step {t}")));
        }
        let mut row = Vec::with_capacity(t + 1);
        for (i, cell) in rec.iter().skip(1).enumerate() {
            let cell = cell.trim();
            if i <= t {
                let v: f64 = cell
                    .parse()
                    .map_err(|_| parse_err(line, format!("bad accuracy `{cell}` in column {i}")))?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(parse_err(line, format!("accuracy {v} outside [0, 1]")));
                }
                row.push(v);
            } else if !cell.is_empty() {
                return Err(parse_err(line, format!("cell above the diagonal in column {i}")));
            }
        }
        grid.push(row);
    }
    if grid.len() != tasks {
        return Err(parse_err(0, format!("{} step rows for {tasks} tasks", grid.len())));
    }
    AccuracyMatrix::from_grid(grid, counts.unwrap_or_else(|| vec![1; tasks]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_grid_without_counts() {
        let m = parse_grid("step,0,1,2\n0,1.0,,\n1,0.8,0.8,\n2,0.6,0.6,0.6\n").unwrap();
        assert_eq!(m.accuracies(), &[1.0, 0.8, 0.6]);
        assert!((m.acc().unwrap() - 0.8).abs() <= 2.0 * f64::EPSILON);
        assert!((m.bwt().value + 0.1).abs() <= 2.0 * f64::EPSILON);
    }

    #[test]
    fn round_trip_keeps_weights() {
        let correct = vec![vec![9], vec![7, 3], vec![5, 2, 1]];
        let m = AccuracyMatrix::from_correct_counts(&correct, &[10, 4, 3]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("grid.csv");
        write_grid_csv(&m, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("step,0,1,2\nn,10,4,3\n0,0.9,,\n"));
        let back = read_grid_csv(&path).unwrap();
        assert_eq!(back.grid(), m.grid());
        for (x, y) in back.accuracies().iter().zip(m.accuracies()) {
            assert!((x - y).abs() <= 1e-15);
        }
    }

    #[test]
    fn malformed_grids() {
        for bad in [
            "",
            "step\n",
            "label,0\n0,1.0\n",
            "step,0,1\n0,1.0,\n",
            "step,0,1\n0,1.0,0.5\n1,0.5,0.5\n",
            "step,0,1\n0,x,\n1,0.5,0.5\n",
            "step,0,1\n0,1.5,\n1,0.5,0.5\n",
            "step,0,1\n1,1.0,\n0,0.5,0.5\n",
            "step,0,1\n0,1.0\n1,0.5,0.5\n",
            "step,0,1\n0,1.0,\nn,1,1\n1,0.5,0.5\n",
        ] {
            assert!(matches!(parse_grid(bad), Err(Error::Parse { .. })), "{bad:?}");
        }
    }
}
