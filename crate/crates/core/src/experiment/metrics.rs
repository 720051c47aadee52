//! Per-run artifacts.
//!
//! `metrics.csv` columns (schema version 1):
//!
//! ```text
//! epoch, width_1, ..., width_n, train_mse, holdout_mse, score, grew, alpha, beta
//! ```
//!
//! Missing values are empty fields; `grew` is `0` or `1`; floats use the
//! shortest representation that parses back to the same value.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::growth::{EpochRecord, GrowthEvent};

pub const METRICS_SCHEMA_VERSION: u32 = 1;
pub const METRICS_FILE: &str = "metrics.csv";
pub const EVENTS_FILE: &str = "growth_events.jsonl";
pub const RUN_INFO_FILE: &str = "run.json";
pub const CONFIG_SNAPSHOT_FILE: &str = "config.toml";

pub fn metrics_header(hidden_layers: usize) -> Vec<String> {
    let mut h = vec!["epoch".to_string()];
    h.extend((1..=hidden_layers).map(|i| format!("width_{i}")));
    h.extend(["train_mse", "holdout_mse", "score", "grew", "alpha", "beta"].map(String::from));
    h
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_metrics(path: &Path, hidden_layers: usize, records: &[EpochRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(metrics_header(hidden_layers))?;
    for r in records {
        if r.widths.len() != hidden_layers {
            return Err(Error::invalid(format!(
                "record for epoch {} has {} widths, header has {hidden_layers}",
                r.epoch,
                r.widths.len()
            )));
        }
        let mut row = vec![r.epoch.to_string()];
        row.extend(r.widths.iter().map(|w| w.to_string()));
        row.push(r.train_mse.to_string());
        row.push(opt(r.holdout_mse));
        row.push(opt(r.score));
        row.push(u8::from(r.grew).to_string());
        row.push(opt(r.alpha));
        row.push(opt(r.beta));
        w.write_record(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn parse_field<T: std::str::FromStr>(s: &str, line: usize, col: &str) -> Result<T> {
    s.trim().parse().map_err(|_| Error::Format {
        offset: line,
        message: format!("column {col}: cannot parse {s:?}"),
    })
}

fn parse_opt(s: &str, line: usize, col: &str) -> Result<Option<f64>> {
    if s.trim().is_empty() {
        Ok(None)
    } else {
        parse_field(s, line, col).map(Some)
    }
}

/// Reads a metrics CSV. `Format` errors carry the 1-based data row as offset.
pub fn read_metrics(path: &Path) -> Result<Vec<EpochRecord>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    let n = header.len().checked_sub(7).ok_or_else(|| Error::Format {
        offset: 0,
        message: format!("header has {} columns, need at least 7", header.len()),
    })?;
    if header != metrics_header(n) {
        return Err(Error::Format {
            offset: 0,
            message: format!("unexpected header {header:?}"),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 1;
        let f = |k: usize| rec.get(k).unwrap_or("");
        let grew: u8 = parse_field(f(n + 4), line, "grew")?;
        if grew > 1 {
            return Err(Error::Format {
                offset: line,
                message: format!("grew must be 0 or 1, got {grew}"),
            });
        }
        out.push(EpochRecord {
            epoch: parse_field(f(0), line, "epoch")?,
            widths: (1..=n)
                .map(|k| parse_field(f(k), line, &header[k]))
                .collect::<Result<_>>()?,
            train_mse: parse_field(f(n + 1), line, "train_mse")?,
            holdout_mse: parse_opt(f(n + 2), line, "holdout_mse")?,
            score: parse_opt(f(n + 3), line, "score")?,
            grew: grew == 1,
            alpha: parse_opt(f(n + 5), line, "alpha")?,
            beta: parse_opt(f(n + 6), line, "beta")?,
            alpha_prev: None,
        });
    }
    Ok(out)
}

pub fn write_events(path: &Path, events: &[GrowthEvent]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for e in events {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n").map_err(|err| Error::io(path, err))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_events(path: &Path) -> Result<Vec<GrowthEvent>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Failed,
}

/// `run.json`: what ran, how it ended, and which build produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub task: String,
    pub condition: String,
    pub seed: u64,
    pub status: RunStatus,
    pub error: Option<String>,
    pub metrics_schema: u32,
    pub version: String,
    pub git_revision: Option<String>,
}

impl RunInfo {
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn build_version() -> String {
    env!("CARGO_PKG_VERSION").to_string()
}

pub fn git_revision() -> Option<String> {
    option_env!("SANN_GIT_REVISION").map(String::from)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(epoch: usize, grew: bool) -> EpochRecord {
        EpochRecord {
            epoch,
            widths: vec![16, 16 + epoch],
            train_mse: 0.1 / (epoch + 1) as f64,
            holdout_mse: Some(1.0 / 3.0),
            score: if epoch.is_multiple_of(2) { Some(0.75) } else { None },
            grew,
            alpha: Some(0.2),
            beta: None,
            alpha_prev: None,
        }
    }

    #[test]
    fn frozen_header_and_row_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        write_metrics(&p, 2, &[rec(0, false), rec(1, true)]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "epoch,width_1,width_2,train_mse,holdout_mse,score,grew,alpha,beta"
        );
        assert_eq!(lines[1], "0,16,16,0.1,0.3333333333333333,0.75,0,0.2,");
        assert_eq!(lines[2], "1,16,17,0.05,0.3333333333333333,,1,0.2,");
    }

    #[test]
    fn metrics_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let recs: Vec<_> = (0..5).map(|e| rec(e, e == 3)).collect();
        write_metrics(&p, 2, &recs).unwrap();
        assert_eq!(read_metrics(&p).unwrap(), recs);
    }

    #[test]
    fn malformed_rows_are_located() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        std::fs::write(
            &p,
            "epoch,width_1,train_mse,holdout_mse,score,grew,alpha,beta\n0,4,0.5,,,0,,\n1,4,oops,,,0,,\n",
        )
        .unwrap();
        match read_metrics(&p) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 2),
            other => panic!("{other:?}"),
        }
        std::fs::write(&p, "epoch,w,train_mse\n").unwrap();
        assert!(matches!(
            read_metrics(&p),
            Err(Error::Format { offset: 0, .. })
        ));
    }

    #[test]
    fn events_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.jsonl");
        let ev = GrowthEvent {
            epoch: 3,
            alpha: 0.5,
            beta: 0.25,
            alpha_prev: 1e6,
            widths_before: vec![4],
            widths_after: vec![6],
        };
        write_events(&p, &[ev.clone(), ev.clone()]).unwrap();
        assert_eq!(read_events(&p).unwrap(), vec![ev.clone(), ev]);
    }
}
