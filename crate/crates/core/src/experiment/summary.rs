use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::growth::EpochRecord;

use super::metrics::{
    read_events, read_metrics, RunInfo, RunStatus, EVENTS_FILE, METRICS_FILE, RUN_INFO_FILE,
};

/// Mean and sample standard deviation (n - 1 denominator; 0 for a single value).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub stddev: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let stddev = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Some(Self { mean, stddev, n })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunError {
    pub path: PathBuf,
    pub message: String,
}

/// A run directory that has been read successfully.
#[derive(Debug, Clone)]
pub struct LoadedRun {
    pub dir: PathBuf,
    pub info: RunInfo,
    pub records: Vec<EpochRecord>,
    pub growth_events: usize,
}

impl LoadedRun {
    pub fn load(dir: &Path) -> Result<Self> {
        let info = RunInfo::read(&dir.join(RUN_INFO_FILE))?;
        let (records, growth_events) = if info.status == RunStatus::Completed {
            (
                read_metrics(&dir.join(METRICS_FILE))?,
                read_events(&dir.join(EVENTS_FILE))?.len(),
            )
        } else {
            (Vec::new(), 0)
        };
        Ok(Self {
            dir: dir.to_path_buf(),
            info,
            records,
            growth_events,
        })
    }

    pub fn is_complete(&self) -> bool {
        self.info.status == RunStatus::Completed && !self.records.is_empty()
    }

    fn last(&self, f: impl Fn(&EpochRecord) -> Option<f64>) -> Option<f64> {
        self.records.iter().rev().find_map(f)
    }

    pub fn final_train_mse(&self) -> Option<f64> {
        self.last(|r| Some(r.train_mse))
    }

    pub fn final_holdout_mse(&self) -> Option<f64> {
        self.last(|r| r.holdout_mse)
    }

    pub fn final_score(&self) -> Option<f64> {
        self.last(|r| r.score)
    }

    pub fn initial_widths(&self) -> Vec<usize> {
        self.records
            .first()
            .map(|r| r.widths.clone())
            .unwrap_or_default()
    }

    pub fn final_widths(&self) -> Vec<usize> {
        self.records
            .last()
            .map(|r| r.widths.clone())
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Keyed by metric name: `latent_size`, `width_k`, `train_mse`, `holdout_mse`, `score`.
    pub metrics: BTreeMap<String, Stat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: String,
    /// All runs found for this condition.
    pub runs: usize,
    pub completed: usize,
    /// Directories of runs that failed or have no metrics; excluded from every aggregate.
    pub incomplete: Vec<PathBuf>,
    pub final_train_mse: Option<Stat>,
    pub final_holdout_mse: Option<Stat>,
    pub final_score: Option<Stat>,
    /// Sum of hidden widths.
    pub initial_latent_size: Option<Stat>,
    pub final_latent_size: Option<Stat>,
    /// Per hidden layer.
    pub final_widths: Vec<Stat>,
    pub growth_events: usize,
    pub runs_with_growth: usize,
    pub series: Vec<EpochStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub conditions: Vec<ConditionSummary>,
    /// Directories that could not be read at all.
    pub errors: Vec<RunError>,
}

impl RunSummary {
    pub fn condition(&self, name: &str) -> Option<&ConditionSummary> {
        self.conditions.iter().find(|c| c.condition == name)
    }

    pub fn total_runs(&self) -> usize {
        self.conditions.iter().map(|c| c.runs).sum::<usize>() + self.errors.len()
    }
}

fn summarize_condition(condition: String, runs: &[LoadedRun]) -> ConditionSummary {
    let done: Vec<&LoadedRun> = runs.iter().filter(|r| r.is_complete()).collect();
    let incomplete = runs
        .iter()
        .filter(|r| !r.is_complete())
        .map(|r| r.dir.clone())
        .collect();
    let collect = |f: &dyn Fn(&LoadedRun) -> Option<f64>| -> Option<Stat> {
        Stat::of(&done.iter().filter_map(|r| f(r)).collect::<Vec<_>>())
    };
    let layers = done
        .iter()
        .map(|r| r.final_widths().len())
        .max()
        .unwrap_or(0);
    let final_widths = (0..layers)
        .filter_map(|k| {
            Stat::of(
                &done
                    .iter()
                    .filter_map(|r| r.final_widths().get(k).map(|&w| w as f64))
                    .collect::<Vec<_>>(),
            )
        })
        .collect();

    let mut per_epoch: BTreeMap<usize, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    for r in &done {
        for rec in &r.records {
            let m = per_epoch.entry(rec.epoch).or_default();
            let mut push = |k: String, v: f64| m.entry(k).or_default().push(v);
            push(
                "latent_size".into(),
                rec.widths.iter().sum::<usize>() as f64,
            );
            for (k, w) in rec.widths.iter().enumerate() {
                push(format!("width_{}", k + 1), *w as f64);
            }
            push("train_mse".into(), rec.train_mse);
            if let Some(v) = rec.holdout_mse {
                push("holdout_mse".into(), v);
            }
            if let Some(v) = rec.score {
                push("score".into(), v);
            }
        }
    }
    let series = per_epoch
        .into_iter()
        .map(|(epoch, m)| EpochStats {
            epoch,
            metrics: m
                .into_iter()
                .filter_map(|(k, v)| Stat::of(&v).map(|s| (k, s)))
                .collect(),
        })
        .collect();

    ConditionSummary {
        condition,
        runs: runs.len(),
        completed: done.len(),
        incomplete,
        final_train_mse: collect(&|r| r.final_train_mse()),
        final_holdout_mse: collect(&|r| r.final_holdout_mse()),
        final_score: collect(&|r| r.final_score()),
        initial_latent_size: collect(&|r| Some(r.initial_widths().iter().sum::<usize>() as f64)),
        final_latent_size: collect(&|r| Some(r.final_widths().iter().sum::<usize>() as f64)),
        final_widths,
        growth_events: done.iter().map(|r| r.growth_events).sum(),
        runs_with_growth: done.iter().filter(|r| r.growth_events > 0).count(),
        series,
    }
}

/// Reads every run directory; unreadable ones are reported in `errors` and
/// the rest are still aggregated, grouped by condition.
pub fn summarize<P: AsRef<Path>>(run_dirs: &[P]) -> RunSummary {
    let mut groups: BTreeMap<String, Vec<LoadedRun>> = BTreeMap::new();
    let mut errors = Vec::new();
    for dir in run_dirs {
        let dir = dir.as_ref();
        match LoadedRun::load(dir) {
            Ok(run) => groups
                .entry(run.info.condition.clone())
                .or_default()
                .push(run),
            Err(e) => errors.push(RunError {
                path: dir.to_path_buf(),
                message: e.to_string(),
            }),
        }
    }
    RunSummary {
        conditions: groups
            .into_iter()
            .map(|(c, runs)| summarize_condition(c, &runs))
            .collect(),
        errors,
    }
}

/// Run directories (those holding a `run.json`) anywhere below `root`, sorted.
pub fn find_run_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(root).to_path_buf();
            Error::io(path, e.into())
        })?;
        if entry.file_type().is_file() && entry.file_name() == RUN_INFO_FILE {
            if let Some(dir) = entry.path().parent() {
                out.push(dir.to_path_buf());
            }
        }
    }
    Ok(out)
}

fn cells(s: Option<Stat>) -> [String; 2] {
    match s {
        Some(s) => [s.mean.to_string(), s.stddev.to_string()],
        None => [String::new(), String::new()],
    }
}

/// One row per condition.
pub fn write_summary_csv<W: std::io::Write>(summary: &RunSummary, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "condition",
        "runs",
        "completed",
        "incomplete",
        "final_train_mse_mean",
        "final_train_mse_stddev",
        "final_holdout_mse_mean",
        "final_holdout_mse_stddev",
        "final_score_mean",
        "final_score_stddev",
        "final_latent_size_mean",
        "final_latent_size_stddev",
        "growth_events",
        "runs_with_growth",
    ])?;
    for c in &summary.conditions {
        let mut row = vec![
            c.condition.clone(),
            c.runs.to_string(),
            c.completed.to_string(),
            c.incomplete.len().to_string(),
        ];
        for s in [
            c.final_train_mse,
            c.final_holdout_mse,
            c.final_score,
            c.final_latent_size,
        ] {
            row.extend(cells(s));
        }
        row.push(c.growth_events.to_string());
        row.push(c.runs_with_growth.to_string());
        w.write_record(row)?;
    }
    w.flush().map_err(|e| Error::io("<summary>", e))
}

pub fn write_summary_json(summary: &RunSummary, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(summary)? + "\n";
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Long-format per-epoch series: `condition,epoch,metric,mean,stddev,n`.
pub fn emit_plot_data<W: std::io::Write>(summary: &RunSummary, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["condition", "epoch", "metric", "mean", "stddev", "n"])?;
    for c in &summary.conditions {
        for e in &c.series {
            for (metric, s) in &e.metrics {
                w.write_record([
                    c.condition.clone(),
                    e.epoch.to_string(),
                    metric.clone(),
                    s.mean.to_string(),
                    s.stddev.to_string(),
                    s.n.to_string(),
                ])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("<plot data>", e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::metrics::{write_events, write_metrics};

    fn run_dir(root: &Path, name: &str, condition: &str, rows: &str, status: RunStatus) -> PathBuf {
        let dir = root.join(name);
        std::fs::create_dir_all(&dir).unwrap();
        RunInfo {
            task: "bc".into(),
            condition: condition.into(),
            seed: 0,
            status,
            error: None,
            metrics_schema: 1,
            version: "0".into(),
            git_revision: None,
        }
        .write(&dir.join(RUN_INFO_FILE))
        .unwrap();
        std::fs::write(
            dir.join(METRICS_FILE),
            format!("epoch,width_1,train_mse,holdout_mse,score,grew,alpha,beta\n{rows}"),
        )
        .unwrap();
        write_events(&dir.join(EVENTS_FILE), &[]).unwrap();
        dir
    }

    #[test]
    fn sample_stddev() {
        assert_eq!(Stat::of(&[]), None);
        assert_eq!(Stat::of(&[4.0]).unwrap().stddev, 0.0);
        let s = Stat::of(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.mean, 2.5);
        assert!((s.stddev - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn single_run_has_zero_stddev() {
        let tmp = tempfile::tempdir().unwrap();
        let d = run_dir(
            tmp.path(),
            "a",
            "small_fixed",
            "0,4,0.5,0.6,0.1,0,,\n1,4,0.4,0.5,0.2,0,,\n",
            RunStatus::Completed,
        );
        let s = summarize(&[d]);
        let c = s.condition("small_fixed").unwrap();
        assert_eq!(c.completed, 1);
        for e in &c.series {
            assert!(e.metrics.values().all(|m| m.stddev == 0.0));
        }
        let mut buf = Vec::new();
        emit_plot_data(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        for line in text.lines().skip(1) {
            assert_eq!(line.split(',').nth(4), Some("0"));
        }
    }

    #[test]
    fn two_runs_hand_means() {
        let tmp = tempfile::tempdir().unwrap();
        let a = run_dir(
            tmp.path(),
            "a",
            "small_growing",
            "0,4,0.5,0.25,0.5,0,,\n1,6,0.25,0.125,0.75,1,0.3,0.2\n",
            RunStatus::Completed,
        );
        let b = run_dir(
            tmp.path(),
            "b",
            "small_growing",
            "0,4,0.75,0.5,0.25,0,,\n1,4,0.5,0.25,0.25,0,,\n",
            RunStatus::Completed,
        );
        let s = summarize(&[a, b]);
        let c = s.condition("small_growing").unwrap();
        assert_eq!(c.final_train_mse.unwrap().mean, 0.375);
        assert_eq!(c.final_holdout_mse.unwrap().mean, 0.1875);
        assert_eq!(c.final_score.unwrap().mean, 0.5);
        assert_eq!(c.final_latent_size.unwrap().mean, 5.0);
        assert!((c.final_latent_size.unwrap().stddev - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(c.series[0].metrics["train_mse"].mean, 0.625);
        assert_eq!(c.series[1].metrics["width_1"].mean, 5.0);
    }

    #[test]
    fn bad_files_reported_and_failed_runs_counted() {
        let tmp = tempfile::tempdir().unwrap();
        let good = run_dir(
            tmp.path(),
            "good",
            "large_fixed",
            "0,8,0.5,,,0,,\n",
            RunStatus::Completed,
        );
        let bad = run_dir(
            tmp.path(),
            "bad",
            "large_fixed",
            "0,8,zzz,,,0,,\n",
            RunStatus::Completed,
        );
        let failed = run_dir(tmp.path(), "failed", "large_fixed", "", RunStatus::Failed);
        let missing = tmp.path().join("nope");
        let s = summarize(&[good, bad.clone(), failed.clone(), missing]);
        assert_eq!(s.errors.len(), 2);
        assert_eq!(s.errors[0].path, bad);
        let c = s.condition("large_fixed").unwrap();
        assert_eq!((c.runs, c.completed), (2, 1));
        assert_eq!(c.incomplete, vec![failed]);
        assert_eq!(s.total_runs(), 4);
    }

    #[test]
    fn run_dirs_found_recursively() {
        let tmp = tempfile::tempdir().unwrap();
        let recs = [EpochRecord {
            epoch: 0,
            widths: vec![2],
            train_mse: 1.0,
            holdout_mse: None,
            score: None,
            grew: false,
            alpha: None,
            beta: None,
            alpha_prev: None,
        }];
        for p in ["x/seed_1", "x/seed_0", "y/seed_0"] {
            let d = run_dir(tmp.path(), p, "small_fixed", "", RunStatus::Completed);
            write_metrics(&d.join(METRICS_FILE), 1, &recs).unwrap();
        }
        let found = find_run_dirs(tmp.path()).unwrap();
        assert_eq!(found.len(), 3);
        assert!(found[0].ends_with("x/seed_0"));
    }
}
