use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sann::experiment::{
    emit_plot_data, find_run_dirs, run_experiment, summarize, write_summary_csv, ExperimentConfig,
    RunSummary,
};
use sann::Error;

const EXIT_RUN_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;

/// Growing-MLP experiments: run condition matrices, summarize runs, export plot data.
#[derive(Debug, Parser)]
#[command(name = "sann", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every (condition, seed) cell of an experiment config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Replace the config's seed list (repeatable).
        #[arg(long)]
        seed: Vec<u64>,
        /// Maximum number of cells run in parallel.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Output directory (overrides `output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate run directories (or roots containing them) per condition.
    Summarize {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// Write the summary here (`.json` for JSON, CSV otherwise) instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Long-format per-epoch mean/stddev series for plotting.
    PlotData {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn fail(code: u8, e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(code)
}

fn expand(dirs: &[PathBuf]) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for d in dirs {
        match find_run_dirs(d) {
            Ok(found) if !found.is_empty() => out.extend(found),
            // keep unreadable or empty paths so the summary reports them
            _ => out.push(d.clone()),
        }
    }
    out
}

fn report_errors(summary: &RunSummary) -> bool {
    for e in &summary.errors {
        eprintln!("warning: {}: {}", e.path.display(), e.message);
    }
    for c in &summary.conditions {
        for d in &c.incomplete {
            eprintln!(
                "warning: {}: incomplete run excluded from {}",
                d.display(),
                c.condition
            );
        }
    }
    summary.errors.is_empty()
}

fn run(config: &Path, seeds: Vec<u64>, jobs: usize, out: Option<PathBuf>) -> ExitCode {
    // an unreadable or unparsable config file is a config error
    let mut cfg = match ExperimentConfig::load(config) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    if !seeds.is_empty() {
        cfg.seeds = seeds;
    }
    if let Some(out) = out {
        cfg.output_dir = out;
    }
    match run_experiment(&cfg, jobs) {
        Ok(rep) => {
            for c in &rep.summary.conditions {
                println!("{}: {}/{} runs completed", c.condition, c.completed, c.runs);
            }
            println!("results in {}", cfg.output_dir.display());
            if rep.succeeded() {
                ExitCode::SUCCESS
            } else {
                for (dir, err) in &rep.failures {
                    eprintln!("run failed: {}: {err}", dir.display());
                }
                ExitCode::from(EXIT_RUN_FAILURE)
            }
        }
        Err(e @ Error::Config(_)) => fail(EXIT_CONFIG, e),
        Err(e) => fail(EXIT_RUN_FAILURE, e),
    }
}

fn write_or_print(
    out: Option<&Path>,
    write: impl FnOnce(&mut dyn std::io::Write) -> sann::Result<()>,
) -> sann::Result<()> {
    match out {
        Some(p) => {
            let f = std::fs::File::create(p).map_err(|e| Error::Io {
                path: p.to_path_buf(),
                source: e,
            })?;
            write(&mut std::io::BufWriter::new(f))
        }
        None => write(&mut std::io::stdout().lock()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            seed,
            jobs,
            out,
        } => run(&config, seed, jobs, out),
        Command::Summarize { dirs, out } => {
            let summary = summarize(&expand(&dirs));
            let clean = report_errors(&summary);
            let res = match out.as_deref() {
                Some(p) if p.extension().is_some_and(|e| e == "json") => {
                    sann::experiment::write_summary_json(&summary, p)
                }
                other => write_or_print(other, |w| write_summary_csv(&summary, w)),
            };
            match res {
                Err(e) => fail(EXIT_RUN_FAILURE, e),
                Ok(()) if !clean => ExitCode::from(EXIT_RUN_FAILURE),
                Ok(()) => ExitCode::SUCCESS,
            }
        }
        Command::PlotData { dirs, out } => {
            let summary = summarize(&expand(&dirs));
            let clean = report_errors(&summary);
            match write_or_print(out.as_deref(), |w| emit_plot_data(&summary, w)) {
                Err(e) => fail(EXIT_RUN_FAILURE, e),
                Ok(()) if !clean => ExitCode::from(EXIT_RUN_FAILURE),
                Ok(()) => ExitCode::SUCCESS,
            }
        }
    }
}
