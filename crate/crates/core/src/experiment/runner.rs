use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::data::{load_cifar_files, make_pair_dataset, CifarImage, Dataset};
use crate::error::{Error, Result};
use crate::growth::{AdaptiveNet, EpochRecord, GrowthEvent};
use crate::learners::{behavior_clone_from_expert, dagger, ppo_train, GaussianPolicy};
use crate::linalg::Rng;
use crate::nn::{MlpConfig, MlpNetwork};
use crate::sim::{Environment, NavExpert, NavWorld, PointMassEnv};

use super::config::{Condition, ExperimentConfig, Task};
use super::metrics::{
    build_version, git_revision, write_events, write_metrics, RunInfo, RunStatus,
    CONFIG_SNAPSHOT_FILE, EVENTS_FILE, METRICS_FILE, METRICS_SCHEMA_VERSION, RUN_INFO_FILE,
};
use super::summary::{
    emit_plot_data, summarize, write_summary_csv, write_summary_json, RunSummary,
};

/// Output of one (condition, seed) cell.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub records: Vec<EpochRecord>,
    pub events: Vec<GrowthEvent>,
    /// Final networks, saved as `<name>.json` checkpoints.
    pub networks: Vec<(&'static str, MlpNetwork<f64>)>,
}

/// Fraction of rows whose thresholded single output matches the 0/1 target.
pub fn binary_accuracy(net: &MlpNetwork<f64>, data: &Dataset<f64>) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::invalid("accuracy of an empty dataset"));
    }
    let pred = net.predict(data.features())?;
    let hits = pred
        .as_slice()
        .iter()
        .zip(data.targets().as_slice())
        .filter(|(p, t)| (**p >= 0.5) == (**t >= 0.5))
        .count();
    Ok(hits as f64 / data.len() as f64)
}

fn model(
    cfg: &ExperimentConfig,
    condition: Condition,
    input: usize,
    output: usize,
    rng: &mut Rng,
) -> Result<AdaptiveNet<f64>> {
    let n = &cfg.network;
    let mc = MlpConfig::new(input, &n.widths(condition), output)
        .hidden_activation(n.activation)
        .dropout(n.dropout);
    let net = MlpNetwork::init(&mc, rng)?;
    let growth = condition.is_growing().then(|| cfg.growth.clone());
    AdaptiveNet::new(net, cfg.optimizer, growth, n.batch_size, rng)
}

/// Runs one cell. The first draw from the seed's stream fixes the data
/// (split, trajectory seeds) so every condition sees the same data for a seed.
pub fn run_cell(
    cfg: &ExperimentConfig,
    condition: Condition,
    seed: u64,
    images: Option<&[CifarImage]>,
) -> Result<CellResult> {
    let mut rng = Rng::new(seed);
    let mut data_rng = rng.fork();
    match cfg.task {
        Task::CifarPair => {
            let images = images.ok_or_else(|| Error::invalid("cifar_pair needs loaded images"))?;
            let c = &cfg.cifar;
            let (train, holdout) = make_pair_dataset(
                images,
                c.class_a,
                c.class_b,
                c.holdout_fraction,
                c.bins,
                &mut data_rng,
            )?;
            let mut m = model(cfg, condition, train.input_width(), 1, &mut rng)?;
            let mut records = Vec::with_capacity(cfg.epochs);
            for _ in 0..cfg.epochs {
                let mut rec = m.epoch(&train, &mut rng)?;
                rec.holdout_mse = Some(m.evaluate(&holdout)?);
                rec.score = Some(binary_accuracy(m.net(), &holdout)?);
                records.push(rec);
            }
            Ok(CellResult {
                records,
                events: m.history().to_vec(),
                networks: vec![("model", m.net().clone())],
            })
        }
        Task::Bc => {
            let world = NavWorld::new(cfg.nav.clone());
            let mut m = model(
                cfg,
                condition,
                world.observation_dim(),
                world.action_dim(),
                &mut rng,
            )?;
            let bc = crate::learners::BcConfig {
                epochs: cfg.epochs,
                ..cfg.bc.clone()
            };
            let records = behavior_clone_from_expert(
                &mut m,
                &world,
                &NavExpert::default(),
                &bc,
                &mut data_rng,
            )?;
            Ok(CellResult {
                records,
                events: m.history().to_vec(),
                networks: vec![("model", m.net().clone())],
            })
        }
        Task::Dagger => {
            let world = NavWorld::new(cfg.nav.clone());
            let mut m = model(
                cfg,
                condition,
                world.observation_dim(),
                world.action_dim(),
                &mut rng,
            )?;
            let out = dagger(
                &mut m,
                &world,
                &NavExpert::default(),
                &cfg.dagger,
                &mut data_rng,
            )?;
            Ok(CellResult {
                records: out.records,
                events: m.history().to_vec(),
                networks: vec![("model", m.net().clone())],
            })
        }
        Task::Ppo => {
            let env = PointMassEnv::new(cfg.point_mass.clone());
            let p = &cfg.ppo;
            let mut policy = GaussianPolicy::new(
                env.observation_dim(),
                env.action_dim(),
                &p.policy_widths,
                p.initial_log_std,
                p.policy_optimizer,
                &mut rng,
            )?;
            let mut value = model(cfg, condition, env.observation_dim(), 1, &mut rng)?;
            let out = ppo_train(&mut policy, &mut value, &env, p, &mut data_rng)?;
            if out.policy_widths.iter().any(|w| *w != p.policy_widths) {
                return Err(Error::contract("policy network changed shape"));
            }
            Ok(CellResult {
                records: out.records,
                events: value.history().to_vec(),
                networks: vec![
                    ("value", value.net().clone()),
                    ("policy", policy.net().clone()),
                ],
            })
        }
    }
}

pub fn task_name(task: Task) -> &'static str {
    match task {
        Task::CifarPair => "cifar_pair",
        Task::Bc => "bc",
        Task::Dagger => "dagger",
        Task::Ppo => "ppo",
    }
}

pub fn run_dir(root: &Path, condition: Condition, seed: u64) -> PathBuf {
    root.join(condition.name()).join(format!("seed_{seed}"))
}

/// Runs a cell and writes its directory. A failing run still gets a
/// `run.json` with the error; the error is also returned.
pub fn run_and_record(
    cfg: &ExperimentConfig,
    condition: Condition,
    seed: u64,
    images: Option<&[CifarImage]>,
    dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for f in [METRICS_FILE, EVENTS_FILE] {
        let p = dir.join(f);
        if p.exists() {
            std::fs::remove_file(&p).map_err(|e| Error::io(&p, e))?;
        }
    }
    let snapshot = ExperimentConfig {
        seeds: vec![seed],
        conditions: vec![condition],
        ..cfg.clone()
    };
    let snap_path = dir.join(CONFIG_SNAPSHOT_FILE);
    std::fs::write(&snap_path, snapshot.to_toml_string()).map_err(|e| Error::io(&snap_path, e))?;

    let result = run_cell(cfg, condition, seed, images).and_then(|cell| {
        write_metrics(
            &dir.join(METRICS_FILE),
            cfg.network.hidden_layers,
            &cell.records,
        )?;
        write_events(&dir.join(EVENTS_FILE), &cell.events)?;
        for (name, net) in &cell.networks {
            net.save(dir.join(format!("{name}.json")))?;
        }
        Ok(())
    });
    let info = RunInfo {
        task: task_name(cfg.task).into(),
        condition: condition.name().into(),
        seed,
        status: if result.is_ok() {
            RunStatus::Completed
        } else {
            RunStatus::Failed
        },
        error: result.as_ref().err().map(|e| e.to_string()),
        metrics_schema: METRICS_SCHEMA_VERSION,
        version: build_version(),
        git_revision: git_revision(),
    };
    info.write(&dir.join(RUN_INFO_FILE))?;
    result
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub summary: RunSummary,
    pub run_dirs: Vec<PathBuf>,
    /// `(run directory, error)` for every failed cell.
    pub failures: Vec<(PathBuf, String)>,
}

impl RunReport {
    pub fn succeeded(&self) -> bool {
        self.failures.is_empty() && self.summary.errors.is_empty()
    }
}

pub fn load_images(cfg: &ExperimentConfig) -> Result<Vec<CifarImage>> {
    let dir = cfg
        .cifar
        .resolve_dir()
        .ok_or_else(|| Error::Config(vec!["no CIFAR-10 directory configured".into()]))?;
    load_cifar_files(&dir, &cfg.cifar.files)
}

/// Validates `cfg`, runs every (condition, seed) cell on at most `jobs`
/// threads, and writes per-run directories plus `summary.json`,
/// `summary.csv` and `plot_data.csv` under `cfg.output_dir`. Failed cells
/// are reported in the returned report, not as an error.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<RunReport> {
    cfg.validate()?;
    let root = &cfg.output_dir;
    std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let snap = root.join("experiment.toml");
    std::fs::write(&snap, cfg.to_toml_string()).map_err(|e| Error::io(&snap, e))?;

    let images = match cfg.task {
        Task::CifarPair => Some(load_images(cfg)?),
        _ => None,
    };
    let cells: Vec<(Condition, u64, PathBuf)> = cfg
        .conditions
        .iter()
        .flat_map(|&c| cfg.seeds.iter().map(move |&s| (c, s, run_dir(root, c, s))))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let results: Vec<Result<()>> = pool.install(|| {
        cells
            .par_iter()
            .map(|(c, s, dir)| run_and_record(cfg, *c, *s, images.as_deref(), dir))
            .collect()
    });
    let failures = cells
        .iter()
        .zip(&results)
        .filter_map(|((_, _, dir), r)| r.as_ref().err().map(|e| (dir.clone(), e.to_string())))
        .collect();
    let run_dirs: Vec<PathBuf> = cells.into_iter().map(|(_, _, d)| d).collect();
    let summary = summarize(&run_dirs);
    write_summary_json(&summary, &root.join("summary.json"))?;
    let csv_path = root.join("summary.csv");
    let file = std::fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    write_summary_csv(&summary, std::io::BufWriter::new(file))?;
    let plot = root.join("plot_data.csv");
    let file = std::fs::File::create(&plot).map_err(|e| Error::io(&plot, e))?;
    emit_plot_data(&summary, std::io::BufWriter::new(file))?;
    Ok(RunReport {
        summary,
        run_dirs,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::CIFAR_RECORD_LEN;
    use crate::experiment::metrics::read_metrics;

    fn smoke(task: Task, out: &Path) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::for_task(task);
        cfg.output_dir = out.to_path_buf();
        cfg.conditions = vec![Condition::SmallGrowing];
        cfg.seeds = vec![3];
        cfg.epochs = 2;
        cfg.bc.eval_seeds = vec![10_000];
        cfg.bc.train_trajectories = 2;
        cfg.bc.validation_trajectories = 1;
        cfg.dagger.iterations = 2;
        cfg.dagger.episodes_per_iter = 1;
        cfg.dagger.epochs_per_iter = 1;
        cfg.dagger.eval_seeds = vec![10_000];
        cfg.ppo.total_steps = 256;
        cfg.ppo.rollout_steps = 128;
        cfg.ppo.ppo_epochs = 1;
        cfg.ppo.value_epochs = 1;
        cfg.ppo.eval_seeds = vec![1];
        cfg
    }

    #[test]
    fn smoke_runs_write_two_rows() {
        for task in [Task::Bc, Task::Dagger, Task::Ppo] {
            let tmp = tempfile::tempdir().unwrap();
            let cfg = smoke(task, tmp.path());
            let rep = run_experiment(&cfg, 1).unwrap();
            assert!(rep.succeeded(), "{:?}", rep.failures);
            let dir = &rep.run_dirs[0];
            assert_eq!(read_metrics(&dir.join(METRICS_FILE)).unwrap().len(), 2);
            for f in [RUN_INFO_FILE, EVENTS_FILE, CONFIG_SNAPSHOT_FILE] {
                assert!(dir.join(f).is_file(), "{f}");
            }
            let snap = ExperimentConfig::load(&dir.join(CONFIG_SNAPSHOT_FILE)).unwrap();
            assert_eq!(snap.seeds, vec![3]);
            assert_eq!(rep.summary.conditions.len(), 1);
            assert!(tmp.path().join("plot_data.csv").is_file());
        }
    }

    fn synthetic_cifar(dir: &Path) {
        // class 4 images are dark, class 9 bright, with per-image jitter
        let mut rng = Rng::new(0);
        let mut bytes = Vec::new();
        for i in 0..200 {
            let label = if i % 2 == 0 { 4u8 } else { 9 };
            bytes.push(label);
            let base = if label == 4 { 60.0 } else { 170.0 };
            for _ in 0..CIFAR_RECORD_LEN - 1 {
                bytes.push((base + 40.0 * rng.normal()).clamp(0.0, 255.0) as u8);
            }
        }
        std::fs::write(dir.join("data_batch_1.bin"), bytes).unwrap();
    }

    #[test]
    fn cifar_pair_on_synthetic_batches_is_deterministic() {
        let tmp = tempfile::tempdir().unwrap();
        synthetic_cifar(tmp.path());
        let mut cfg = smoke(Task::CifarPair, &tmp.path().join("a"));
        cfg.cifar.data_dir = Some(tmp.path().to_path_buf());
        cfg.cifar.files = vec!["data_batch_1.bin".into()];
        cfg.conditions = vec![Condition::SmallFixed, Condition::SmallGrowing];
        cfg.epochs = 40;
        cfg.optimizer.learning_rate = 1e-2;
        let a = run_experiment(&cfg, 2).unwrap();
        assert!(a.succeeded(), "{:?}", a.failures);
        cfg.output_dir = tmp.path().join("b");
        let b = run_experiment(&cfg, 1).unwrap();
        for (x, y) in a.run_dirs.iter().zip(&b.run_dirs) {
            let fx = std::fs::read(x.join(METRICS_FILE)).unwrap();
            let fy = std::fs::read(y.join(METRICS_FILE)).unwrap();
            assert_eq!(fx, fy);
        }
        let acc = a
            .summary
            .condition("small_fixed")
            .unwrap()
            .final_score
            .unwrap()
            .mean;
        assert!(acc > 0.9, "accuracy {acc}");
    }

    #[test]
    fn invalid_config_is_rejected_before_running() {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg = smoke(Task::Bc, tmp.path());
        cfg.seeds.clear();
        assert!(matches!(run_experiment(&cfg, 1), Err(Error::Config(_))));
        assert!(!tmp.path().join("summary.json").exists());
    }
}
