use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{CIFAR_CLASSES, DEFAULT_BINS};
use crate::error::{Error, Result};
use crate::growth::GrowthConfig;
use crate::learners::{BcConfig, DaggerConfig, PpoConfig};
use crate::nn::{Activation, AdamConfig};
use crate::sim::{NavConfig, PointMassConfig};

/// Environment variable naming the directory that holds the CIFAR-10 binary batches.
pub const DATA_DIR_ENV: &str = "SANN_DATA_DIR";

/// Width cap applied to RL value nets when the config does not set one.
pub const RL_WIDTH_CAP: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    CifarPair,
    Bc,
    Dagger,
    Ppo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    SmallFixed,
    SmallGrowing,
    LargeFixed,
    LargeGrowing,
}

impl Condition {
    pub const ALL: [Condition; 4] = [
        Condition::SmallFixed,
        Condition::SmallGrowing,
        Condition::LargeFixed,
        Condition::LargeGrowing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::SmallFixed => "small_fixed",
            Self::SmallGrowing => "small_growing",
            Self::LargeFixed => "large_fixed",
            Self::LargeGrowing => "large_growing",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }

    pub fn is_growing(self) -> bool {
        matches!(self, Self::SmallGrowing | Self::LargeGrowing)
    }

    pub fn is_large(self) -> bool {
        matches!(self, Self::LargeFixed | Self::LargeGrowing)
    }
}

/// Widths and training settings of the network under study (for PPO: the value net).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    pub small_width: usize,
    pub large_width: usize,
    pub hidden_layers: usize,
    pub activation: Activation,
    pub dropout: f64,
    pub batch_size: usize,
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self {
            small_width: 16,
            large_width: 64,
            hidden_layers: 2,
            activation: Activation::Relu,
            dropout: 0.0,
            batch_size: 64,
        }
    }
}

impl NetworkSection {
    pub fn widths(&self, condition: Condition) -> Vec<usize> {
        let w = if condition.is_large() {
            self.large_width
        } else {
            self.small_width
        };
        vec![w; self.hidden_layers]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CifarSection {
    /// Directory with the binary batches; falls back to `$SANN_DATA_DIR`.
    pub data_dir: Option<PathBuf>,
    pub files: Vec<String>,
    pub class_a: u8,
    pub class_b: u8,
    pub bins: usize,
    pub holdout_fraction: f64,
}

impl Default for CifarSection {
    fn default() -> Self {
        Self {
            data_dir: None,
            files: (1..=5).map(|i| format!("data_batch_{i}.bin")).collect(),
            class_a: 4,
            class_b: 9,
            bins: DEFAULT_BINS,
            holdout_fraction: 0.2,
        }
    }
}

impl CifarSection {
    /// The configured directory, or the environment fallback.
    pub fn resolve_dir(&self) -> Option<PathBuf> {
        self.data_dir
            .clone()
            .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
    }
}

/// One experiment: a task, the conditions to compare and the seeds to run each on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub task: Task,
    pub conditions: Vec<Condition>,
    pub seeds: Vec<u64>,
    /// Training epochs for `cifar_pair` and `bc` (DAgger and PPO use their own sections).
    pub epochs: usize,
    pub output_dir: PathBuf,
    pub network: NetworkSection,
    pub optimizer: AdamConfig,
    pub growth: GrowthConfig,
    pub cifar: CifarSection,
    pub bc: BcConfig,
    pub dagger: DaggerConfig,
    pub ppo: PpoConfig,
    pub nav: NavConfig,
    pub point_mass: PointMassConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            task: Task::CifarPair,
            conditions: Condition::ALL.to_vec(),
            seeds: (0..10).collect(),
            epochs: 100,
            output_dir: PathBuf::from("runs"),
            network: NetworkSection::default(),
            optimizer: AdamConfig::default(),
            growth: GrowthConfig::default(),
            cifar: CifarSection::default(),
            bc: BcConfig::default(),
            dagger: DaggerConfig::default(),
            ppo: PpoConfig::default(),
            nav: NavConfig::default(),
            point_mass: PointMassConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Defaults for `task`. PPO compares tanh value nets under the lower RL
    /// width cap, starting the small one at width 4 and giving the residual
    /// as many passes per update as the value net gets. DAgger starts its
    /// small policy at width 4. In both cases the small net is then
    /// capacity-limited on its environment.
    pub fn for_task(task: Task) -> Self {
        let mut cfg = Self {
            task,
            ..Default::default()
        };
        match task {
            Task::Ppo => {
                cfg.seeds = (0..5).collect();
                cfg.network.activation = Activation::Tanh;
                cfg.growth.width_cap = RL_WIDTH_CAP;
                cfg.growth.residual_epochs = cfg.ppo.value_epochs;
                cfg.network.small_width = 4;
            }
            Task::Dagger => {
                cfg.network.small_width = 4;
                cfg.optimizer.learning_rate = 3e-3;
                cfg.growth.gamma = 0.05;
            }
            Task::CifarPair | Task::Bc => {}
        }
        cfg
    }

    /// Parses TOML. Keys left out take the defaults of the file's task.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let value: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(vec![e.to_string()]))?;
        let task = match value.get("task") {
            Some(t) => t
                .clone()
                .try_into::<Task>()
                .map_err(|e| Error::Config(vec![format!("task: {e}")]))?,
            None => Task::CifarPair,
        };
        let base = toml::Table::try_from(Self::for_task(task))
            .map_err(|e| Error::Config(vec![e.to_string()]))?;
        let merged = merge(base, value);
        toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(vec![e.to_string()]))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Every problem with the config at once.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.seeds.is_empty() {
            errs.push("seeds must not be empty".to_string());
        }
        if self.conditions.is_empty() {
            errs.push("conditions must not be empty".to_string());
        }
        let mut seen = self.conditions.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.conditions.len() {
            errs.push("conditions contain duplicates".to_string());
        }
        if self.output_dir.as_os_str().is_empty() {
            errs.push("output_dir must not be empty".to_string());
        }
        let n = &self.network;
        if n.hidden_layers == 0 {
            errs.push("network.hidden_layers must be >= 1".to_string());
        }
        if n.small_width < 2 {
            errs.push(format!(
                "network.small_width must be >= 2 (got {})",
                n.small_width
            ));
        }
        if n.large_width < n.small_width {
            errs.push(format!(
                "network.large_width ({}) must be >= small_width ({})",
                n.large_width, n.small_width
            ));
        }
        if !(0.0..1.0).contains(&n.dropout) {
            errs.push(format!(
                "network.dropout must be in [0, 1) (got {})",
                n.dropout
            ));
        }
        if n.batch_size == 0 {
            errs.push("network.batch_size must be >= 1".to_string());
        }
        let o = &self.optimizer;
        if !(o.learning_rate >= 0.0 && o.learning_rate.is_finite()) {
            errs.push(format!(
                "optimizer.learning_rate must be finite and >= 0 (got {})",
                o.learning_rate
            ));
        }
        if !((0.0..1.0).contains(&o.beta1) && (0.0..1.0).contains(&o.beta2)) {
            errs.push("optimizer.beta1 and beta2 must be in [0, 1)".to_string());
        }
        if !(o.epsilon > 0.0) {
            errs.push("optimizer.epsilon must be > 0".to_string());
        }
        if let Err(Error::Config(v)) = self.growth.validate() {
            errs.extend(v.into_iter().map(|e| format!("growth.{e}")));
        }
        match self.task {
            Task::CifarPair => {
                if self.epochs == 0 {
                    errs.push("epochs must be >= 1".to_string());
                }
                self.validate_cifar(&mut errs);
            }
            Task::Bc => {
                if self.epochs == 0 {
                    errs.push("epochs must be >= 1".to_string());
                }
                if self.bc.train_trajectories == 0 || self.bc.validation_trajectories == 0 {
                    errs.push(
                        "bc needs at least one train and one validation trajectory".to_string(),
                    );
                }
                if self.bc.eval_seeds.is_empty() {
                    errs.push("bc.eval_seeds must not be empty".to_string());
                }
            }
            Task::Dagger => {
                let d = &self.dagger;
                if d.iterations == 0 || d.episodes_per_iter == 0 || d.epochs_per_iter == 0 {
                    errs.push(
                        "dagger.iterations, episodes_per_iter and epochs_per_iter must be >= 1"
                            .to_string(),
                    );
                }
                if d.eval_seeds.is_empty() {
                    errs.push("dagger.eval_seeds must not be empty".to_string());
                }
            }
            Task::Ppo => {
                if let Err(Error::Config(v)) = self.ppo.validate() {
                    errs.extend(v.into_iter().map(|e| format!("ppo.{e}")));
                }
                if self.network.dropout != 0.0 {
                    errs.push("network.dropout must be 0 for ppo".to_string());
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    fn validate_cifar(&self, errs: &mut Vec<String>) {
        let c = &self.cifar;
        let classes = CIFAR_CLASSES.len() as u8;
        if c.class_a >= classes || c.class_b >= classes {
            errs.push(format!(
                "cifar classes must be in 0..=9 (got {} and {})",
                c.class_a, c.class_b
            ));
        }
        if c.class_a == c.class_b {
            errs.push("cifar.class_a and cifar.class_b must differ".to_string());
        }
        if !(1..=256).contains(&c.bins) {
            errs.push(format!("cifar.bins must be in 1..=256 (got {})", c.bins));
        }
        if !(c.holdout_fraction > 0.0 && c.holdout_fraction < 1.0) {
            errs.push(format!(
                "cifar.holdout_fraction must be in (0, 1) (got {})",
                c.holdout_fraction
            ));
        }
        if c.files.is_empty() {
            errs.push("cifar.files must not be empty".to_string());
        }
        match c.resolve_dir() {
            None => errs.push(format!(
                "no CIFAR-10 directory: set cifar.data_dir or {DATA_DIR_ENV} to the folder holding \
                 the binary batches (data_batch_1.bin ...) from cifar-10-binary.tar.gz"
            )),
            Some(dir) => {
                for f in &c.files {
                    let p = dir.join(f);
                    if !p.is_file() {
                        errs.push(format!(
                            "missing CIFAR-10 file {}: extract cifar-10-binary.tar.gz there or point \
                             cifar.data_dir / {DATA_DIR_ENV} at the right folder",
                            p.display()
                        ));
                    }
                }
            }
        }
    }
}

/// Recursive table merge; `over` wins.
fn merge(mut base: toml::Table, over: toml::Table) -> toml::Table {
    for (k, v) in over {
        let merged = match (base.remove(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => toml::Value::Table(merge(b, o)),
            (_, v) => v,
        };
        base.insert(k, merged);
    }
    base
}
