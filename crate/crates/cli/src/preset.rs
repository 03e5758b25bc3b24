//! Named experiment presets and the grid points they expand to.

use std::fmt;
use std::str::FromStr;

use lsimab_core::sim::instance_stream;
use lsimab_core::{
    make_balanced_instance, make_imbalanced_instance, make_paired_instance, make_random_instance,
    staircase_means, ArmModel, RunConfig, SharingStructure,
};

use crate::error::{HarnessError, Result};

pub const PRESET_NAMES: [&str; 6] = [
    "balanced_fig2a",
    "imbalanced_fig2b",
    "profit_fig3",
    "regret_vs_T_appxI1",
    "random_appxI2",
    "oracle_deterministic",
];

/// How agents' shared arm sets (and, for `Random`, the means) are built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Setting {
    Balanced,
    Imbalanced,
    Random,
    /// Two neighbouring arms per agent.
    Paired,
}

impl FromStr for Setting {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "balanced" => Ok(Self::Balanced),
            "imbalanced" => Ok(Self::Imbalanced),
            "random" => Ok(Self::Random),
            "paired" => Ok(Self::Paired),
            other => Err(HarnessError::Config(format!(
                "unknown setting `{other}` (expected balanced, imbalanced, random or paired)"
            ))),
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Balanced => "balanced",
            Self::Imbalanced => "imbalanced",
            Self::Random => "random",
            Self::Paired => "paired",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardFamily {
    Bernoulli,
    Deterministic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPreset {
    pub name: String,
    pub setting: Setting,
    /// Arm means; ignored by the random setting, which draws its own.
    pub means: Vec<f64>,
    pub rewards: RewardFamily,
    pub agents: Vec<usize>,
    pub horizons: Vec<u64>,
    pub threshold: f64,
    pub replications: usize,
    pub base_seed: u64,
    pub exclude_own_shares: bool,
    /// Dump the first replication of every grid point as a JSON-lines trace.
    pub trace: bool,
}

pub const DESK_HORIZON: u64 = 100_000;
pub const DESK_AGENTS: [usize; 5] = [10, 50, 100, 500, 1000];
pub const DEFAULT_REPLICATIONS: usize = 100;
pub const DEFAULT_SEED: u64 = 42;

/// `0.95, 0.85, ..., 0.05`.
pub fn shifted_means() -> Vec<f64> {
    (0..10).map(|i| (19 - 2 * i) as f64 / 20.0).collect()
}

impl ExperimentPreset {
    fn desk(name: &str, setting: Setting) -> Self {
        Self {
            name: name.to_string(),
            setting,
            means: staircase_means(10),
            rewards: RewardFamily::Bernoulli,
            agents: DESK_AGENTS.to_vec(),
            horizons: vec![DESK_HORIZON],
            threshold: 1.0,
            replications: DEFAULT_REPLICATIONS,
            base_seed: DEFAULT_SEED,
            exclude_own_shares: false,
            trace: false,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        Ok(match name {
            "balanced_fig2a" => Self::desk(name, Setting::Balanced),
            "imbalanced_fig2b" => Self::desk(name, Setting::Imbalanced),
            "profit_fig3" => Self {
                agents: vec![100, 500, 1000, 2000, 5000],
                ..Self::desk(name, Setting::Balanced)
            },
            "regret_vs_T_appxI1" => Self {
                means: shifted_means(),
                agents: vec![20],
                horizons: vec![1_000, 5_000, 10_000, 50_000, 100_000],
                ..Self::desk(name, Setting::Paired)
            },
            "random_appxI2" => Self::desk(name, Setting::Random),
            "oracle_deterministic" => Self {
                means: vec![1.0, 0.5],
                rewards: RewardFamily::Deterministic,
                agents: vec![2],
                horizons: vec![1000],
                replications: 1,
                ..Self::desk(name, Setting::Balanced)
            },
            other => return Err(HarnessError::UnknownPreset(other.to_string())),
        })
    }

    /// An ad-hoc experiment over `n_arms` staircase means.
    pub fn custom(setting: Setting, n_arms: usize) -> Self {
        Self {
            means: staircase_means(n_arms),
            ..Self::desk("custom", setting)
        }
    }

    pub fn n_arms(&self) -> usize {
        self.means.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.agents.is_empty() || self.horizons.is_empty() {
            return Err(HarnessError::Config("parameter grid is empty".into()));
        }
        if self.replications == 0 {
            return Err(HarnessError::Config("replications must be at least 1".into()));
        }
        if self.means.is_empty() {
            return Err(HarnessError::Config("at least one arm is required".into()));
        }
        Ok(())
    }

    /// Grid points in output order: agents outer, horizons inner.
    pub fn grid(&self) -> Vec<GridPoint> {
        self.agents
            .iter()
            .flat_map(|&agents| {
                self.horizons
                    .iter()
                    .map(move |&horizon| GridPoint { agents, horizon })
            })
            .collect()
    }

    fn model(&self, means: Vec<f64>) -> lsimab_core::Result<ArmModel> {
        Ok(match self.rewards {
            RewardFamily::Bernoulli => ArmModel::bernoulli(means)?,
            RewardFamily::Deterministic => ArmModel::deterministic(means)?,
        })
    }

    fn sharing(&self, agents: usize) -> lsimab_core::Result<SharingStructure> {
        let n = self.n_arms();
        Ok(match self.setting {
            Setting::Balanced => make_balanced_instance(n, agents)?,
            Setting::Imbalanced => make_imbalanced_instance(n, agents)?,
            Setting::Paired => make_paired_instance(n, agents)?,
            Setting::Random => unreachable!("random instances are drawn per seed"),
        })
    }

    /// Run configuration of one replication. Random instances are redrawn
    /// from the replication's seed.
    pub fn run_config(&self, point: GridPoint, seed: u64) -> lsimab_core::Result<RunConfig> {
        let (model, sharing) = match self.setting {
            Setting::Random => {
                let (model, sharing) =
                    make_random_instance(self.n_arms(), point.agents, &mut instance_stream(seed))?;
                (self.model(model.means().to_vec())?, sharing)
            }
            _ => (self.model(self.means.clone())?, self.sharing(point.agents)?),
        };
        let mut config = RunConfig::new(model, sharing, point.horizon)
            .with_seed(seed)
            .with_threshold(self.threshold);
        config.exclude_own_shares = self.exclude_own_shares;
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridPoint {
    pub agents: usize,
    pub horizon: u64,
}
