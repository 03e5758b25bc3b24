//! Flat `key = value` experiment files and command-line overrides.
//!
//! ```text
//! # fig2a at a smaller scale
//! preset = balanced_fig2a
//! agents = 10, 100
//! replications = 20
//! ```
//!
//! Keys: `preset`, `setting`, `agents`, `arms`, `horizon`,
//! `balance_threshold`, `replications`, `seed`, `output_dir`, `trace`,
//! `exclude_own_shares`. `agents` and `horizon` take comma-separated lists.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{HarnessError, Result};
use crate::preset::{ExperimentPreset, Setting};

pub const DEFAULT_OUTPUT_DIR: &str = "results";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub preset: Option<String>,
    pub setting: Option<Setting>,
    pub agents: Option<Vec<usize>>,
    pub arms: Option<usize>,
    pub horizon: Option<Vec<u64>>,
    pub balance_threshold: Option<f64>,
    pub replications: Option<usize>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub trace: Option<bool>,
    pub exclude_own_shares: Option<bool>,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| HarnessError::Config(format!("invalid value `{value}` for `{key}`")))
}

pub fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    let items = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect::<Result<Vec<T>>>()?;
    if items.is_empty() {
        return Err(HarnessError::Config(format!("`{key}` needs at least one value")));
    }
    Ok(items)
}

impl Overrides {
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut out = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                HarnessError::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            out.set(key.trim(), value.trim())?;
        }
        Ok(out)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::parse_str(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "preset" => self.preset = Some(value.to_string()),
            "setting" => self.setting = Some(value.parse()?),
            "agents" => self.agents = Some(parse_list(key, value)?),
            "arms" => self.arms = Some(parse(key, value)?),
            "horizon" => self.horizon = Some(parse_list(key, value)?),
            "balance_threshold" => self.balance_threshold = Some(parse(key, value)?),
            "replications" => self.replications = Some(parse(key, value)?),
            "seed" => self.seed = Some(parse(key, value)?),
            "output_dir" => self.output_dir = Some(PathBuf::from(value)),
            "trace" => self.trace = Some(parse(key, value)?),
            "exclude_own_shares" => self.exclude_own_shares = Some(parse(key, value)?),
            other => return Err(HarnessError::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Values set in `over` win.
    pub fn merged(self, over: Overrides) -> Self {
        Self {
            preset: over.preset.or(self.preset),
            setting: over.setting.or(self.setting),
            agents: over.agents.or(self.agents),
            arms: over.arms.or(self.arms),
            horizon: over.horizon.or(self.horizon),
            balance_threshold: over.balance_threshold.or(self.balance_threshold),
            replications: over.replications.or(self.replications),
            seed: over.seed.or(self.seed),
            output_dir: over.output_dir.or(self.output_dir),
            trace: over.trace.or(self.trace),
            exclude_own_shares: over.exclude_own_shares.or(self.exclude_own_shares),
        }
    }

    /// Builds the experiment: a named preset with overrides applied, or a
    /// custom experiment when no preset is given.
    pub fn resolve(&self) -> Result<(ExperimentPreset, PathBuf)> {
        let mut preset = match (&self.preset, self.setting) {
            (Some(name), _) => ExperimentPreset::by_name(name)?,
            (None, Some(setting)) => ExperimentPreset::custom(setting, self.arms.unwrap_or(10)),
            (None, None) => {
                return Err(HarnessError::Config(
                    "either a preset or a setting is required".into(),
                ))
            }
        };
        if let Some(setting) = self.setting {
            preset.setting = setting;
        }
        if let Some(arms) = self.arms {
            if arms != preset.n_arms() {
                preset.means = lsimab_core::staircase_means(arms);
            }
        }
        if let Some(agents) = &self.agents {
            preset.agents.clone_from(agents);
        }
        if let Some(horizon) = &self.horizon {
            preset.horizons.clone_from(horizon);
        }
        if let Some(b) = self.balance_threshold {
            if b.is_nan() || b < 1.0 {
                return Err(HarnessError::Config(format!(
                    "balance threshold must be at least 1, got {b}"
                )));
            }
            preset.threshold = b;
        }
        if let Some(r) = self.replications {
            preset.replications = r;
        }
        if let Some(s) = self.seed {
            preset.base_seed = s;
        }
        if let Some(t) = self.trace {
            preset.trace = t;
        }
        if let Some(x) = self.exclude_own_shares {
            preset.exclude_own_shares = x;
        }
        preset.validate()?;
        let dir = self
            .output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
        Ok((preset, dir))
    }
}
