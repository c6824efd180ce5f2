//! Run configuration: one TOML file with sections for the solver, the
//! environment, perception and RL.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::{BackendKind, CfdParams, EnvConfig, MotionKind, SurrogateParams};
use crate::error::{Error, Result};
use crate::perception::{ObstacleConfig, PretrainConfig};
use crate::rl::PpoConfig;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "FLOWSENSE_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub backend: BackendKind,
    /// Output directory; falls back to `$FLOWSENSE_OUT`, then `runs`.
    pub output_dir: Option<PathBuf>,
    pub solver: CfdParams,
    pub environment: EnvironmentSection,
    pub perception: PerceptionSection,
    pub rl: RlSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            backend: BackendKind::Surrogate,
            output_dir: None,
            solver: CfdParams::default(),
            environment: EnvironmentSection::default(),
            perception: PerceptionSection::default(),
            rl: RlSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvironmentSection {
    pub warmup: f64,
    /// Length of the pretraining corpus, in time units.
    pub train_duration: f64,
    /// Length of each obstacle test set.
    pub test_duration: f64,
    pub train_motion: MotionKind,
    /// Obstacle motion during RL.
    pub rl_motion: MotionKind,
    /// Agent position at the start of RL.
    pub agent_start: f64,
    pub surrogate: SurrogateParams,
}

impl Default for EnvironmentSection {
    fn default() -> Self {
        Self {
            warmup: 20.0,
            train_duration: 500.0,
            test_duration: 60.0,
            train_motion: MotionKind::random_waypoint(),
            rl_motion: MotionKind::Still,
            agent_start: 0.5,
            surrogate: SurrogateParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerceptionSection {
    pub pretrain: PretrainConfig,
    pub obstacle: ObstacleConfig,
    /// Windows averaged by each sensitivity map.
    pub sensitivity_windows: usize,
}

impl Default for PerceptionSection {
    fn default() -> Self {
        Self {
            pretrain: PretrainConfig::default(),
            obstacle: ObstacleConfig::default(),
            sensitivity_windows: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RlSection {
    pub ppo: PpoConfig,
    pub episodes: usize,
    /// Training runs per arm, seeded `seed, seed + 1, ...`.
    pub seeds: usize,
}

impl Default for RlSection {
    fn default() -> Self {
        Self {
            ppo: PpoConfig::default(),
            episodes: 100,
            seeds: 5,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Apply `key=value` overrides, with dotted keys for nested fields
    /// (`rl.episodes=20`). The result is validated.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        let mut doc: toml::Table = toml::from_str(&self.to_toml()).expect("config roundtrips");
        for item in overrides {
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{item}` is not key=value")))?;
            let value = parse_value(raw.trim());
            let mut path: Vec<&str> = key.trim().split('.').collect();
            let last = path
                .pop()
                .filter(|s| !s.is_empty())
                .ok_or_else(|| Error::Config(format!("empty key in `{item}`")))?;
            let mut table = &mut doc;
            for part in path {
                table = table
                    .entry(part)
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                    .as_table_mut()
                    .ok_or_else(|| {
                        Error::Config(format!("`{part}` in `{key}` is not a section"))
                    })?;
            }
            table.insert(last.to_string(), value);
        }
        Self::from_toml(&toml::to_string(&doc).expect("table serializes"))
    }

    /// Reduced corpus, training and RL sizes for smoke runs.
    pub fn quick(mut self) -> Self {
        self.environment.train_duration = 100.0;
        self.environment.test_duration = 30.0;
        self.perception.pretrain.epochs = 1;
        self.perception.pretrain.batches_per_epoch = 10;
        self.perception.obstacle.steps = 40;
        self.perception.sensitivity_windows = crate::perception::sensitivity::MIN_WINDOWS;
        self.rl.episodes = 20;
        self.rl.seeds = 2;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let env = &self.environment;
        let positive = [
            ("environment.train_duration", env.train_duration),
            ("environment.test_duration", env.test_duration),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.rl.episodes == 0 || self.rl.seeds == 0 {
            return Err(Error::Config(
                "rl.episodes and rl.seeds must be positive".into(),
            ));
        }
        if self.perception.sensitivity_windows < crate::perception::sensitivity::MIN_WINDOWS {
            return Err(Error::Config(format!(
                "perception.sensitivity_windows must be at least {}",
                crate::perception::sensitivity::MIN_WINDOWS
            )));
        }
        self.env_config(env.train_motion, self.seed).validate()?;
        self.env_config(env.rl_motion, self.seed).validate()?;
        self.solver.validate()?;
        self.perception.pretrain.validate()?;
        self.perception.obstacle.validate()?;
        self.rl.ppo.validate()
    }

    /// Environment for the given obstacle motion, agent held at the center.
    pub fn env_config(&self, obstacle: MotionKind, seed: u64) -> EnvConfig {
        EnvConfig {
            backend: self.backend,
            obstacle,
            seed,
            agent_start: 0.0,
            warmup: self.environment.warmup,
            surrogate: self.environment.surrogate.clone(),
            cfd: self.solver.clone(),
        }
    }

    /// Environment used for RL training with the given seed.
    pub fn rl_env_config(&self, seed: u64) -> EnvConfig {
        EnvConfig {
            agent_start: self.environment.agent_start,
            ..self.env_config(self.environment.rl_motion, seed)
        }
    }

    /// Output root: the configured directory, else `$FLOWSENSE_OUT`, else
    /// `runs`.
    pub fn output_root(&self) -> PathBuf {
        if let Some(dir) = &self.output_dir {
            return dir.clone();
        }
        std::env::var_os(OUT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("runs"))
    }
}

/// TOML scalar if it parses as one, else a string.
fn parse_value(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&wrapped) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}
