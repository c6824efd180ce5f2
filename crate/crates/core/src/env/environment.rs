//! The agent-facing environment: sampling clock, pressure history and the
//! action contract.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::backend::{FlowBackend, Observation, N_SENSORS};
use super::cfd_backend::{CfdBackend, CfdParams};
use super::dataset::{Dataset, DatasetRecord};
use super::motion::{make_motion, Lateral, MotionKind, Trajectory};
use super::surrogate::{SurrogateBackend, SurrogateParams};
use crate::cfd::kinematics::{set_body_motion, MoveProfile, DEFAULT_RAMP};
use crate::error::{Error, Result};

/// Sampling interval of every observation stream.
pub const SAMPLE_DT: f64 = 0.1;
/// Number of samples in an observation window.
pub const WINDOW: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    Cfd,
    #[default]
    Surrogate,
}

impl std::str::FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cfd" => Ok(Self::Cfd),
            "surrogate" => Ok(Self::Surrogate),
            other => Err(Error::Config(format!(
                "unknown backend {other:?} (expected cfd or surrogate)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub backend: BackendKind,
    pub obstacle: MotionKind,
    pub seed: u64,
    /// Initial lateral position of the agent.
    pub agent_start: f64,
    /// Simulated time discarded before the first observation is used.
    pub warmup: f64,
    pub surrogate: SurrogateParams,
    pub cfd: CfdParams,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            backend: BackendKind::Surrogate,
            obstacle: MotionKind::Still,
            seed: 0,
            agent_start: 0.5,
            warmup: 20.0,
            surrogate: SurrogateParams::default(),
            cfd: CfdParams::default(),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        self.obstacle.validate()?;
        if !(self.agent_start.abs() <= 1.0) {
            return Err(Error::Config(format!(
                "agent_start {} outside [-1, 1]",
                self.agent_start
            )));
        }
        if !(self.warmup >= 0.0) || !self.warmup.is_finite() {
            return Err(Error::Config(format!(
                "warmup {} must be non-negative",
                self.warmup
            )));
        }
        match self.backend {
            BackendKind::Surrogate => self.surrogate.validate(),
            BackendKind::Cfd => self.cfd.validate(),
        }
    }
}

/// An RL action: target magnitude and average lateral speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionCommand {
    a_pos: f64,
    a_vel: f64,
}

impl ActionCommand {
    pub const POS_RANGE: (f64, f64) = (-1.0, 1.0);
    pub const VEL_RANGE: (f64, f64) = (0.2, 0.4);

    pub fn new(a_pos: f64, a_vel: f64) -> Result<Self> {
        let (plo, phi) = Self::POS_RANGE;
        let (vlo, vhi) = Self::VEL_RANGE;
        if !(plo..=phi).contains(&a_pos) {
            return Err(Error::Action(format!(
                "a_pos {a_pos} outside [{plo}, {phi}]"
            )));
        }
        if !(vlo..=vhi).contains(&a_vel) {
            return Err(Error::Action(format!(
                "a_vel {a_vel} outside [{vlo}, {vhi}]"
            )));
        }
        Ok(Self { a_pos, a_vel })
    }

    pub fn a_pos(&self) -> f64 {
        self.a_pos
    }

    pub fn a_vel(&self) -> f64 {
        self.a_vel
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub y_before: f64,
    pub y_after: f64,
    pub target: f64,
    /// Duration of the move itself.
    pub duration: f64,
    /// Drag coefficient at every sample inside the action window.
    pub cd_samples: Vec<f64>,
    pub mean_cd: f64,
    /// `(t, y_agent)` at every sample inside the action window.
    pub trajectory: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    /// Trailing `WINDOW x 200` pressure window, row-major, oldest first.
    pub window: Vec<f32>,
    pub reward: f64,
    pub info: StepInfo,
}

pub struct Environment {
    config: EnvConfig,
    backend: Box<dyn FlowBackend>,
    obstacle: Trajectory,
    agent: MoveProfile,
    tick: u64,
    history: VecDeque<Vec<f32>>,
    last: Option<Observation>,
    /// Direction used when a move starts exactly on the centerline.
    tie_sign: f64,
    ready: bool,
}

impl Environment {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let mut obstacle = make_motion(config.obstacle, config.seed)?;
        let agent = MoveProfile::hold(0.0, config.agent_start);
        let backend: Box<dyn FlowBackend> = match config.backend {
            BackendKind::Surrogate => Box::new(SurrogateBackend::new(config.surrogate.clone())?),
            BackendKind::Cfd => Box::new(CfdBackend::new(
                &config.cfd,
                obstacle.eval(0.0),
                Lateral {
                    y: config.agent_start,
                    ..Lateral::default()
                },
            )?),
        };
        let mut env = Self {
            config,
            backend,
            obstacle,
            agent,
            tick: 0,
            history: VecDeque::with_capacity(WINDOW + 1),
            last: None,
            tie_sign: 1.0,
            ready: false,
        };
        let warm = (env.config.warmup / SAMPLE_DT).round() as u64;
        for _ in 0..warm {
            env.tick()?;
        }
        Ok(env)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn backend_name(&self) -> &'static str {
        self.backend.name()
    }

    /// Time of the latest sample, an exact multiple of the sample interval.
    pub fn time(&self) -> f64 {
        self.tick as f64 * SAMPLE_DT
    }

    pub fn agent_y(&self) -> f64 {
        self.agent.eval(self.time()).0
    }

    pub fn obstacle_y(&mut self) -> f64 {
        let t = self.time();
        self.obstacle.eval(t).y
    }

    pub fn last_observation(&self) -> Option<&Observation> {
        self.last.as_ref()
    }

    /// Advance one sample interval and return the new record.
    pub fn tick(&mut self) -> Result<DatasetRecord> {
        let t = (self.tick + 1) as f64 * SAMPLE_DT;
        let agent = self.agent;
        let obstacle = &mut self.obstacle;
        let obs = self
            .backend
            .advance(t, &mut |s| obstacle.eval(s.max(0.0)), &mut |s| {
                let (y, v, a) = agent.eval(s);
                Lateral { y, v, a }
            })?;
        self.tick += 1;
        let row: Vec<f32> = obs.pressure.iter().map(|&p| p as f32).collect();
        if self.history.len() == WINDOW {
            self.history.pop_front();
        }
        self.history.push_back(row.clone());
        let rec = DatasetRecord {
            t: t as f32,
            y_obstacle: self.obstacle.eval(t).y as f32,
            y_agent: agent.eval(t).0 as f32,
            pressure: row,
            cd: obs.cd as f32,
            cl: obs.cl as f32,
        };
        self.last = Some(obs);
        Ok(rec)
    }

    /// Record `floor(duration / 0.1)` consecutive samples.
    pub fn record_dataset(&mut self, duration: f64) -> Result<Dataset> {
        if !(duration > 0.0) {
            return Err(Error::Config(format!(
                "duration {duration} must be positive"
            )));
        }
        let n = (duration / SAMPLE_DT + 1e-9).floor() as usize;
        let mut records = Vec::with_capacity(n);
        for _ in 0..n {
            records.push(self.tick()?);
        }
        Ok(Dataset { records })
    }

    /// The trailing window, if enough samples exist.
    pub fn window(&self) -> Option<Vec<f32>> {
        if self.history.len() < WINDOW {
            return None;
        }
        let mut out = Vec::with_capacity(WINDOW * N_SENSORS);
        for row in &self.history {
            out.extend_from_slice(row);
        }
        Some(out)
    }

    /// Prepare for actions: fill the window if needed and return it. The
    /// flow and the agent position carry over from earlier episodes.
    pub fn reset(&mut self) -> Result<Vec<f32>> {
        while self.history.len() < WINDOW {
            self.tick()?;
        }
        self.ready = true;
        Ok(self.window().expect("window filled"))
    }

    /// Target of an action from the current position: always on the other
    /// side of the centerline.
    pub fn target_for(&self, action: &ActionCommand) -> f64 {
        let y = self.agent_y();
        let side = if y > 0.0 {
            1.0
        } else if y < 0.0 {
            -1.0
        } else {
            self.tie_sign
        };
        -side * action.a_pos().abs()
    }

    /// Execute one action to completion.
    pub fn step(&mut self, action: ActionCommand) -> Result<StepOutcome> {
        if !self.ready {
            return Err(Error::Protocol("action issued before reset".into()));
        }
        let y_before = self.agent_y();
        let target = self.target_for(&action);
        if y_before == 0.0 {
            self.tie_sign = -self.tie_sign;
        }
        let t0 = self.time();
        self.agent = set_body_motion(t0, y_before, target, action.a_vel(), DEFAULT_RAMP)?;
        let duration = self.agent.duration;
        let n = ((duration / SAMPLE_DT) - 1e-9).ceil().max(1.0) as usize;
        let mut cd_samples = Vec::with_capacity(n);
        let mut trajectory = Vec::with_capacity(n);
        for _ in 0..n {
            let rec = self.tick()?;
            cd_samples.push(self.last.as_ref().map(|o| o.cd).unwrap_or(rec.cd as f64));
            trajectory.push((self.time(), self.agent_y()));
        }
        // settle exactly on the target for the next action
        self.agent = MoveProfile::hold(self.time(), target);
        let mean_cd = cd_samples.iter().sum::<f64>() / n as f64;
        Ok(StepOutcome {
            window: self.window().expect("window filled at reset"),
            reward: -mean_cd,
            info: StepInfo {
                y_before,
                y_after: target,
                target,
                duration,
                cd_samples,
                mean_cd,
                trajectory,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(agent_start: f64) -> Environment {
        Environment::new(EnvConfig {
            agent_start,
            warmup: 0.0,
            ..EnvConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn crossing_rule_and_duration() {
        let mut e = env(0.4);
        e.reset().unwrap();
        let a = ActionCommand::new(0.7, 0.25).unwrap();
        assert_eq!(e.target_for(&a), -0.7);
        let out = e.step(a).unwrap();
        assert!((out.info.duration - 1.1 / 0.25).abs() < 1e-12);
        assert_eq!(out.info.y_after, -0.7);
        assert_eq!(out.info.cd_samples.len(), 44);
        let mean = out.info.cd_samples.iter().sum::<f64>() / 44.0;
        assert!((out.reward + mean).abs() < 1e-12);
    }

    #[test]
    fn centerline_tie_alternates() {
        let mut e = env(0.0);
        e.reset().unwrap();
        let out = e.step(ActionCommand::new(0.5, 0.3).unwrap()).unwrap();
        assert_eq!(out.info.target, -0.5);
        let out = e.step(ActionCommand::new(0.0, 0.3).unwrap()).unwrap();
        assert_eq!(out.info.target, 0.0);
        let out = e.step(ActionCommand::new(0.3, 0.3).unwrap()).unwrap();
        assert_eq!(out.info.target, 0.3);
    }

    #[test]
    fn action_before_reset_is_a_protocol_error() {
        let mut e = env(0.5);
        let r = e.step(ActionCommand::new(0.5, 0.3).unwrap());
        assert!(matches!(r, Err(Error::Protocol(_))));
    }

    #[test]
    fn action_ranges_enforced() {
        assert!(matches!(
            ActionCommand::new(1.2, 0.3),
            Err(Error::Action(_))
        ));
        assert!(matches!(
            ActionCommand::new(0.2, 0.5),
            Err(Error::Action(_))
        ));
        assert!(matches!(
            ActionCommand::new(0.2, 0.1),
            Err(Error::Action(_))
        ));
    }

    #[test]
    fn dataset_length_and_cadence() {
        let mut e = Environment::new(EnvConfig {
            obstacle: MotionKind::random_waypoint(),
            warmup: 0.0,
            ..EnvConfig::default()
        })
        .unwrap();
        let d = e.record_dataset(50.0).unwrap();
        assert_eq!(d.len(), 500);
        d.check().unwrap();
        assert!((e.time() - 50.0).abs() < 1e-9);
        for r in &d.records {
            assert!(r.y_obstacle.abs() <= 1.0 && r.y_agent.abs() <= 1.0);
        }
    }
}
