//! Rollouts and the training loop.

use super::policy::{policy_mean, policy_sample, squash, value_estimate, Agent};
use super::ppo::{
    ppo_update, Episode, Optimizers, PpoConfig, RewardScaler, Transition, UpdateStats,
};
use crate::env::{ActionCommand, Environment};
use crate::error::{Error, Result};
use crate::perception::{SENSORS, WINDOW};
use crate::rng::Rng;

/// Outcome of one action on a task.
#[derive(Debug, Clone)]
pub struct TaskStep {
    pub window: Vec<f32>,
    pub reward: f64,
    /// Drag (or cost) samples over the action.
    pub cd_samples: Vec<f64>,
    pub y_before: f64,
    pub y_after: f64,
}

/// Anything the agent can act on through the action contract.
pub trait RlTask {
    /// Current state window, `WINDOW x SENSORS`.
    fn reset(&mut self) -> Result<Vec<f32>>;
    fn step(&mut self, action: ActionCommand) -> Result<TaskStep>;
    /// Rebuild after a failed step.
    fn restart(&mut self) -> Result<()>;
}

impl RlTask for Environment {
    fn reset(&mut self) -> Result<Vec<f32>> {
        Environment::reset(self)
    }

    fn step(&mut self, action: ActionCommand) -> Result<TaskStep> {
        let out = Environment::step(self, action)?;
        Ok(TaskStep {
            window: out.window,
            reward: out.reward,
            cd_samples: out.info.cd_samples,
            y_before: out.info.y_before,
            y_after: out.info.y_after,
        })
    }

    fn restart(&mut self) -> Result<()> {
        *self = Environment::new(self.config().clone())?;
        Ok(())
    }
}

/// Setpoint tracking with a noisy actuator: the body lands at
/// `a_pos + noise` and pays `(y - target)^2`.
/// The observation is a constant window holding the potential-flow
/// surface pressure `1 - 4 sin^2(theta)`.
#[derive(Debug, Clone)]
pub struct ToyTracking {
    pub target: f64,
    pub noise: f64,
    rng: Rng,
    y: f64,
}

impl ToyTracking {
    pub fn new(seed: u64) -> Self {
        Self {
            target: 0.5,
            noise: 0.2,
            rng: Rng::new(seed).split(51),
            y: 0.0,
        }
    }

    /// Expected cost of a deterministic action.
    pub fn expected_cost(&self, a: ActionCommand) -> f64 {
        (a.a_pos() - self.target).powi(2) + self.noise.powi(2)
    }

    /// Lowest achievable expected cost.
    pub fn optimal_cost(&self) -> f64 {
        self.noise.powi(2)
    }

    pub fn observation() -> Vec<f32> {
        let row: Vec<f32> = (0..SENSORS)
            .map(|j| {
                let th = 2.0 * std::f64::consts::PI * j as f64 / SENSORS as f64;
                (1.0 - 4.0 * th.sin().powi(2)) as f32
            })
            .collect();
        row.repeat(WINDOW)
    }
}

impl RlTask for ToyTracking {
    fn reset(&mut self) -> Result<Vec<f32>> {
        Ok(Self::observation())
    }

    fn step(&mut self, a: ActionCommand) -> Result<TaskStep> {
        let y_before = self.y;
        self.y = a.a_pos() + self.noise * self.rng.normal();
        let cost = (self.y - self.target).powi(2);
        Ok(TaskStep {
            window: Self::observation(),
            reward: -cost,
            cd_samples: vec![cost],
            y_before,
            y_after: self.y,
        })
    }

    fn restart(&mut self) -> Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub episode: usize,
    pub mean_cd: f64,
    pub reward: f64,
    pub sigma: f64,
    pub stats: UpdateStats,
    pub aborted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionLog {
    pub episode: usize,
    pub index: usize,
    pub a_pos: f64,
    pub a_vel: f64,
    pub y_before: f64,
    pub y_after: f64,
    pub reward: f64,
    /// Mean of the drag samples, recomputed from the raw samples.
    pub mean_cd: f64,
}

#[derive(Debug, Clone)]
pub struct RlRun {
    pub agent: Agent,
    pub episodes: Vec<EpisodeLog>,
    pub actions: Vec<ActionLog>,
}

fn is_recoverable(e: &Error) -> bool {
    matches!(e, Error::BlowUp { .. } | Error::Numerical(_))
}

/// Collect one episode. Returns `None` if the task failed mid-episode.
fn rollout(
    task: &mut dyn RlTask,
    agent: &Agent,
    config: &PpoConfig,
    episode_id: usize,
    rng: &mut Rng,
    actions: &mut Vec<ActionLog>,
) -> Result<Option<Episode>> {
    let sigma = config.sigma(episode_id);
    let window = task.reset()?;
    let mut ep = Episode::new(&window, sigma);
    for index in 0..config.episode_len {
        let state = ep.current_window().to_vec();
        let mean = policy_mean(&agent.policy, &state)?;
        let value = value_estimate(&agent.value, &state)?;
        let s = policy_sample(mean, sigma, rng);
        let step = match task.step(s.action) {
            Ok(step) => step,
            Err(e) if is_recoverable(&e) => return Ok(None),
            Err(e) => return Err(e),
        };
        let mean_cd = step.cd_samples.iter().sum::<f64>() / step.cd_samples.len() as f64;
        actions.push(ActionLog {
            episode: episode_id,
            index,
            a_pos: s.action.a_pos(),
            a_vel: s.action.a_vel(),
            y_before: step.y_before,
            y_after: step.y_after,
            reward: step.reward,
            mean_cd,
        });
        ep.transitions.push(Transition {
            end: ep.current_end(),
            u: s.u,
            mean,
            action: s.action,
            log_prob: s.log_prob,
            reward: step.reward,
            value,
        });
        ep.push_window(&step.window, step.cd_samples.len());
    }
    ep.bootstrap_value = value_estimate(&agent.value, ep.current_window())?;
    Ok(Some(ep))
}

/// Train for `n_episodes`, updating after every episode. `checkpoint` is
/// called with the episode count every ten episodes.
pub fn train_rl(
    task: &mut dyn RlTask,
    mut agent: Agent,
    config: &PpoConfig,
    n_episodes: usize,
    seed: u64,
    checkpoint: &mut dyn FnMut(usize, &Agent) -> Result<()>,
) -> Result<RlRun> {
    config.validate()?;
    let mut opt = Optimizers::new(&agent, config);
    let mut scale = RewardScaler::default();
    let mut rng = Rng::new(seed).split(61);
    let mut episodes = Vec::with_capacity(n_episodes);
    let mut actions = Vec::new();
    for e in 0..n_episodes {
        let Some(ep) = rollout(task, &agent, config, e, &mut rng, &mut actions)? else {
            actions.retain(|a| a.episode != e);
            task.restart()?;
            episodes.push(EpisodeLog {
                episode: e,
                mean_cd: f64::NAN,
                reward: f64::NAN,
                sigma: config.sigma(e),
                stats: UpdateStats::default(),
                aborted: true,
            });
            continue;
        };
        for t in &ep.transitions {
            scale.observe(t.reward);
        }
        let stats = ppo_update(&mut agent, &mut opt, &ep, config, &scale, e)?;
        let reward =
            ep.transitions.iter().map(|t| t.reward).sum::<f64>() / ep.transitions.len() as f64;
        episodes.push(EpisodeLog {
            episode: e,
            mean_cd: -reward,
            reward,
            sigma: ep.sigma,
            stats,
            aborted: false,
        });
        if (e + 1) % 10 == 0 {
            checkpoint(e + 1, &agent)?;
        }
    }
    Ok(RlRun {
        agent,
        episodes,
        actions,
    })
}

/// Deterministic action of the current policy for a window.
pub fn greedy_action(agent: &Agent, window: &[f32]) -> Result<ActionCommand> {
    Ok(squash(policy_mean(&agent.policy, window)?))
}

/// Relative improvement of the mean reward over the last ten episodes
/// against the first ten, skipping aborted episodes.
pub fn reward_improvement(episodes: &[EpisodeLog]) -> Option<f64> {
    let ok: Vec<f64> = episodes
        .iter()
        .filter(|e| !e.aborted)
        .map(|e| e.reward)
        .collect();
    if ok.len() < 20 {
        return None;
    }
    let first = ok[..10].iter().sum::<f64>() / 10.0;
    let last = ok[ok.len() - 10..].iter().sum::<f64>() / 10.0;
    Some((last - first) / first.abs())
}
