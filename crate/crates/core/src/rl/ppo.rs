//! Clipped-surrogate PPO update over one episode.

use serde::{Deserialize, Serialize};

use super::gae::{gae, normalize};
use super::policy::{head_forward, Agent, ACTION_DIM};
use crate::env::ActionCommand;
use crate::error::{Error, Result};
use crate::nn::{AdamConfig, AdamState, Graph, Tensor};
use crate::perception::{SENSORS, WINDOW};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub policy_lr: f64,
    pub value_lr: f64,
    pub epochs: usize,
    pub episode_len: usize,
    pub sigma_start: f64,
    /// Episodes per e-fold of the exploration scale.
    pub sigma_decay: f64,
    pub sigma_min: f64,
    /// Remaining epochs are skipped once the mean KL divergence from the
    /// behaviour policy exceeds this.
    pub target_kl: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lambda: 0.95,
            clip: 0.2,
            policy_lr: 1e-4,
            value_lr: 1e-3,
            epochs: 4,
            episode_len: 10,
            sigma_start: 0.3,
            sigma_decay: 40.0,
            sigma_min: 0.05,
            target_kl: 0.02,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!(
                "gamma {} outside [0, 1)",
                self.gamma
            )));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!(
                "lambda {} outside [0, 1]",
                self.lambda
            )));
        }
        if !(self.clip > 0.0) {
            return Err(Error::Config(format!(
                "clip {} must be positive",
                self.clip
            )));
        }
        if !(self.policy_lr > 0.0 && self.value_lr > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if self.epochs == 0 || self.episode_len == 0 {
            return Err(Error::Config(
                "epochs and episode_len must be positive".into(),
            ));
        }
        if !(self.sigma_min > 0.0 && self.sigma_start >= self.sigma_min && self.sigma_decay > 0.0) {
            return Err(Error::Config(
                "sigma schedule must be positive and non-increasing".into(),
            ));
        }
        if !(self.target_kl > 0.0) {
            return Err(Error::Config(format!(
                "target_kl {} must be positive",
                self.target_kl
            )));
        }
        Ok(())
    }

    /// Exploration scale for episode `e` (0-based).
    pub fn sigma(&self, e: usize) -> f64 {
        (self.sigma_start * (-(e as f64) / self.sigma_decay).exp()).max(self.sigma_min)
    }
}

#[derive(Debug, Clone)]
pub struct Transition {
    /// Row index of the last sample of this transition's state window.
    pub end: usize,
    pub u: [f64; 2],
    pub mean: [f64; 2],
    pub action: ActionCommand,
    pub log_prob: f64,
    pub reward: f64,
    pub value: f64,
}

/// Rollout of one episode. `rows` stores every distinct pressure sample the
/// state windows touch, `[n, SENSORS]` row-major.
#[derive(Debug, Clone)]
pub struct Episode {
    pub rows: Vec<f32>,
    pub transitions: Vec<Transition>,
    pub bootstrap_value: f64,
    pub sigma: f64,
}

impl Episode {
    pub fn new(first_window: &[f32], sigma: f64) -> Self {
        Self {
            rows: first_window.to_vec(),
            transitions: Vec::new(),
            bootstrap_value: 0.0,
            sigma,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len() / SENSORS
    }

    /// Row index of the current state's last sample.
    pub fn current_end(&self) -> usize {
        self.n_rows() - 1
    }

    /// The current state window.
    pub fn current_window(&self) -> &[f32] {
        let end = self.current_end();
        &self.rows[(end + 1 - WINDOW) * SENSORS..(end + 1) * SENSORS]
    }

    /// Record the window observed after `ticks` new samples.
    pub fn push_window(&mut self, window: &[f32], ticks: usize) {
        let fresh = ticks.clamp(1, WINDOW);
        self.rows
            .extend_from_slice(&window[(WINDOW - fresh) * SENSORS..]);
    }

    fn windows(&self) -> Vec<Vec<usize>> {
        self.transitions
            .iter()
            .map(|t| (t.end + 1 - WINDOW..=t.end).collect())
            .collect()
    }

    /// Advantages (raw) and returns on rewards mapped through `scale`.
    pub fn advantages(
        &self,
        config: &PpoConfig,
        scale: &RewardScaler,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let rewards: Vec<f64> = self
            .transitions
            .iter()
            .map(|t| scale.apply(t.reward))
            .collect();
        let mut values: Vec<f64> = self.transitions.iter().map(|t| t.value).collect();
        values.push(self.bootstrap_value);
        gae(&rewards, &values, config.gamma, config.lambda)
    }
}

/// Running mean and standard deviation of every reward seen so far; the
/// value network learns the centered, scaled rewards.
#[derive(Debug, Clone, Default)]
pub struct RewardScaler {
    count: f64,
    mean: f64,
    m2: f64,
}

impl RewardScaler {
    pub fn observe(&mut self, r: f64) {
        self.count += 1.0;
        let d = r - self.mean;
        self.mean += d / self.count;
        self.m2 += d * (r - self.mean);
    }

    pub fn std(&self) -> f64 {
        if self.count < 2.0 {
            return 1.0;
        }
        (self.m2 / self.count).sqrt().max(1e-3)
    }

    pub fn apply(&self, r: f64) -> f64 {
        (r - self.mean) / self.std()
    }
}

/// Optimizers for the two networks.
pub struct Optimizers {
    pub policy: AdamState<f32>,
    pub value: AdamState<f32>,
}

impl Optimizers {
    pub fn new(agent: &Agent, config: &PpoConfig) -> Self {
        Self {
            policy: AdamState::new(AdamConfig::with_lr(config.policy_lr), &agent.policy),
            value: AdamState::new(AdamConfig::with_lr(config.value_lr), &agent.value),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateStats {
    pub mean_ratio: f64,
    pub clip_fraction: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    /// KL divergence at the last completed epoch.
    pub kl: f64,
    pub epochs: usize,
}

/// Fraction of ratios outside `[1 - eps, 1 + eps]`.
pub fn clip_fraction(ratios: &[f64], eps: f64) -> f64 {
    if ratios.is_empty() {
        return 0.0;
    }
    ratios.iter().filter(|r| (*r - 1.0).abs() > eps).count() as f64 / ratios.len() as f64
}

/// One pass of the clipped surrogate.
pub struct PolicyPass {
    pub loss: f64,
    pub ratios: Vec<f64>,
    /// Mean KL divergence of the behaviour policy from the current one.
    pub kl: f64,
    pub grads: indexmap::IndexMap<String, Tensor<f32>>,
}

/// Clipped surrogate loss and its parameter gradients.
pub fn policy_loss(agent: &Agent, episode: &Episode, adv: &[f64], clip: f64) -> Result<PolicyPass> {
    let n = episode.transitions.len();
    let sigma = episode.sigma;
    let mut g = Graph::new();
    let mean = head_forward(
        &mut g,
        &agent.policy,
        ("pi.l1", "pi.mean"),
        &episode.rows,
        &episode.windows(),
        false,
    )?;
    let u: Vec<f32> = episode
        .transitions
        .iter()
        .flat_map(|t| t.u.iter().map(|&v| v as f32))
        .collect();
    let u = g.constant(Tensor::new(&[n, ACTION_DIM], u)?);
    let d = g.sub(mean, u)?;
    let sq = g.square(d);
    let s = g.sum_cols(sq)?;
    let new_part = g.affine(s, -0.5 / (sigma * sigma), 0.0);
    // only the mean-dependent part of the old log-density is needed
    let old: Vec<f32> = episode
        .transitions
        .iter()
        .map(|t| {
            let q: f64 = (0..ACTION_DIM).map(|i| (t.u[i] - t.mean[i]).powi(2)).sum();
            (-0.5 * q / (sigma * sigma)) as f32
        })
        .collect();
    let old = g.constant(Tensor::from_vec(old));
    let log_ratio = g.sub(new_part, old)?;
    let ratio = g.exp(log_ratio);
    let a = g.constant(Tensor::from_vec(adv.iter().map(|&v| v as f32).collect()));
    let t1 = g.mul(ratio, a)?;
    let rc = g.clamp(ratio, 1.0 - clip, 1.0 + clip);
    let t2 = g.mul(rc, a)?;
    let m = g.minimum(t1, t2)?;
    let m = g.mean(m);
    let loss = g.affine(m, -1.0, 0.0);
    let value = g.value(loss).data()[0] as f64;
    let ratios = g.value(ratio).data().iter().map(|&r| r as f64).collect();
    let kl = {
        let m = g.value(mean).data();
        let q: f64 = episode
            .transitions
            .iter()
            .enumerate()
            .flat_map(|(b, t)| {
                (0..ACTION_DIM).map(move |i| (m[b * ACTION_DIM + i] as f64 - t.mean[i]).powi(2))
            })
            .sum();
        0.5 * q / (sigma * sigma) / n as f64
    };
    let grads = g.backward(loss)?.params();
    Ok(PolicyPass {
        loss: value,
        ratios,
        kl,
        grads,
    })
}

/// Mean squared error of the value network against `returns`.
pub fn value_loss(
    agent: &Agent,
    episode: &Episode,
    returns: &[f64],
) -> Result<(f64, indexmap::IndexMap<String, Tensor<f32>>)> {
    let n = episode.transitions.len();
    let mut g = Graph::new();
    let v = head_forward(
        &mut g,
        &agent.value,
        ("v.l1", "v.out"),
        &episode.rows,
        &episode.windows(),
        false,
    )?;
    let target = g.constant(Tensor::new(
        &[n, 1],
        returns.iter().map(|&r| r as f32).collect(),
    )?);
    let d = g.sub(v, target)?;
    let sq = g.square(d);
    let loss = g.mean(sq);
    let value = g.value(loss).data()[0] as f64;
    Ok((value, g.backward(loss)?.params()))
}

/// Several epochs of full-batch PPO on one episode.
pub fn ppo_update(
    agent: &mut Agent,
    opt: &mut Optimizers,
    episode: &Episode,
    config: &PpoConfig,
    scale: &RewardScaler,
    episode_id: usize,
) -> Result<UpdateStats> {
    if episode.transitions.is_empty() {
        return Err(Error::Data("empty episode".into()));
    }
    let (adv, returns) = episode.advantages(config, scale)?;
    let adv = normalize(&adv);
    let mut all_ratios = Vec::new();
    let mut stats = UpdateStats::default();
    let mut done = 0;
    for epoch in 0..config.epochs {
        let pass = policy_loss(agent, episode, &adv, config.clip)?;
        if epoch > 0 && pass.kl > config.target_kl {
            break;
        }
        let pl = pass.loss;
        let (vl, vgrads) = value_loss(agent, episode, &returns)?;
        if !pl.is_finite() || !vl.is_finite() {
            return Err(Error::Training {
                param: format!("episode {episode_id}"),
                reason: format!("non-finite loss (policy {pl}, value {vl})"),
            });
        }
        opt.policy.step(&mut agent.policy, &pass.grads)?;
        opt.value.step(&mut agent.value, &vgrads)?;
        all_ratios.extend(pass.ratios);
        stats.policy_loss += pl;
        stats.value_loss += vl;
        stats.kl = pass.kl;
        done += 1;
    }
    stats.epochs = done;
    stats.policy_loss /= done as f64;
    stats.value_loss /= done as f64;
    stats.mean_ratio = all_ratios.iter().sum::<f64>() / all_ratios.len() as f64;
    stats.clip_fraction = clip_fraction(&all_ratios, config.clip);
    Ok(stats)
}
