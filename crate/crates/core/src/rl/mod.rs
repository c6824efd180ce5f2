//! PPO with GAE and ratio clipping for the drag-reduction task.

pub mod gae;
pub mod policy;
pub mod ppo;
pub mod train;

pub use gae::{gae, normalize};
pub use policy::{policy_sample, squash, Agent, PolicySample};
pub use ppo::{
    clip_fraction, ppo_update, Episode, Optimizers, PpoConfig, RewardScaler, Transition,
    UpdateStats,
};
pub use train::{
    greedy_action, reward_improvement, train_rl, ActionLog, EpisodeLog, RlRun, RlTask, TaskStep,
    ToyTracking,
};
