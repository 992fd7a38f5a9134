//! Adversarial inverse reinforcement learning on the lane-change task.

mod model;
mod objective;
mod rollout;
mod train;

pub use model::{Discriminator, ModelParams, Policy, DISC_INPUT_DIM};
pub use objective::{
    disc_loss, disc_loss_and_grad, disc_prob, disc_prob_from_logit, log_sigmoid, reward,
    reward_from_logit, softplus, DiscPair,
};
pub use rollout::{episode_seed, rollout_episode, ActionMode, Episode, RolloutBatch};
pub use train::{
    expert_pairs, inner_train, train_pooled, update_discriminator, update_policy, AirlConfig, DiscUpdateReport,
    ExpertPair, InnerRun, IterationStats,
};

use thiserror::Error;

use crate::numerics::NumericsError;
use crate::sim::SimError;

#[derive(Debug, Error)]
pub enum AirlError {
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("expert dataset holds no state-action pairs")]
    EmptyExpertData,
    #[error("discriminator update needs nonempty expert and generated batches")]
    EmptyBatch,
    #[error("non-finite {what} ({detail})")]
    NonFinite { what: &'static str, detail: String },
    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<AirlError>,
    },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Sim(#[from] SimError),
}
