//! REPTILE meta-learning around the AIRL inner loop, adaptation, and baselines.

mod checkpoint;
mod reptile;
mod train;

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use reptile::{
    meta_step, reptile_update, sample_tasks, InnerLoop, MetaState, OuterConfig, ParamGroups,
    TaskOutcome,
};
pub use train::{
    adapt, initial_checkpoint, meta_train, train_pretrained, train_scratch, MetaObserver,
    MetaRecorder, OnlineTest, TrainingTask,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::airl::{AirlConfig, AirlError};
use crate::numerics::NumericsError;
use crate::persist::PersistError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetaConfig {
    /// Meta iterations `M`.
    pub iterations: usize,
    /// Tasks sampled per meta iteration `N`.
    pub tasks_per_iteration: usize,
    /// AIRL iterations per sampled task `K`.
    pub inner_iterations: usize,
    /// Meta learning rate of the discriminator.
    pub beta_disc: f64,
    /// Meta learning rate of the policy.
    pub beta_policy: f64,
    pub seed: u64,
    /// Checkpoint cadence in meta iterations (0 disables intermediate checkpoints).
    pub checkpoint_every: usize,
    /// Online-test cadence in meta iterations (0 disables).
    pub online_every: usize,
    /// AIRL iterations used when adapting to a new task.
    pub adapt_iterations: usize,
    pub airl: AirlConfig,
}

impl Default for MetaConfig {
    fn default() -> Self {
        Self {
            iterations: 2500,
            tasks_per_iteration: 2,
            inner_iterations: 1,
            beta_disc: 0.5,
            beta_policy: 0.25,
            seed: 0,
            checkpoint_every: 100,
            online_every: 25,
            adapt_iterations: 10,
            airl: AirlConfig::default(),
        }
    }
}

impl MetaConfig {
    pub fn validate(&self) -> Result<(), MetaError> {
        let fail = |m: &str| Err(MetaError::InvalidConfig(m.to_string()));
        if self.iterations == 0 || self.tasks_per_iteration == 0 || self.inner_iterations == 0 {
            return fail("iterations, tasks_per_iteration and inner_iterations must be at least 1");
        }
        for (name, b) in [("beta_disc", self.beta_disc), ("beta_policy", self.beta_policy)] {
            if !(b > 0.0 && b <= 1.0) {
                return fail(&format!("{name} must lie in (0, 1], got {b}"));
            }
        }
        self.airl.validate()?;
        Ok(())
    }

    /// Whether a run under `other` can be continued under `self`: everything
    /// except the iteration count and reporting cadences must agree.
    pub fn resumable_from(&self, other: &MetaConfig) -> bool {
        let strip = |c: &MetaConfig| MetaConfig {
            iterations: 0,
            checkpoint_every: 0,
            online_every: 0,
            ..c.clone()
        };
        strip(self) == strip(other)
    }
}

#[derive(Debug, Error)]
pub enum MetaError {
    #[error("invalid meta configuration: {0}")]
    InvalidConfig(String),
    #[error("meta-training needs at least one task")]
    NoTasks,
    #[error("task '{0}' has no demonstrations")]
    NoDemos(String),
    #[error("no task results to aggregate")]
    NoResults,
    #[error("parameter shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("every task failed in meta iteration {iteration}: {reason}")]
    AllTasksFailed { iteration: usize, reason: String },
    #[error("checkpoint was produced under a different configuration")]
    ConfigMismatch,
    #[error(transparent)]
    Airl(#[from] AirlError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Persist(#[from] PersistError),
}
