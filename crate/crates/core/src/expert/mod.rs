//! Rule-based experts for each driving style and their demonstration datasets.

mod dataset;
mod oracle;
mod task;
mod trajectory;

pub use dataset::{
    generate_demos, load_dataset, save_dataset, DemoDataset, DATASET_MAGIC, DATASET_VERSION,
};
pub use oracle::{assess_gaps, choose_gap, oracle_action, GapAssessment, REACH_TIME};
pub use task::{Style, TaskSpec};
pub use trajectory::{run_episode, Kinematics, Trajectory, TrajectoryStep};

use thiserror::Error;

use crate::persist::PersistError;
use crate::sim::SimError;

#[derive(Debug, Error)]
pub enum ExpertError {
    #[error("unknown driving style '{0}' (expected conservative, neutral or aggressive)")]
    UnknownStyle(String),
    #[error("invalid task specification: {0}")]
    InvalidTask(String),
    #[error("demonstration count must be at least 1, got {0}")]
    InvalidCount(usize),
    #[error(
        "oracle for '{task}' succeeded in only {successes} of {attempts} episodes \
         ({requested} requested); check the task and environment settings"
    )]
    LowSuccessRate {
        task: String,
        successes: usize,
        attempts: usize,
        requested: usize,
    },
    #[error("trajectory {index} belongs to task '{found}', dataset is for '{expected}'")]
    TaskMismatch {
        expected: String,
        found: String,
        index: usize,
    },
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Persist(#[from] PersistError),
}
