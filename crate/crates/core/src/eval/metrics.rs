use serde::{Deserialize, Serialize};

use crate::expert::Trajectory;
use crate::sim::Termination;

/// Aggregate statistics of a group of episodes.
///
/// The discriminator and reward columns are empty when the episodes were not
/// produced under a model with a discriminator (for example, expert data).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub iteration: usize,
    pub episodes: usize,
    /// Mean `D(s, a)` over expert pairs.
    pub expert_disc_prob: Option<f64>,
    /// Mean `D(s, a)` over generated pairs.
    pub generated_disc_prob: Option<f64>,
    /// Mean over episodes of the summed per-step reward.
    pub total_reward: Option<f64>,
    pub rollout_steps: f64,
    pub decision_steps: f64,
    pub success_ratio: f64,
    pub crash_ratio: f64,
    pub timeout_ratio: f64,
    /// Means over episodes of the per-episode extremes.
    pub max_accel: f64,
    pub min_accel: f64,
    pub max_speed: f64,
    pub min_speed: f64,
}

impl MetricsRecord {
    /// Summarizes finished episodes. Panics if `trajectories` is empty.
    pub fn from_trajectories(iteration: usize, trajectories: &[&Trajectory]) -> Self {
        assert!(!trajectories.is_empty(), "no episodes to summarize");
        let n = trajectories.len();
        let mean = |f: &dyn Fn(&Trajectory) -> f64| {
            trajectories.iter().map(|t| f(t)).sum::<f64>() / n as f64
        };
        let count = |kind: Termination| trajectories.iter().filter(|t| t.termination == kind).count();
        let (success, crash) = (count(Termination::Success), count(Termination::Crash));
        let timeout = n - success - crash;
        Self {
            iteration,
            episodes: n,
            expert_disc_prob: None,
            generated_disc_prob: None,
            total_reward: None,
            rollout_steps: mean(&|t| t.len() as f64),
            decision_steps: mean(&|t| f64::from(t.decision_steps)),
            success_ratio: success as f64 / n as f64,
            crash_ratio: crash as f64 / n as f64,
            timeout_ratio: timeout as f64 / n as f64,
            max_accel: mean(&|t| t.kinematics().max_accel),
            min_accel: mean(&|t| t.kinematics().min_accel),
            max_speed: mean(&|t| t.kinematics().max_speed),
            min_speed: mean(&|t| t.kinematics().min_speed),
        }
    }
}
