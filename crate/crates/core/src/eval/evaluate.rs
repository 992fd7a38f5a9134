use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::airl::{disc_prob_from_logit, rollout_episode, ActionMode, AirlError, ModelParams};
use crate::expert::{oracle_action, run_episode, Kinematics, Trajectory};
use crate::sim::Simulator;

use super::MetricsRecord;

/// Metrics of an evaluation together with its per-episode raw values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub metrics: MetricsRecord,
    pub kinematics: Vec<Kinematics>,
    /// Per-episode summed reward under the model's own discriminator.
    pub total_rewards: Option<Vec<f64>>,
}

/// Rolls out `episodes` episodes of `params`' policy and scores them with
/// its own discriminator. Episode `i` uses the same scene for every model
/// evaluated with the same `seed`.
pub fn evaluate(
    params: &ModelParams,
    sim: &Simulator,
    episodes: usize,
    seed: u64,
    mode: ActionMode,
) -> Result<Evaluation, AirlError> {
    if episodes == 0 {
        return Err(AirlError::InvalidConfig("evaluation needs at least one episode".into()));
    }
    let disc = &params.discriminator;
    let rolled = (0..episodes)
        .into_par_iter()
        .map(|i| {
            let ep = rollout_episode(&params.policy, sim, seed, i, mode)?;
            let mut total = 0.0;
            let mut d = 0.0;
            for (s, &lp) in ep.trajectory.steps.iter().zip(&ep.log_probs) {
                let f = disc.logit(&s.state, s.action)?;
                total += crate::airl::reward_from_logit(f, lp);
                d += disc_prob_from_logit(f, lp);
            }
            Ok((ep.trajectory, total, d))
        })
        .collect::<Result<Vec<_>, AirlError>>()?;
    let trajectories: Vec<&Trajectory> = rolled.iter().map(|(t, _, _)| t).collect();
    let mut metrics = MetricsRecord::from_trajectories(0, &trajectories);
    let totals: Vec<f64> = rolled.iter().map(|(_, r, _)| *r).collect();
    let steps: usize = trajectories.iter().map(|t| t.len()).sum();
    metrics.total_reward = Some(totals.iter().sum::<f64>() / episodes as f64);
    metrics.generated_disc_prob = Some(rolled.iter().map(|(_, _, d)| d).sum::<f64>() / steps as f64);
    Ok(Evaluation {
        metrics,
        kinematics: trajectories.iter().map(|t| t.kinematics()).collect(),
        total_rewards: Some(totals),
    })
}

/// Evaluates the rule-based expert of `sim`'s task on the same scenes.
pub fn evaluate_oracle(sim: &Simulator, episodes: usize, seed: u64) -> Result<Evaluation, AirlError> {
    if episodes == 0 {
        return Err(AirlError::InvalidConfig("evaluation needs at least one episode".into()));
    }
    let task = sim.task().clone();
    let env = *sim.env();
    let trajectories = (0..episodes)
        .into_par_iter()
        .map(|i| {
            run_episode(sim, crate::airl::episode_seed(seed, i), |scene, _| {
                oracle_action(scene, &task, &env)
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<&Trajectory> = trajectories.iter().collect();
    Ok(Evaluation {
        metrics: MetricsRecord::from_trajectories(0, &refs),
        kinematics: trajectories.iter().map(|t| t.kinematics()).collect(),
        total_rewards: None,
    })
}
