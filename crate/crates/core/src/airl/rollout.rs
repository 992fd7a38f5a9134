use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::expert::{run_episode, Trajectory};
use crate::numerics::{ridge_regression, NumericsError, PolicyBatch};
use crate::seeds;
use crate::sim::{ActionId, Simulator};

use super::model::{Discriminator, Policy};
use super::objective::{reward_from_logit, DiscPair};
use super::AirlError;

const BASELINE_RIDGE: f64 = 1e-5;
const TIME_SCALE: f64 = 100.0;

fn baseline_features(state: &[f64], t: usize) -> Vec<f64> {
    let tau = t as f64 / TIME_SCALE;
    let mut x = Vec::with_capacity(2 * state.len() + 4);
    x.extend_from_slice(state);
    x.extend(state.iter().map(|v| v * v));
    x.extend([tau, tau * tau, tau * tau * tau, 1.0]);
    x
}

/// How a policy picks actions during a rollout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionMode {
    Sample,
    Greedy,
}

/// One generated episode with the behavior policy's log-probability of
/// every chosen action.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub trajectory: Trajectory,
    pub log_probs: Vec<f64>,
    /// Filled in by `RolloutBatch::assign_rewards`.
    pub rewards: Vec<f64>,
}

impl Episode {
    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

/// Simulator seed of episode `index` in a group seeded with `seed`.
pub fn episode_seed(seed: u64, index: usize) -> u64 {
    seeds::derive(seed, seeds::stream_id("episode"), index as u64)
}

pub fn rollout_episode(
    policy: &Policy,
    sim: &Simulator,
    seed: u64,
    index: usize,
    mode: ActionMode,
) -> Result<Episode, AirlError> {
    let mut rng =
        ChaCha8Rng::seed_from_u64(seeds::derive(seed, seeds::stream_id("actions"), index as u64));
    let mut log_probs = Vec::new();
    let mut failure: Option<NumericsError> = None;
    let fallback = ActionId::new(0).expect("action 0 exists");
    let trajectory = run_episode(sim, episode_seed(seed, index), |_, state| {
        let picked = match mode {
            ActionMode::Sample => policy.sample(state, &mut rng),
            ActionMode::Greedy => policy.greedy(state),
        };
        match picked {
            Ok((a, lp)) => {
                log_probs.push(lp);
                a
            }
            Err(e) => {
                failure.get_or_insert(e);
                log_probs.push(0.0);
                fallback
            }
        }
    })?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    Ok(Episode {
        trajectory,
        log_probs,
        rewards: Vec::new(),
    })
}

/// Generated episodes from one policy, with rewards and advantages once assigned.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBatch {
    pub episodes: Vec<Episode>,
    /// Per-step advantages, flattened in episode order.
    pub advantages: Vec<f64>,
}

impl RolloutBatch {
    /// Rolls out `count` episodes in parallel; the result depends only on the arguments.
    pub fn collect(
        policy: &Policy,
        sim: &Simulator,
        count: usize,
        seed: u64,
        mode: ActionMode,
    ) -> Result<Self, AirlError> {
        Self::collect_mixed(policy, &[sim], count, seed, mode)
    }

    /// Episode `i` runs in `sims[i % sims.len()]`.
    pub fn collect_mixed(
        policy: &Policy,
        sims: &[&Simulator],
        count: usize,
        seed: u64,
        mode: ActionMode,
    ) -> Result<Self, AirlError> {
        let episodes = (0..count)
            .into_par_iter()
            .map(|i| rollout_episode(policy, sims[i % sims.len()], seed, i, mode))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            episodes,
            advantages: Vec::new(),
        })
    }

    pub fn num_steps(&self) -> usize {
        self.episodes.iter().map(|e| e.trajectory.len()).sum()
    }

    pub fn trajectories(&self) -> Vec<&Trajectory> {
        self.episodes.iter().map(|e| &e.trajectory).collect()
    }

    /// Every generated pair with its stored behavior log-probability.
    pub fn pairs(&self) -> Vec<DiscPair<'_>> {
        self.episodes
            .iter()
            .flat_map(|e| {
                e.trajectory
                    .steps
                    .iter()
                    .zip(&e.log_probs)
                    .map(|(s, &lp)| DiscPair {
                        state: &s.state,
                        action: s.action,
                        log_pi: lp,
                    })
            })
            .collect()
    }

    /// Sets `r = log D - log(1 - D)` for every step, using the stored
    /// behavior log-probabilities.
    pub fn assign_rewards(&mut self, disc: &Discriminator) -> Result<(), AirlError> {
        for ep in &mut self.episodes {
            ep.rewards = ep
                .trajectory
                .steps
                .iter()
                .zip(&ep.log_probs)
                .map(|(s, &lp)| Ok(reward_from_logit(disc.logit(&s.state, s.action)?, lp)))
                .collect::<Result<_, NumericsError>>()?;
            if let Some(i) = ep.rewards.iter().position(|r| !r.is_finite()) {
                return Err(AirlError::NonFinite {
                    what: "reward",
                    detail: format!("episode seed {} step {i}", ep.trajectory.seed),
                });
            }
        }
        Ok(())
    }

    /// Shifts every step reward by the batch mean so the rewards average zero.
    pub fn center_rewards(&mut self) {
        let n = self.num_steps();
        if n == 0 {
            return;
        }
        let mean = self.episodes.iter().map(|e| e.total_reward()).sum::<f64>() / n as f64;
        for ep in &mut self.episodes {
            for r in &mut ep.rewards {
                *r -= mean;
            }
        }
    }

    /// Discounted return-to-go minus its mean over all steps of the batch.
    pub fn compute_advantages(&mut self, gamma: f64) {
        let mut returns = Vec::with_capacity(self.num_steps());
        for ep in &self.episodes {
            let mut g = 0.0;
            let mut rtg = vec![0.0; ep.rewards.len()];
            for (t, r) in ep.rewards.iter().enumerate().rev() {
                g = r + gamma * g;
                rtg[t] = g;
            }
            returns.extend(rtg);
        }
        let mean = if returns.is_empty() {
            0.0
        } else {
            returns.iter().sum::<f64>() / returns.len() as f64
        };
        self.advantages = returns.into_iter().map(|g| g - mean).collect();
    }

    /// Discounted return-to-go minus a linear value estimate fitted to this
    /// batch on state, squared state, and a cubic in the time step.
    pub fn compute_advantages_linear(&mut self, gamma: f64) -> Result<(), AirlError> {
        let mut rows = Vec::with_capacity(self.num_steps());
        let mut returns = Vec::with_capacity(self.num_steps());
        for ep in &self.episodes {
            let mut g = 0.0;
            let mut rtg = vec![0.0; ep.rewards.len()];
            for (t, r) in ep.rewards.iter().enumerate().rev() {
                g = r + gamma * g;
                rtg[t] = g;
            }
            returns.extend(rtg);
            for (t, step) in ep.trajectory.steps.iter().enumerate() {
                rows.push(baseline_features(&step.state, t));
            }
        }
        if returns.is_empty() {
            self.advantages = Vec::new();
            return Ok(());
        }
        let w = ridge_regression(&rows, &returns, BASELINE_RIDGE)?;
        self.advantages = rows
            .iter()
            .zip(&returns)
            .map(|(x, g)| g - x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        Ok(())
    }

    pub fn policy_batch(&self) -> PolicyBatch<'_> {
        let mut batch = PolicyBatch::default();
        for ep in &self.episodes {
            for (s, &lp) in ep.trajectory.steps.iter().zip(&ep.log_probs) {
                batch.states.push(&s.state);
                batch.actions.push(s.action.index());
                batch.behavior_probs.push(lp.exp());
            }
        }
        batch.advantages = self.advantages.clone();
        batch
    }
}
