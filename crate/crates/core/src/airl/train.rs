use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::eval::MetricsRecord;
use crate::expert::DemoDataset;
use crate::numerics::{trust_region_step, AdamConfig, AdamState, TrustRegionConfig, TrustRegionReport};
use crate::seeds;
use crate::sim::{ActionId, Simulator};

use super::model::{Discriminator, ModelParams, Policy};
use super::objective::{disc_loss_and_grad, disc_prob_from_logit, DiscPair};
use super::rollout::{ActionMode, RolloutBatch};
use super::AirlError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AirlConfig {
    /// Hidden layer widths of the discriminator's `f`.
    pub disc_hidden: Vec<usize>,
    /// Hidden layer widths of the policy.
    pub policy_hidden: Vec<usize>,
    pub disc_adam: AdamConfig,
    pub trust_region: TrustRegionConfig,
    /// Discriminator optimizer steps per iteration (`k_D`).
    pub disc_steps: usize,
    /// Policy trust-region steps per iteration (`k_G`).
    pub policy_steps: usize,
    /// Generated episodes per iteration.
    pub rollout_episodes: usize,
    /// Discriminator minibatch, split evenly between expert and generated pairs.
    pub minibatch: usize,
    pub gamma: f64,
    /// Expert pairs sampled to report the mean expert `D` of an iteration.
    pub metrics_pairs: usize,
    /// Subtract the batch-mean step reward before computing returns.
    pub center_rewards: bool,
    /// Fit a linear value baseline per batch instead of subtracting the mean return.
    pub linear_baseline: bool,
}

impl Default for AirlConfig {
    fn default() -> Self {
        Self {
            disc_hidden: vec![64, 64],
            policy_hidden: vec![64, 64],
            disc_adam: AdamConfig::default(),
            trust_region: TrustRegionConfig::default(),
            disc_steps: 50,
            policy_steps: 1,
            rollout_episodes: 20,
            minibatch: 128,
            gamma: 0.99,
            metrics_pairs: 512,
            center_rewards: true,
            linear_baseline: true,
        }
    }
}

impl AirlConfig {
    pub fn init_params(&self, seed: u64) -> Result<ModelParams, AirlError> {
        Ok(ModelParams::init_with(&self.disc_hidden, &self.policy_hidden, seed)?)
    }

    pub fn validate(&self) -> Result<(), AirlError> {
        let fail = |m: &str| Err(AirlError::InvalidConfig(m.to_string()));
        if self.disc_hidden.iter().chain(&self.policy_hidden).any(|&h| h == 0) {
            return fail("hidden layer widths must be positive");
        }
        if self.disc_steps == 0 || self.policy_steps == 0 {
            return fail("discriminator and policy step counts must be at least 1");
        }
        if self.rollout_episodes == 0 {
            return fail("rollout_episodes must be at least 1");
        }
        if self.minibatch < 2 {
            return fail("minibatch must hold at least one expert and one generated pair");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return fail("gamma must lie in [0, 1]");
        }
        if self.metrics_pairs == 0 {
            return fail("metrics_pairs must be at least 1");
        }
        if !(self.disc_adam.step_size > 0.0) {
            return fail("discriminator step size must be positive");
        }
        self.trust_region.validate()?;
        Ok(())
    }
}

/// An expert state-action pair.
pub type ExpertPair<'a> = (&'a [f64], ActionId);

pub fn expert_pairs(dataset: &DemoDataset) -> Vec<ExpertPair<'_>> {
    dataset
        .trajectories
        .iter()
        .flat_map(|t| t.steps.iter().map(|s| (&s.state[..], s.action)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscUpdateReport {
    pub steps: usize,
    /// Minibatch loss of the last step, before that step was applied.
    pub last_loss: f64,
}

/// Runs `k_d` Adam steps on balanced minibatches drawn with replacement.
///
/// Expert pairs are scored with `policy`'s current log-probabilities;
/// generated pairs carry the behavior log-probabilities stored at rollout.
#[allow(clippy::too_many_arguments)]
pub fn update_discriminator<R: Rng + ?Sized>(
    disc: &mut Discriminator,
    adam: &mut AdamState,
    policy: &Policy,
    expert: &[ExpertPair<'_>],
    generated: &[DiscPair<'_>],
    k_d: usize,
    minibatch: usize,
    rng: &mut R,
) -> Result<DiscUpdateReport, AirlError> {
    if k_d == 0 {
        return Err(AirlError::InvalidConfig(
            "discriminator update needs at least one step".into(),
        ));
    }
    if expert.is_empty() || generated.is_empty() {
        return Err(AirlError::EmptyBatch);
    }
    let half = (minibatch / 2).max(1);
    let mut last_loss = f64::NAN;
    for step in 0..k_d {
        let e: Vec<DiscPair<'_>> = (0..half)
            .map(|_| {
                let (state, action) = expert[rng.gen_range(0..expert.len())];
                Ok(DiscPair {
                    state,
                    action,
                    log_pi: policy.log_prob(state, action)?,
                })
            })
            .collect::<Result<_, AirlError>>()?;
        let g: Vec<DiscPair<'_>> = (0..half)
            .map(|_| generated[rng.gen_range(0..generated.len())])
            .collect();
        let (loss, grad) = disc_loss_and_grad(disc, &e, &g)?;
        if !loss.is_finite() {
            return Err(AirlError::NonFinite {
                what: "discriminator loss",
                detail: format!("step {step} of {k_d}, loss {loss}"),
            });
        }
        let mut params = disc.net.params().to_vec();
        adam.step(&mut params, &grad)?;
        disc.net.set_params(&params)?;
        last_loss = loss;
    }
    Ok(DiscUpdateReport {
        steps: k_d,
        last_loss,
    })
}

/// Runs `k_g` trust-region steps on the batch's advantages.
pub fn update_policy(
    policy: &mut Policy,
    batch: &RolloutBatch,
    k_g: usize,
    config: &TrustRegionConfig,
) -> Result<Vec<TrustRegionReport>, AirlError> {
    if k_g == 0 {
        return Err(AirlError::InvalidConfig(
            "policy update needs at least one step".into(),
        ));
    }
    let pb = batch.policy_batch();
    (0..k_g)
        .map(|_| Ok(trust_region_step(&mut policy.net, &pb, config)?))
        .collect()
}

/// Per-iteration record of an inner run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub metrics: MetricsRecord,
    pub disc_loss: f64,
    /// Discriminator optimizer steps taken this iteration.
    pub disc_steps: usize,
    /// Policy trust-region steps attempted this iteration.
    pub policy_steps: usize,
    pub policy_accepted: usize,
    /// Largest batch KL among accepted policy steps (0 if none).
    pub policy_kl: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerRun {
    pub params: ModelParams,
    pub stats: Vec<IterationStats>,
}

/// Trains `params` on one task for `iterations` rounds of rollout,
/// discriminator update, reward assignment, and policy update.
///
/// Discriminator optimizer state starts fresh on every call.
pub fn inner_train(
    sim: &Simulator,
    params: &ModelParams,
    expert: &DemoDataset,
    iterations: usize,
    config: &AirlConfig,
    seed: u64,
) -> Result<InnerRun, AirlError> {
    train_pooled(&[sim], params, &expert_pairs(expert), iterations, config, seed)
}

/// Like `inner_train`, but with expert pairs pooled from several tasks and
/// rollout episodes spread round-robin over their simulators.
pub fn train_pooled(
    sims: &[&Simulator],
    params: &ModelParams,
    pool: &[ExpertPair<'_>],
    iterations: usize,
    config: &AirlConfig,
    seed: u64,
) -> Result<InnerRun, AirlError> {
    config.validate()?;
    if pool.is_empty() {
        return Err(AirlError::EmptyExpertData);
    }
    if sims.is_empty() {
        return Err(AirlError::InvalidConfig("no simulator to roll out in".into()));
    }
    let mut params = params.clone();
    let mut adam = AdamState::new(params.discriminator.net.num_params(), config.disc_adam);
    let mut stats = Vec::with_capacity(iterations);
    for it in 0..iterations {
        let s = inner_iteration(sims, &mut params, &mut adam, pool, config, seed, it).map_err(
            |e| AirlError::AtIteration {
                iteration: it,
                source: Box::new(e),
            },
        )?;
        stats.push(s);
    }
    Ok(InnerRun { params, stats })
}

fn inner_iteration(
    sims: &[&Simulator],
    params: &mut ModelParams,
    adam: &mut AdamState,
    pool: &[ExpertPair<'_>],
    config: &AirlConfig,
    seed: u64,
    it: usize,
) -> Result<IterationStats, AirlError> {
    let it_seed = seeds::derive(seed, seeds::stream_id("iteration"), it as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(it_seed, seeds::stream_id("disc"), 0));
    let mut batch = RolloutBatch::collect_mixed(
        &params.policy,
        sims,
        config.rollout_episodes,
        it_seed,
        ActionMode::Sample,
    )?;

    // Scored by the discriminator the rollouts were collected against.
    let disc = &params.discriminator;
    let mut expert_d = 0.0;
    for _ in 0..config.metrics_pairs {
        let (state, action) = pool[rng.gen_range(0..pool.len())];
        expert_d += disc_prob_from_logit(
            disc.logit(state, action)?,
            params.policy.log_prob(state, action)?,
        );
    }
    expert_d /= config.metrics_pairs as f64;
    let generated = batch.pairs();
    let mut generated_d = 0.0;
    for p in &generated {
        generated_d += disc_prob_from_logit(disc.logit(p.state, p.action)?, p.log_pi);
    }
    generated_d /= generated.len() as f64;

    let adam_before = adam.steps();
    let report = update_discriminator(
        &mut params.discriminator,
        adam,
        &params.policy,
        pool,
        &generated,
        config.disc_steps,
        config.minibatch,
        &mut rng,
    )?;
    let disc_steps = (adam.steps() - adam_before) as usize;

    batch.assign_rewards(&params.discriminator)?;
    let total_reward =
        batch.episodes.iter().map(|e| e.total_reward()).sum::<f64>() / batch.episodes.len() as f64;
    if config.center_rewards {
        batch.center_rewards();
    }
    if config.linear_baseline {
        batch.compute_advantages_linear(config.gamma)?;
    } else {
        batch.compute_advantages(config.gamma);
    }
    let reports = update_policy(
        &mut params.policy,
        &batch,
        config.policy_steps,
        &config.trust_region,
    )?;
    if !params.is_finite() {
        return Err(AirlError::NonFinite {
            what: "parameters",
            detail: "after update".into(),
        });
    }

    let mut metrics = MetricsRecord::from_trajectories(it, &batch.trajectories());
    metrics.expert_disc_prob = Some(expert_d);
    metrics.generated_disc_prob = Some(generated_d);
    metrics.total_reward = Some(total_reward);
    let accepted: Vec<_> = reports.iter().filter(|r| r.accepted()).collect();
    Ok(IterationStats {
        metrics,
        disc_loss: report.last_loss,
        disc_steps,
        policy_steps: reports.len(),
        policy_accepted: accepted.len(),
        policy_kl: accepted.iter().map(|r| r.kl).fold(0.0, f64::max),
    })
}
