use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::airl::ModelParams;
use crate::seeds;

use super::MetaError;

/// Parameters made of independently interpolated groups of coordinates.
pub trait ParamGroups: Clone + Send + Sync {
    fn groups(&self) -> Vec<&[f64]>;
    fn with_groups(&self, groups: Vec<Vec<f64>>) -> Result<Self, MetaError>;
}

impl ParamGroups for ModelParams {
    fn groups(&self) -> Vec<&[f64]> {
        vec![
            self.discriminator.net.params(),
            self.policy.net.params(),
        ]
    }

    fn with_groups(&self, groups: Vec<Vec<f64>>) -> Result<Self, MetaError> {
        let [disc, policy]: [Vec<f64>; 2] = groups
            .try_into()
            .map_err(|g: Vec<Vec<f64>>| MetaError::ShapeMismatch(format!("{} groups", g.len())))?;
        let mut out = self.clone();
        out.discriminator.net.set_params(&disc)?;
        out.policy.net.set_params(&policy)?;
        Ok(out)
    }
}

/// `theta + beta_g * mean(result - theta)` applied to each group `g` separately.
pub fn reptile_update<P: ParamGroups>(
    theta: &P,
    results: &[P],
    betas: &[f64],
) -> Result<P, MetaError> {
    if results.is_empty() {
        return Err(MetaError::NoResults);
    }
    let base = theta.groups();
    if betas.len() != base.len() {
        return Err(MetaError::ShapeMismatch(format!(
            "{} meta rates for {} parameter groups",
            betas.len(),
            base.len()
        )));
    }
    let result_groups: Vec<Vec<&[f64]>> = results.iter().map(|r| r.groups()).collect();
    for (i, rg) in result_groups.iter().enumerate() {
        let ok = rg.len() == base.len() && rg.iter().zip(&base).all(|(a, b)| a.len() == b.len());
        if !ok {
            return Err(MetaError::ShapeMismatch(format!(
                "task result {i} does not match the meta parameters"
            )));
        }
    }
    let n = results.len() as f64;
    let groups = base
        .iter()
        .enumerate()
        .map(|(g, theta_g)| {
            let beta = betas[g];
            theta_g
                .iter()
                .enumerate()
                .map(|(k, &t)| {
                    let mean_delta = result_groups.iter().map(|r| r[g][k] - t).sum::<f64>() / n;
                    t + beta * mean_delta
                })
                .collect()
        })
        .collect();
    theta.with_groups(groups)
}

/// Per-task training used by the outer loop.
pub trait InnerLoop: Sync {
    type Params: ParamGroups;
    type Report: Send;

    fn num_tasks(&self) -> usize;
    fn task_name(&self, task: usize) -> String;
    fn train(
        &self,
        task: usize,
        params: &Self::Params,
        seed: u64,
    ) -> Result<(Self::Params, Self::Report), MetaError>;
}

/// Tasks for one meta iteration: every task once, in order, when `n` equals
/// the task count; otherwise `n` uniform draws with replacement.
pub fn sample_tasks<R: Rng + ?Sized>(rng: &mut R, num_tasks: usize, n: usize) -> Vec<usize> {
    if n == num_tasks {
        (0..num_tasks).collect()
    } else {
        (0..n).map(|_| rng.gen_range(0..num_tasks)).collect()
    }
}

#[derive(Debug)]
pub struct TaskOutcome<R> {
    pub task: usize,
    pub result: Result<R, MetaError>,
}

/// State of an outer loop between iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaState<P> {
    pub params: P,
    /// Completed meta iterations.
    pub iteration: usize,
    pub rng: ChaCha8Rng,
}

impl<P> MetaState<P> {
    pub fn new(params: P, seed: u64) -> Self {
        Self {
            params,
            iteration: 0,
            rng: ChaCha8Rng::seed_from_u64(seeds::derive(seed, seeds::stream_id("tasks"), 0)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuterConfig {
    pub tasks_per_iteration: usize,
    /// Meta learning rate of each parameter group.
    pub betas: Vec<f64>,
    pub seed: u64,
}

/// Runs one meta iteration: sample tasks, train each from the current
/// parameters in parallel, and move toward the successful results.
///
/// Failed tasks are skipped; the iteration fails only if every task does.
pub fn meta_step<L: InnerLoop>(
    inner: &L,
    state: &mut MetaState<L::Params>,
    config: &OuterConfig,
) -> Result<Vec<TaskOutcome<L::Report>>, MetaError> {
    let tasks = sample_tasks(&mut state.rng, inner.num_tasks(), config.tasks_per_iteration);
    let iteration_seed = seeds::derive(
        config.seed,
        seeds::stream_id("meta-iteration"),
        state.iteration as u64,
    );
    let theta = &state.params;
    let results: Vec<_> = tasks
        .par_iter()
        .enumerate()
        .map(|(slot, &task)| inner.train(task, theta, seeds::mix(iteration_seed ^ slot as u64)))
        .collect();
    let mut adapted = Vec::with_capacity(results.len());
    let mut outcomes = Vec::with_capacity(results.len());
    for (task, r) in tasks.iter().copied().zip(results) {
        match r {
            Ok((p, report)) => {
                adapted.push(p);
                outcomes.push(TaskOutcome {
                    task,
                    result: Ok(report),
                });
            }
            Err(e) => {
                log::warn!(
                    "meta iteration {}: task '{}' failed and is skipped: {e}",
                    state.iteration,
                    inner.task_name(task)
                );
                outcomes.push(TaskOutcome {
                    task,
                    result: Err(e),
                });
            }
        }
    }
    if adapted.is_empty() {
        let reason = outcomes
            .iter()
            .find_map(|o| o.result.as_ref().err())
            .map(|e| e.to_string())
            .unwrap_or_default();
        return Err(MetaError::AllTasksFailed {
            iteration: state.iteration,
            reason,
        });
    }
    state.params = reptile_update(&state.params, &adapted, &config.betas)?;
    state.iteration += 1;
    Ok(outcomes)
}
