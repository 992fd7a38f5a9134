use crate::airl::{
    expert_pairs, inner_train, train_pooled, ActionMode, AirlConfig, ExpertPair, InnerRun,
    IterationStats, ModelParams,
};
use crate::eval::{evaluate, MetricsRecord};
use crate::expert::DemoDataset;
use crate::seeds;
use crate::sim::Simulator;

use super::reptile::{meta_step, InnerLoop, MetaState, OuterConfig};
use super::{Checkpoint, MetaConfig, MetaError, CHECKPOINT_VERSION};

/// A meta-training task: its simulator (which carries the driving style)
/// and expert demonstrations.
#[derive(Clone, Copy)]
pub struct TrainingTask<'a> {
    pub sim: &'a Simulator,
    pub demos: &'a DemoDataset,
}

impl TrainingTask<'_> {
    pub fn name(&self) -> &str {
        self.sim.task().name()
    }
}

/// Held-out task used to adapt-then-evaluate a copy of the meta parameters
/// during training.
#[derive(Clone, Copy)]
pub struct OnlineTest<'a> {
    pub task: TrainingTask<'a>,
    pub episodes: usize,
    pub seed: u64,
}

/// Receives progress from `meta_train`. Every method defaults to a no-op.
pub trait MetaObserver {
    fn inner_stats(
        &mut self,
        _meta_iteration: usize,
        _task: &str,
        _stats: &IterationStats,
    ) -> Result<(), MetaError> {
        Ok(())
    }

    fn online_test(&mut self, _meta_iteration: usize, _metrics: &MetricsRecord) -> Result<(), MetaError> {
        Ok(())
    }

    fn checkpoint(&mut self, _checkpoint: &Checkpoint) -> Result<(), MetaError> {
        Ok(())
    }
}

/// Observer that keeps everything in memory.
#[derive(Debug, Default, Clone)]
pub struct MetaRecorder {
    pub inner: Vec<(usize, String, IterationStats)>,
    pub online: Vec<(usize, MetricsRecord)>,
    pub checkpoints: Vec<Checkpoint>,
}

impl MetaObserver for MetaRecorder {
    fn inner_stats(&mut self, it: usize, task: &str, stats: &IterationStats) -> Result<(), MetaError> {
        self.inner.push((it, task.to_string(), stats.clone()));
        Ok(())
    }

    fn online_test(&mut self, it: usize, metrics: &MetricsRecord) -> Result<(), MetaError> {
        self.online.push((it, metrics.clone()));
        Ok(())
    }

    fn checkpoint(&mut self, checkpoint: &Checkpoint) -> Result<(), MetaError> {
        self.checkpoints.push(checkpoint.clone());
        Ok(())
    }
}

struct AirlInner<'a> {
    tasks: &'a [TrainingTask<'a>],
    iterations: usize,
    config: &'a AirlConfig,
}

impl InnerLoop for AirlInner<'_> {
    type Params = ModelParams;
    type Report = Vec<IterationStats>;

    fn num_tasks(&self) -> usize {
        self.tasks.len()
    }

    fn task_name(&self, task: usize) -> String {
        self.tasks[task].name().to_string()
    }

    fn train(
        &self,
        task: usize,
        params: &ModelParams,
        seed: u64,
    ) -> Result<(ModelParams, Vec<IterationStats>), MetaError> {
        let t = &self.tasks[task];
        let run = inner_train(t.sim, params, t.demos, self.iterations, self.config, seed)?;
        Ok((run.params, run.stats))
    }
}

/// Fresh meta-training state for `config`.
pub fn initial_checkpoint(config: &MetaConfig) -> Result<Checkpoint, MetaError> {
    config.validate()?;
    let params = config.airl.init_params(config.seed)?;
    let state = MetaState::new(params, config.seed);
    Ok(Checkpoint {
        params: state.params,
        config: config.clone(),
        iteration: 0,
        rng: state.rng,
        label: "meta".into(),
        version: CHECKPOINT_VERSION,
    })
}

/// REPTILE meta-training of AIRL over `tasks`.
///
/// Starts from `start` (see `initial_checkpoint`) and runs until
/// `config.iterations` meta iterations are complete, so a checkpoint taken
/// mid-run resumes to the same result as an uninterrupted run.
pub fn meta_train(
    tasks: &[TrainingTask<'_>],
    config: &MetaConfig,
    online: Option<&OnlineTest<'_>>,
    start: Checkpoint,
    observer: &mut dyn MetaObserver,
) -> Result<Checkpoint, MetaError> {
    config.validate()?;
    if tasks.is_empty() {
        return Err(MetaError::NoTasks);
    }
    if !config.resumable_from(&start.config) {
        return Err(MetaError::ConfigMismatch);
    }
    if start.iteration > config.iterations {
        return Err(MetaError::ConfigMismatch);
    }
    let inner = AirlInner {
        tasks,
        iterations: config.inner_iterations,
        config: &config.airl,
    };
    let outer = OuterConfig {
        tasks_per_iteration: config.tasks_per_iteration,
        betas: vec![config.beta_disc, config.beta_policy],
        seed: config.seed,
    };
    let mut state = MetaState {
        params: start.params,
        iteration: start.iteration,
        rng: start.rng,
    };
    let snapshot = |state: &MetaState<ModelParams>| Checkpoint {
        params: state.params.clone(),
        config: config.clone(),
        iteration: state.iteration,
        rng: state.rng.clone(),
        label: "meta".into(),
        version: CHECKPOINT_VERSION,
    };
    while state.iteration < config.iterations {
        let it = state.iteration;
        let outcomes = meta_step(&inner, &mut state, &outer)?;
        for o in &outcomes {
            if let Ok(stats) = &o.result {
                for s in stats {
                    observer.inner_stats(it, tasks[o.task].name(), s)?;
                }
            }
        }
        let done = state.iteration;
        if let Some(test) = online {
            if config.online_every > 0 && done % config.online_every == 0 {
                let metrics = online_test(&state.params, test, config, done)?;
                observer.online_test(done, &metrics)?;
            }
        }
        if (config.checkpoint_every > 0 && done % config.checkpoint_every == 0)
            || done == config.iterations
        {
            observer.checkpoint(&snapshot(&state))?;
        }
    }
    Ok(snapshot(&state))
}

fn online_test(
    params: &ModelParams,
    test: &OnlineTest<'_>,
    config: &MetaConfig,
    iteration: usize,
) -> Result<MetricsRecord, MetaError> {
    let seed = seeds::derive(test.seed, seeds::stream_id("online"), iteration as u64);
    let adapted = adapt(
        params,
        test.task,
        config.adapt_iterations,
        &config.airl,
        seed,
    )?;
    let mut eval = evaluate(
        &adapted.params,
        test.task.sim,
        test.episodes,
        test.seed,
        ActionMode::Sample,
    )?;
    eval.metrics.iteration = iteration;
    Ok(eval.metrics)
}

/// Fine-tunes a copy of `params` on a target task's demonstrations.
pub fn adapt(
    params: &ModelParams,
    task: TrainingTask<'_>,
    iterations: usize,
    config: &AirlConfig,
    seed: u64,
) -> Result<InnerRun, MetaError> {
    if task.demos.is_empty() {
        return Err(MetaError::NoDemos(task.name().to_string()));
    }
    Ok(inner_train(task.sim, params, task.demos, iterations, config, seed)?)
}

/// AIRL from freshly initialized parameters on the target task alone.
pub fn train_scratch(
    task: TrainingTask<'_>,
    iterations: usize,
    config: &AirlConfig,
    seed: u64,
) -> Result<InnerRun, MetaError> {
    let init = config.init_params(seed)?;
    adapt(&init, task, iterations, config, seeds::mix(seed))
}

/// One AIRL run over the demonstrations of all `tasks` pooled together,
/// with rollouts spread across their simulators.
pub fn train_pretrained(
    tasks: &[TrainingTask<'_>],
    iterations: usize,
    config: &AirlConfig,
    seed: u64,
) -> Result<InnerRun, MetaError> {
    if tasks.is_empty() {
        return Err(MetaError::NoTasks);
    }
    let pool: Vec<ExpertPair<'_>> = tasks.iter().flat_map(|t| expert_pairs(t.demos)).collect();
    let sims: Vec<&Simulator> = tasks.iter().map(|t| t.sim).collect();
    let init = config.init_params(seed)?;
    Ok(train_pooled(&sims, &init, &pool, iterations, config, seeds::mix(seed))?)
}
