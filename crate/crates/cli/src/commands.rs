use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use log::info;
use metairl::airl::{ActionMode, IterationStats, ModelParams};
use metairl::eval::{compare_models, evaluate as eval_model, evaluate_oracle, MetricsRecord};
use metairl::expert::{generate_demos, load_dataset, save_dataset, DemoDataset};
use metairl::meta::{
    self, initial_checkpoint, Checkpoint, MetaError, MetaObserver, OnlineTest, TrainingTask,
    CHECKPOINT_VERSION,
};
use metairl::seeds;
use metairl::sim::Simulator;

use crate::artifacts::{
    latest_checkpoint, truncate_rows, write_csv, write_json, CsvAppender, InnerRow, Layout,
    MetricsRow,
};
use crate::config::RunConfig;
use crate::{Baseline, GlobalArgs, Mode, Profile};

/// Invalid invocation or configuration; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub struct Context {
    pub config: RunConfig,
    pub layout: Layout,
}

impl Context {
    pub fn new(g: &GlobalArgs) -> Result<Self> {
        let mut config = match &g.config {
            Some(path) => RunConfig::load(path).map_err(|e| usage(format!("{e:#}")))?,
            None => match g.profile {
                Profile::Desk => RunConfig::desk(),
                Profile::Full => RunConfig::full(),
            },
        };
        if let Some(dir) = &g.out_dir {
            config.output_dir = dir.clone();
        }
        if let Some(seed) = g.seed {
            config.meta.seed = seed;
        }
        config.validate().map_err(|e| usage(format!("{e:#}")))?;
        if let Some(n) = g.workers {
            if n == 0 {
                return Err(usage("--workers must be at least 1"));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .context("configuring worker threads")?;
        }
        let layout = Layout::new(config.output_dir.clone());
        Ok(Self { config, layout })
    }

    fn seed(&self) -> u64 {
        self.config.meta.seed
    }

    fn simulator(&self, style: &str) -> Result<Simulator> {
        let task = self.config.task(style).map_err(|e| usage(format!("{e:#}")))?;
        Ok(Simulator::new(self.config.env, task.clone())?)
    }

    fn style_or_test(&self, style: Option<String>) -> Result<String> {
        let s = style.unwrap_or_else(|| self.config.test_style.clone());
        self.config.task(&s).map_err(|e| usage(format!("{e:#}")))?;
        Ok(s)
    }

    fn load_demos(&self, path: &Path, style: &str) -> Result<DemoDataset> {
        let ds = load_dataset(path).with_context(|| format!("loading {}", path.display()))?;
        if ds.task.name() != style {
            bail!(
                "{} holds '{}' demonstrations, expected '{style}'",
                path.display(),
                ds.task.name()
            );
        }
        Ok(ds)
    }
}

fn demo_seed(seed: u64, style: &str) -> u64 {
    seeds::derive(seed, seeds::stream_id("demos"), seeds::stream_id(style))
}

fn action_mode(mode: Option<Mode>, default: ActionMode) -> ActionMode {
    match mode {
        Some(Mode::Sample) => ActionMode::Sample,
        Some(Mode::Greedy) => ActionMode::Greedy,
        None => default,
    }
}

/// Fails with the full list of missing files.
fn preflight(paths: &[PathBuf]) -> Result<()> {
    let missing: Vec<String> = paths
        .iter()
        .filter(|p| !p.is_file())
        .map(|p| p.display().to_string())
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(usage(format!(
            "missing demonstration files (run gen-demos first):\n  {}",
            missing.join("\n  ")
        )))
    }
}

pub fn gen_demos(
    ctx: &Context,
    styles: Vec<String>,
    count: Option<usize>,
    out: Option<PathBuf>,
) -> Result<()> {
    let styles = if styles.is_empty() {
        ctx.config.training_styles.clone()
    } else {
        styles
    };
    let count = count.unwrap_or(ctx.config.demos_per_task);
    if count == 0 {
        return Err(usage("--count must be at least 1"));
    }
    if out.is_some() && styles.len() != 1 {
        return Err(usage("--out needs exactly one --style"));
    }
    for s in &styles {
        ctx.config.task(s).map_err(|e| usage(format!("{e:#}")))?;
    }
    for s in &styles {
        let task = ctx.config.task(s)?;
        let ds = generate_demos(&ctx.config.env, task, count, demo_seed(ctx.seed(), s))?;
        let path = out.clone().unwrap_or_else(|| ctx.layout.demos(s));
        save_dataset(&ds, &path)?;
        println!(
            "{s}: {} demonstrations, {} steps, sha256 {} -> {}",
            ds.len(),
            ds.total_steps(),
            ds.content_hash(),
            path.display()
        );
    }
    Ok(())
}

struct CliObserver {
    layout: Layout,
    inner: CsvAppender,
    online: Option<CsvAppender>,
    online_task: String,
}

impl MetaObserver for CliObserver {
    fn inner_stats(&mut self, it: usize, task: &str, s: &IterationStats) -> Result<(), MetaError> {
        self.inner
            .push(&InnerRow::new(it, task, s))
            .map_err(|e| MetaError::InvalidConfig(format!("writing metrics: {e:#}")))
    }

    fn online_test(&mut self, it: usize, m: &MetricsRecord) -> Result<(), MetaError> {
        info!(
            "online test after {it} iterations: success {:.2}, steps {:.1}",
            m.success_ratio, m.rollout_steps
        );
        if let Some(w) = &mut self.online {
            w.push(&MetricsRow::new("online", &self.online_task, m))
                .map_err(|e| MetaError::InvalidConfig(format!("writing metrics: {e:#}")))?;
        }
        Ok(())
    }

    fn checkpoint(&mut self, c: &Checkpoint) -> Result<(), MetaError> {
        let path = self.layout.meta_checkpoint(c.iteration);
        c.save(&path)?;
        info!("checkpoint {} ({} iterations)", path.display(), c.iteration);
        Ok(())
    }
}

pub fn meta_train(
    ctx: &Context,
    iterations: Option<usize>,
    tasks: Option<Vec<String>>,
    resume: Option<PathBuf>,
    no_online: bool,
) -> Result<()> {
    let mut config = ctx.config.meta.clone();
    if let Some(m) = iterations {
        if m == 0 {
            return Err(usage("--iterations must be at least 1"));
        }
        config.iterations = m;
    }
    let styles = tasks.unwrap_or_else(|| ctx.config.training_styles.clone());
    if styles.is_empty() {
        return Err(usage("--tasks must name at least one style"));
    }
    let sims = styles
        .iter()
        .map(|s| ctx.simulator(s))
        .collect::<Result<Vec<_>>>()?;
    let online_runs = !no_online && config.online_every > 0 && config.iterations >= config.online_every;
    let test_style = ctx.config.test_style.clone();

    let mut needed: Vec<PathBuf> = styles.iter().map(|s| ctx.layout.demos(s)).collect();
    if online_runs {
        needed.push(ctx.layout.demos(&test_style));
    }
    preflight(&needed)?;

    let start = match &resume {
        Some(path) => {
            let c = Checkpoint::load(path).with_context(|| format!("loading {}", path.display()))?;
            if !config.resumable_from(&c.config) {
                return Err(usage(format!(
                    "{} was written under a different configuration",
                    path.display()
                )));
            }
            c
        }
        None => initial_checkpoint(&config)?,
    };

    let demos = styles
        .iter()
        .zip(&needed)
        .map(|(s, p)| ctx.load_demos(p, s))
        .collect::<Result<Vec<_>>>()?;
    let training: Vec<TrainingTask<'_>> = sims
        .iter()
        .zip(&demos)
        .map(|(sim, demos)| TrainingTask { sim, demos })
        .collect();
    let test_sim = ctx.simulator(&test_style)?;
    let test_demos = if online_runs {
        Some(
            ctx.load_demos(&ctx.layout.demos(&test_style), &test_style)?
                .truncated(ctx.config.eval.online_demos),
        )
    } else {
        None
    };
    let online = test_demos.as_ref().map(|d| OnlineTest {
        task: TrainingTask {
            sim: &test_sim,
            demos: d,
        },
        episodes: ctx.config.eval.online_episodes,
        seed: seeds::derive(config.seed, seeds::stream_id("online-eval"), 0),
    });

    let metrics = ctx.layout.meta_metrics();
    let online_csv = ctx.layout.online_metrics();
    if resume.is_some() {
        truncate_rows(&metrics, start.iteration)?;
        truncate_rows(&online_csv, start.iteration + 1)?;
    } else {
        for p in [&metrics, &online_csv] {
            if p.exists() {
                std::fs::remove_file(p).with_context(|| format!("removing {}", p.display()))?;
            }
        }
    }
    let mut observer = CliObserver {
        layout: ctx.layout.clone(),
        inner: CsvAppender::open(&metrics)?,
        online: if online_runs {
            Some(CsvAppender::open(&online_csv)?)
        } else {
            None
        },
        online_task: test_style,
    };
    info!(
        "meta-training on {} from iteration {} to {}",
        styles.join(", "),
        start.iteration,
        config.iterations
    );
    let done = meta::meta_train(&training, &config, online.as_ref(), start, &mut observer)?;
    println!(
        "meta-training finished after {} iterations, checkpoint {} (sha256 {})",
        done.iteration,
        ctx.layout.meta_checkpoint(done.iteration).display(),
        done.content_hash()
    );
    Ok(())
}

fn resolve_budgets(ctx: &Context, budgets: Option<Vec<usize>>) -> Result<Vec<usize>> {
    let b = budgets.unwrap_or_else(|| ctx.config.eval.budgets.clone());
    if b.is_empty() || b.contains(&0) {
        return Err(usage("demo budgets must be positive"));
    }
    Ok(b)
}

fn target_demos(
    ctx: &Context,
    style: &str,
    demos: Option<PathBuf>,
    budgets: &[usize],
) -> Result<DemoDataset> {
    let path = demos.unwrap_or_else(|| ctx.layout.demos(style));
    preflight(std::slice::from_ref(&path))?;
    let ds = ctx.load_demos(&path, style)?;
    let need = budgets.iter().copied().max().unwrap_or(0);
    if ds.len() < need {
        return Err(usage(format!(
            "{} holds {} demonstrations but a budget of {need} was requested",
            path.display(),
            ds.len()
        )));
    }
    Ok(ds)
}

fn labeled(params: ModelParams, config: &meta::MetaConfig, label: String) -> Checkpoint {
    Checkpoint {
        params,
        config: config.clone(),
        iteration: 0,
        rng: metairl::meta::MetaState::new((), config.seed).rng,
        label,
        version: CHECKPOINT_VERSION,
    }
}

pub fn adapt(
    ctx: &Context,
    checkpoint: Option<PathBuf>,
    style: Option<String>,
    budgets: Option<Vec<usize>>,
    iterations: Option<usize>,
    demos: Option<PathBuf>,
) -> Result<()> {
    let style = ctx.style_or_test(style)?;
    let budgets = resolve_budgets(ctx, budgets)?;
    let iterations = iterations.unwrap_or(ctx.config.meta.adapt_iterations);
    let path = match checkpoint {
        Some(p) => p,
        None => latest_checkpoint(&ctx.layout.meta_dir()).ok_or_else(|| {
            usage(format!(
                "no checkpoint in {}; pass --checkpoint",
                ctx.layout.meta_dir().display()
            ))
        })?,
    };
    let base = Checkpoint::load(&path).with_context(|| format!("loading {}", path.display()))?;
    let ds = target_demos(ctx, &style, demos, &budgets)?;
    let sim = ctx.simulator(&style)?;
    for &b in &budgets {
        let subset = ds.truncated(b);
        let task = TrainingTask {
            sim: &sim,
            demos: &subset,
        };
        let seed = seeds::derive(ctx.seed(), seeds::stream_id("adapt"), b as u64);
        let run = meta::adapt(&base.params, task, iterations, &base.config.airl, seed)?;
        let mut out = base.clone();
        out.params = run.params;
        out.label = format!("adapted:{style}:{b}");
        let dest = ctx.layout.budget_checkpoint("adapted", &style, b);
        out.save(&dest)?;
        println!("{} demos: {} (sha256 {})", b, dest.display(), out.content_hash());
    }
    Ok(())
}

pub fn train_airl(
    ctx: &Context,
    baseline: Baseline,
    style: Option<String>,
    budgets: Option<Vec<usize>>,
    iterations: Option<usize>,
    pretrain_iterations: Option<usize>,
    demos: Option<PathBuf>,
) -> Result<()> {
    let style = ctx.style_or_test(style)?;
    let budgets = resolve_budgets(ctx, budgets)?;
    let config = &ctx.config.meta;
    let iterations = iterations.unwrap_or(config.adapt_iterations);
    let ds = target_demos(ctx, &style, demos, &budgets)?;
    let sim = ctx.simulator(&style)?;

    let (kind, base) = match baseline {
        Baseline::Scratch => ("scratch", None),
        Baseline::Pretrained => {
            let styles = &ctx.config.training_styles;
            let paths: Vec<PathBuf> = styles.iter().map(|s| ctx.layout.demos(s)).collect();
            preflight(&paths)?;
            let sims = styles
                .iter()
                .map(|s| ctx.simulator(s))
                .collect::<Result<Vec<_>>>()?;
            let pools = styles
                .iter()
                .zip(&paths)
                .map(|(s, p)| ctx.load_demos(p, s))
                .collect::<Result<Vec<_>>>()?;
            let tasks: Vec<TrainingTask<'_>> = sims
                .iter()
                .zip(&pools)
                .map(|(sim, demos)| TrainingTask { sim, demos })
                .collect();
            let budget = pretrain_iterations.unwrap_or(
                config.iterations * config.tasks_per_iteration * config.inner_iterations,
            );
            info!("pretraining on pooled demonstrations for {budget} iterations");
            let seed = seeds::derive(ctx.seed(), seeds::stream_id("pretrain"), 0);
            let run = meta::train_pretrained(&tasks, budget, &config.airl, seed)?;
            let ck = labeled(run.params, config, "pretrained".into());
            let dest = ctx.layout.root.join("pretrained").join("base.ckpt");
            ck.save(&dest)?;
            println!("pretrained base: {}", dest.display());
            ("pretrained", Some(ck.params))
        }
    };

    for &b in &budgets {
        let subset = ds.truncated(b);
        let task = TrainingTask {
            sim: &sim,
            demos: &subset,
        };
        let seed = seeds::derive(ctx.seed(), seeds::stream_id(kind), b as u64);
        let run = match &base {
            Some(p) => meta::adapt(p, task, iterations, &config.airl, seed)?,
            None => meta::train_scratch(task, iterations, &config.airl, seed)?,
        };
        let ck = labeled(run.params, config, format!("{kind}:{style}:{b}"));
        let dest = ctx.layout.budget_checkpoint(kind, &style, b);
        ck.save(&dest)?;
        println!("{} demos: {} (sha256 {})", b, dest.display(), ck.content_hash());
    }
    Ok(())
}

fn eval_seed(ctx: &Context) -> u64 {
    seeds::derive(ctx.seed(), seeds::stream_id("evaluation"), 0)
}

#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    ctx: &Context,
    checkpoint: Option<PathBuf>,
    oracle: bool,
    style: Option<String>,
    episodes: Option<usize>,
    mode: Option<Mode>,
    label: Option<String>,
) -> Result<()> {
    let style = ctx.style_or_test(style)?;
    let episodes = episodes.unwrap_or(ctx.config.eval.episodes);
    if episodes == 0 {
        return Err(usage("--episodes must be at least 1"));
    }
    let mode = action_mode(mode, ctx.config.eval.mode);
    let sim = ctx.simulator(&style)?;
    let (label, evaluation) = if oracle {
        (
            label.unwrap_or_else(|| "oracle".into()),
            evaluate_oracle(&sim, episodes, eval_seed(ctx))?,
        )
    } else {
        let path = checkpoint.expect("clap requires --checkpoint without --oracle");
        let ck = Checkpoint::load(&path).with_context(|| format!("loading {}", path.display()))?;
        let label = label.unwrap_or_else(|| {
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "model".into())
        });
        (label, eval_model(&ck.params, &sim, episodes, eval_seed(ctx), mode)?)
    };
    let m = &evaluation.metrics;
    println!(
        "{label} on {style}: {} episodes, success {:.3}, crash {:.3}, timeout {:.3}, steps {:.1}, decision steps {:.1}{}",
        m.episodes,
        m.success_ratio,
        m.crash_ratio,
        m.timeout_ratio,
        m.rollout_steps,
        m.decision_steps,
        m.total_reward
            .map(|r| format!(", total reward {r:.2}"))
            .unwrap_or_default()
    );
    let dir = ctx.layout.reports_dir();
    write_json(&dir.join(format!("eval-{label}-{style}.json")), &evaluation)?;
    let mut csv = CsvAppender::open(&dir.join("evaluations.csv"))?;
    csv.push(&MetricsRow::new(&label, &style, m))?;
    Ok(())
}

pub fn compare(
    ctx: &Context,
    models: Vec<String>,
    style: Option<String>,
    episodes: Option<usize>,
    mode: Option<Mode>,
    reference: Option<PathBuf>,
    name: String,
) -> Result<()> {
    let style = ctx.style_or_test(style)?;
    let episodes = episodes.unwrap_or(ctx.config.eval.episodes);
    if episodes == 0 {
        return Err(usage("--episodes must be at least 1"));
    }
    let mut loaded = Vec::new();
    for spec in &models {
        let (label, path) = spec
            .split_once('=')
            .ok_or_else(|| usage(format!("--model expects NAME=CHECKPOINT, got '{spec}'")))?;
        let ck = Checkpoint::load(Path::new(path)).with_context(|| format!("loading {path}"))?;
        loaded.push((label.to_string(), ck.params));
    }
    let expert = match reference {
        Some(p) => ctx.load_demos(&p, &style)?,
        None => {
            let task = ctx.config.task(&style)?;
            let seed = seeds::derive(ctx.seed(), seeds::stream_id("reference"), 0);
            generate_demos(&ctx.config.env, task, ctx.config.eval.reference_demos, seed)?
        }
    };
    let sim = ctx.simulator(&style)?;
    let refs: Vec<(&str, &ModelParams)> = loaded.iter().map(|(l, p)| (l.as_str(), p)).collect();
    let mode = action_mode(mode, ctx.config.eval.mode);
    let report = compare_models(&refs, &expert, &sim, episodes, eval_seed(ctx), mode)?;

    let dir = ctx.layout.reports_dir();
    let json = dir.join(format!("{name}.json"));
    metairl::persist::atomic_write(&json, report.to_json().as_bytes())?;
    let mut buf = Vec::new();
    report.write_csv(&mut buf)?;
    let csv = dir.join(format!("{name}.csv"));
    metairl::persist::atomic_write(&csv, &buf)?;
    let rows: Vec<MetricsRow> = report
        .models
        .iter()
        .map(|m| MetricsRow::new(&m.name, &style, &m.metrics))
        .collect();
    write_csv(&dir.join(format!("{name}-metrics.csv")), &rows)?;

    print!("{}", String::from_utf8_lossy(&buf));
    println!("wrote {} and {}", json.display(), csv.display());
    Ok(())
}
