use std::fs::{self, File, OpenOptions};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use metairl::airl::IterationStats;
use metairl::eval::MetricsRecord;
use serde::{Deserialize, Serialize};

/// File layout under an output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn demos(&self, style: &str) -> PathBuf {
        self.root.join("demos").join(format!("{style}.demos"))
    }

    pub fn meta_dir(&self) -> PathBuf {
        self.root.join("meta")
    }

    pub fn meta_checkpoint(&self, iteration: usize) -> PathBuf {
        self.meta_dir().join(format!("checkpoint-{iteration:06}.ckpt"))
    }

    pub fn meta_metrics(&self) -> PathBuf {
        self.meta_dir().join("metrics.csv")
    }

    pub fn online_metrics(&self) -> PathBuf {
        self.meta_dir().join("online.csv")
    }

    /// Checkpoint of `kind` (`adapted`, `scratch`, `pretrained`) for a style and demo budget.
    pub fn budget_checkpoint(&self, kind: &str, style: &str, budget: usize) -> PathBuf {
        self.root.join(kind).join(format!("{style}-{budget:03}.ckpt"))
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.root.join("reports")
    }
}

/// Newest `checkpoint-NNNNNN.ckpt` in `dir`.
pub fn latest_checkpoint(dir: &Path) -> Option<PathBuf> {
    let mut found: Vec<(usize, PathBuf)> = fs::read_dir(dir)
        .ok()?
        .filter_map(|e| {
            let path = e.ok()?.path();
            let name = path.file_name()?.to_str()?;
            let n = name.strip_prefix("checkpoint-")?.strip_suffix(".ckpt")?.parse().ok()?;
            Some((n, path))
        })
        .collect();
    found.sort();
    found.pop().map(|(_, p)| p)
}

/// One row of the meta-training metrics stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerRow {
    pub meta_iteration: usize,
    pub task: String,
    pub inner_iteration: usize,
    pub episodes: usize,
    pub expert_disc_prob: Option<f64>,
    pub generated_disc_prob: Option<f64>,
    pub total_reward: Option<f64>,
    pub rollout_steps: f64,
    pub decision_steps: f64,
    pub success_ratio: f64,
    pub crash_ratio: f64,
    pub timeout_ratio: f64,
    pub max_accel: f64,
    pub min_accel: f64,
    pub max_speed: f64,
    pub min_speed: f64,
    pub disc_loss: f64,
    pub disc_steps: usize,
    pub policy_steps: usize,
    pub policy_accepted: usize,
    pub policy_kl: f64,
}

impl InnerRow {
    pub fn new(meta_iteration: usize, task: &str, s: &IterationStats) -> Self {
        let m = &s.metrics;
        Self {
            meta_iteration,
            task: task.to_string(),
            inner_iteration: m.iteration,
            episodes: m.episodes,
            expert_disc_prob: m.expert_disc_prob,
            generated_disc_prob: m.generated_disc_prob,
            total_reward: m.total_reward,
            rollout_steps: m.rollout_steps,
            decision_steps: m.decision_steps,
            success_ratio: m.success_ratio,
            crash_ratio: m.crash_ratio,
            timeout_ratio: m.timeout_ratio,
            max_accel: m.max_accel,
            min_accel: m.min_accel,
            max_speed: m.max_speed,
            min_speed: m.min_speed,
            disc_loss: s.disc_loss,
            disc_steps: s.disc_steps,
            policy_steps: s.policy_steps,
            policy_accepted: s.policy_accepted,
            policy_kl: s.policy_kl,
        }
    }
}

/// One evaluation summary: a model (or the oracle) on a task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub label: String,
    pub task: String,
    pub iteration: usize,
    pub episodes: usize,
    pub expert_disc_prob: Option<f64>,
    pub generated_disc_prob: Option<f64>,
    pub total_reward: Option<f64>,
    pub rollout_steps: f64,
    pub decision_steps: f64,
    pub success_ratio: f64,
    pub crash_ratio: f64,
    pub timeout_ratio: f64,
    pub max_accel: f64,
    pub min_accel: f64,
    pub max_speed: f64,
    pub min_speed: f64,
}

impl MetricsRow {
    pub fn new(label: &str, task: &str, m: &MetricsRecord) -> Self {
        Self {
            label: label.to_string(),
            task: task.to_string(),
            iteration: m.iteration,
            episodes: m.episodes,
            expert_disc_prob: m.expert_disc_prob,
            generated_disc_prob: m.generated_disc_prob,
            total_reward: m.total_reward,
            rollout_steps: m.rollout_steps,
            decision_steps: m.decision_steps,
            success_ratio: m.success_ratio,
            crash_ratio: m.crash_ratio,
            timeout_ratio: m.timeout_ratio,
            max_accel: m.max_accel,
            min_accel: m.min_accel,
            max_speed: m.max_speed,
            min_speed: m.min_speed,
        }
    }
}

/// Appends serialized rows to a CSV file, writing the header only when the file is new.
pub struct CsvAppender {
    writer: csv::Writer<File>,
}

impl CsvAppender {
    pub fn open(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .with_context(|| format!("opening {}", path.display()))?;
        let writer = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
        Ok(Self { writer })
    }

    pub fn push<T: Serialize>(&mut self, row: &T) -> Result<()> {
        self.writer.serialize(row)?;
        self.writer.flush()?;
        Ok(())
    }
}

/// Drops rows at or beyond `keep_below` from a meta-training CSV so a resumed
/// run does not duplicate them.
pub fn truncate_rows(path: &Path, keep_below: usize) -> Result<()> {
    if !path.exists() {
        return Ok(());
    }
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = headers
        .iter()
        .position(|h| h == "meta_iteration" || h == "iteration")
        .with_context(|| format!("{} has no iteration column", path.display()))?;
    let mut kept = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let it: usize = rec[col].parse()?;
        if it < keep_below {
            kept.push(rec);
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&headers)?;
    for r in &kept {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?;
    metairl::persist::atomic_write(path, &bytes)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    metairl::persist::atomic_write(path, text.as_bytes())?;
    Ok(())
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?;
    metairl::persist::atomic_write(path, &bytes)?;
    Ok(())
}
