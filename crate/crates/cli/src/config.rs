use std::collections::HashSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use metairl::airl::ActionMode;
use metairl::expert::TaskSpec;
use metairl::meta::MetaConfig;
use metairl::sim::EnvConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    /// Evaluation episodes per model.
    pub episodes: usize,
    pub mode: ActionMode,
    /// Demonstration budgets for adaptation and the baselines.
    pub budgets: Vec<usize>,
    /// Episodes of the online test during meta-training.
    pub online_episodes: usize,
    /// Demonstrations of the test style used by the online test.
    pub online_demos: usize,
    /// Demonstrations of the test style used as the histogram reference.
    pub reference_demos: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            episodes: 300,
            mode: ActionMode::Sample,
            budgets: (1..=10).map(|k| 5 * k).collect(),
            online_episodes: 50,
            online_demos: 10,
            reference_demos: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub training_styles: Vec<String>,
    pub test_style: String,
    /// Demonstrations generated per training style.
    pub demos_per_task: usize,
    pub env: EnvConfig,
    pub tasks: Vec<TaskSpec>,
    pub meta: MetaConfig,
    pub eval: EvalSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::full()
    }
}

impl RunConfig {
    /// Full-length protocol.
    pub fn full() -> Self {
        Self {
            output_dir: PathBuf::from("runs/full"),
            training_styles: vec!["conservative".into(), "neutral".into()],
            test_style: "aggressive".into(),
            demos_per_task: 3000,
            env: EnvConfig::default(),
            tasks: vec![
                TaskSpec::conservative(),
                TaskSpec::neutral(),
                TaskSpec::aggressive(),
            ],
            meta: MetaConfig::default(),
            eval: EvalSettings::default(),
        }
    }

    /// Shortened protocol that runs on a laptop.
    pub fn desk() -> Self {
        let mut c = Self::full();
        c.output_dir = PathBuf::from("runs/desk");
        c.demos_per_task = 200;
        c.meta.iterations = 300;
        c.meta.inner_iterations = 1;
        c.meta.checkpoint_every = 50;
        c.meta.airl.trust_region.max_kl = 0.03;
        c
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("run configuration renders as TOML")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        let mut names = HashSet::new();
        for t in &self.tasks {
            t.validate()?;
            if !names.insert(t.name()) {
                bail!("task '{}' is defined twice", t.name());
            }
        }
        if self.training_styles.is_empty() {
            bail!("training_styles must name at least one style");
        }
        for s in self.training_styles.iter().chain(std::iter::once(&self.test_style)) {
            if !names.contains(s.as_str()) {
                bail!("style '{s}' is not defined in tasks");
            }
        }
        if self.demos_per_task == 0 {
            bail!("demos_per_task must be at least 1");
        }
        if self.eval.episodes == 0 || self.eval.online_episodes == 0 {
            bail!("evaluation episode counts must be at least 1");
        }
        if self.eval.budgets.iter().any(|&b| b == 0) {
            bail!("demonstration budgets must be at least 1");
        }
        if self.eval.online_demos == 0 || self.eval.reference_demos == 0 {
            bail!("online_demos and reference_demos must be at least 1");
        }
        if self.meta.seed > i64::MAX as u64 {
            bail!("seed must not exceed {}", i64::MAX);
        }
        self.env.validate()?;
        self.meta.validate()?;
        Ok(())
    }

    pub fn task(&self, style: &str) -> Result<&TaskSpec> {
        self.tasks
            .iter()
            .find(|t| t.name() == style)
            .with_context(|| format!("style '{style}' is not defined in tasks"))
    }
}
