use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::airl::{ActionMode, ModelParams};
use crate::expert::{DemoDataset, Kinematics};
use crate::sim::Simulator;

use super::{build_histogram, evaluate, l1_distance, EvalError, Histogram, MetricsRecord};

/// Per-episode kinematic extremes compared between models and the expert.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kinematic {
    MaxAccel,
    MaxSpeed,
    MinAccel,
    MinSpeed,
}

impl Kinematic {
    pub const ALL: [Kinematic; 4] = [
        Kinematic::MaxAccel,
        Kinematic::MaxSpeed,
        Kinematic::MinAccel,
        Kinematic::MinSpeed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kinematic::MaxAccel => "max_accel",
            Kinematic::MaxSpeed => "max_speed",
            Kinematic::MinAccel => "min_accel",
            Kinematic::MinSpeed => "min_speed",
        }
    }

    /// Shared binning: 1 m/s^2 over [-6, 6] for accelerations, 2 m/s over [0, 46] for speeds.
    pub fn binning(self) -> (usize, (f64, f64)) {
        match self {
            Kinematic::MaxAccel | Kinematic::MinAccel => (12, (-6.0, 6.0)),
            Kinematic::MaxSpeed | Kinematic::MinSpeed => (23, (0.0, 46.0)),
        }
    }

    pub fn value(self, k: &Kinematics) -> f64 {
        match self {
            Kinematic::MaxAccel => k.max_accel,
            Kinematic::MaxSpeed => k.max_speed,
            Kinematic::MinAccel => k.min_accel,
            Kinematic::MinSpeed => k.min_speed,
        }
    }
}

/// One histogram per kinematic, in `Kinematic::ALL` order.
pub fn kinematic_histograms(episodes: &[Kinematics]) -> Result<Vec<Histogram>, EvalError> {
    Kinematic::ALL
        .iter()
        .map(|&k| {
            let values: Vec<f64> = episodes.iter().map(|e| k.value(e)).collect();
            let (bins, range) = k.binning();
            build_histogram(k.name(), &values, bins, range)
        })
        .collect()
}

/// `l1_distance` per kinematic between two histogram sets from `kinematic_histograms`.
pub fn kinematic_l1(a: &[Histogram], b: &[Histogram]) -> Result<Vec<f64>, EvalError> {
    a.iter().zip(b).map(|(x, y)| l1_distance(x, y)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub name: String,
    pub metrics: MetricsRecord,
    pub histograms: Vec<Histogram>,
    /// Deviation from the expert histogram, in `Kinematic::ALL` order.
    pub l1: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub task: String,
    pub episodes: usize,
    pub seed: u64,
    pub kinematics: Vec<Kinematic>,
    pub expert: Vec<Histogram>,
    pub models: Vec<ModelReport>,
}

/// Column order of `Comparison::write_csv`.
pub const COMPARISON_COLUMNS: [&str; 12] = [
    "model",
    "episodes",
    "success_ratio",
    "crash_ratio",
    "timeout_ratio",
    "total_reward",
    "rollout_steps",
    "decision_steps",
    "l1_max_accel",
    "l1_max_speed",
    "l1_min_accel",
    "l1_min_speed",
];

/// Evaluates every model on `sim` with the same episode seeds and measures
/// the histogram deviation of its kinematics from the expert demonstrations.
pub fn compare_models(
    models: &[(&str, &ModelParams)],
    expert: &DemoDataset,
    sim: &Simulator,
    episodes: usize,
    seed: u64,
    mode: ActionMode,
) -> Result<Comparison, EvalError> {
    if models.is_empty() {
        return Err(EvalError::NoModels);
    }
    let expert_kin: Vec<Kinematics> = expert.trajectories.iter().map(|t| t.kinematics()).collect();
    let expert_h = kinematic_histograms(&expert_kin)?;
    let mut reports = Vec::with_capacity(models.len());
    for &(name, params) in models {
        let eval = evaluate(params, sim, episodes, seed, mode)?;
        let histograms = kinematic_histograms(&eval.kinematics)?;
        let l1 = kinematic_l1(&histograms, &expert_h)?;
        reports.push(ModelReport {
            name: name.to_string(),
            metrics: eval.metrics,
            histograms,
            l1,
        });
    }
    Ok(Comparison {
        task: sim.task().name().to_string(),
        episodes,
        seed,
        kinematics: Kinematic::ALL.to_vec(),
        expert: expert_h,
        models: reports,
    })
}

impl Comparison {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("comparison serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    /// One row per model; see `COMPARISON_COLUMNS`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(COMPARISON_COLUMNS)?;
        for m in &self.models {
            let r = &m.metrics;
            let mut row = vec![
                m.name.clone(),
                r.episodes.to_string(),
                r.success_ratio.to_string(),
                r.crash_ratio.to_string(),
                r.timeout_ratio.to_string(),
                r.total_reward.map(|v| v.to_string()).unwrap_or_default(),
                r.rollout_steps.to_string(),
                r.decision_steps.to_string(),
            ];
            row.extend(m.l1.iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}
