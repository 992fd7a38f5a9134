use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::persist::{
    atomic_write, put_f64s, read_container, read_file, sha256_hex, ContainerWriter, PersistError,
    RecordReader,
};
use crate::seeds;
use crate::sim::{ActionId, EnvConfig, Simulator, Termination, STATE_DIM};

use super::oracle::oracle_action;
use super::trajectory::{run_episode, Trajectory, TrajectoryStep};
use super::{ExpertError, TaskSpec};

pub const DATASET_MAGIC: &[u8; 8] = b"MAIRLDS\0";
pub const DATASET_VERSION: u32 = 1;

/// Expert demonstrations for a single task.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoDataset {
    pub task: TaskSpec,
    pub seed: u64,
    pub version: u32,
    pub trajectories: Vec<Trajectory>,
}

impl DemoDataset {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn total_steps(&self) -> usize {
        self.trajectories.iter().map(Trajectory::len).sum()
    }

    /// The first `k` trajectories, as used for demo-budget experiments.
    pub fn truncated(&self, k: usize) -> DemoDataset {
        DemoDataset {
            trajectories: self.trajectories.iter().take(k).cloned().collect(),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), ExpertError> {
        for (i, t) in self.trajectories.iter().enumerate() {
            if t.task != self.task.name() {
                return Err(ExpertError::TaskMismatch {
                    expected: self.task.name().to_string(),
                    found: t.task.clone(),
                    index: i,
                });
            }
            if t.is_empty() {
                return Err(ExpertError::InvalidDataset(format!("trajectory {i} is empty")));
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = DatasetHeader {
            format: "metairl-demos".to_string(),
            version: self.version,
            task: self.task.clone(),
            seed: self.seed,
            count: self.trajectories.len(),
        };
        let header = serde_json::to_vec(&header).expect("dataset header serializes");
        let mut w = ContainerWriter::new(DATASET_MAGIC, &header);
        for t in &self.trajectories {
            w.record(&encode_trajectory(t));
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ExpertError> {
        let c = read_container(bytes, DATASET_MAGIC, "demo dataset")?;
        let header: DatasetHeader =
            serde_json::from_slice(c.header).map_err(PersistError::Header)?;
        if header.version != DATASET_VERSION {
            return Err(PersistError::VersionMismatch {
                found: header.version,
                expected: DATASET_VERSION,
            }
            .into());
        }
        if header.count != c.records.len() {
            return Err(ExpertError::InvalidDataset(format!(
                "header declares {} trajectories but file holds {}",
                header.count,
                c.records.len()
            )));
        }
        let task_name = header.task.name().to_string();
        let trajectories = c
            .records
            .iter()
            .map(|r| decode_trajectory(r, &task_name))
            .collect::<Result<Vec<_>, _>>()?;
        let ds = DemoDataset {
            task: header.task,
            seed: header.seed,
            version: header.version,
            trajectories,
        };
        ds.validate()?;
        Ok(ds)
    }

    /// SHA-256 of the serialized dataset, hex encoded.
    pub fn content_hash(&self) -> String {
        sha256_hex(&self.to_bytes())
    }
}

#[derive(Serialize, Deserialize)]
struct DatasetHeader {
    format: String,
    version: u32,
    task: TaskSpec,
    seed: u64,
    count: usize,
}

fn encode_trajectory(t: &Trajectory) -> Vec<u8> {
    let mut buf = Vec::with_capacity(17 + t.steps.len() * (17 + 8 * STATE_DIM));
    buf.extend_from_slice(&t.seed.to_le_bytes());
    buf.push(t.termination.code());
    buf.extend_from_slice(&t.decision_steps.to_le_bytes());
    buf.extend_from_slice(&(t.steps.len() as u32).to_le_bytes());
    for s in &t.steps {
        buf.push(s.action.index() as u8);
        put_f64s(&mut buf, &[s.speed, s.accel]);
        put_f64s(&mut buf, &s.state);
    }
    buf
}

fn decode_trajectory(bytes: &[u8], task: &str) -> Result<Trajectory, PersistError> {
    let mut r = RecordReader::new(bytes);
    let seed = r.u64()?;
    let code = r.u8()?;
    let termination = Termination::from_code(code)
        .ok_or_else(|| PersistError::Malformed(format!("unknown termination code {code}")))?;
    let decision_steps = r.u32()?;
    let n = r.u32()? as usize;
    let mut steps = Vec::with_capacity(n);
    for _ in 0..n {
        let a = r.u8()?;
        let action = ActionId::new(usize::from(a))
            .map_err(|_| PersistError::Malformed(format!("action index {a} out of range")))?;
        let speed = r.f64()?;
        let accel = r.f64()?;
        let mut state = [0.0; STATE_DIM];
        for v in state.iter_mut() {
            *v = r.f64()?;
        }
        steps.push(TrajectoryStep {
            state,
            action,
            speed,
            accel,
        });
    }
    r.finish()?;
    Ok(Trajectory {
        task: task.to_string(),
        seed,
        steps,
        termination,
        decision_steps,
    })
}

pub fn save_dataset(dataset: &DemoDataset, path: &Path) -> Result<(), ExpertError> {
    atomic_write(path, &dataset.to_bytes())?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<DemoDataset, ExpertError> {
    DemoDataset::from_bytes(&read_file(path)?)
}

/// Attempts allowed per requested demonstration before giving up.
const ATTEMPTS_PER_DEMO: usize = 2;
const EXTRA_ATTEMPTS: usize = 20;

/// Rolls out the oracle until `count` successful episodes are collected.
///
/// Episode seeds are derived from `seed` and the attempt index, so the
/// result does not depend on how attempts are spread over threads.
pub fn generate_demos(
    env: &EnvConfig,
    task: &TaskSpec,
    count: usize,
    seed: u64,
) -> Result<DemoDataset, ExpertError> {
    if count == 0 {
        return Err(ExpertError::InvalidCount(count));
    }
    let sim = Simulator::new(*env, task.clone())?;
    let budget = ATTEMPTS_PER_DEMO * count + EXTRA_ATTEMPTS;
    let stream = seeds::stream_id(task.name());
    let mut kept = Vec::with_capacity(count);
    let mut attempted = 0;
    while kept.len() < count && attempted < budget {
        let batch = (count - kept.len()).min(budget - attempted);
        let results: Vec<Trajectory> = (attempted..attempted + batch)
            .into_par_iter()
            .map(|i| {
                let ep_seed = seeds::derive(seed, stream, i as u64);
                run_episode(&sim, ep_seed, |scene, _| oracle_action(scene, task, env))
            })
            .collect::<Result<_, _>>()?;
        attempted += batch;
        kept.extend(
            results
                .into_iter()
                .filter(|t| t.termination == Termination::Success),
        );
    }
    if kept.len() < count {
        return Err(ExpertError::LowSuccessRate {
            task: task.name().to_string(),
            successes: kept.len(),
            attempts: attempted,
            requested: count,
        });
    }
    kept.truncate(count);
    Ok(DemoDataset {
        task: task.clone(),
        seed,
        version: DATASET_VERSION,
        trajectories: kept,
    })
}
