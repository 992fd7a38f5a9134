use serde::{Deserialize, Serialize};

use crate::sim::{encode_state, ActionId, Scene, SimError, Simulator, StateVector, Termination};

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStep {
    pub state: StateVector,
    pub action: ActionId,
    /// Ego speed after the step, m/s.
    pub speed: f64,
    /// Ego acceleration applied during the step, m/s^2.
    pub accel: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub task: String,
    pub seed: u64,
    pub steps: Vec<TrajectoryStep>,
    pub termination: Termination,
    pub decision_steps: u32,
}

/// Per-episode extremes of the ego's longitudinal motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kinematics {
    pub max_accel: f64,
    pub min_accel: f64,
    pub max_speed: f64,
    pub min_speed: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Only the last step of a finished episode is terminal.
    pub fn is_terminal_step(&self, index: usize) -> bool {
        index + 1 == self.steps.len() && self.termination.is_terminal()
    }

    pub fn kinematics(&self) -> Kinematics {
        let mut k = Kinematics {
            max_accel: f64::NEG_INFINITY,
            min_accel: f64::INFINITY,
            max_speed: f64::NEG_INFINITY,
            min_speed: f64::INFINITY,
        };
        for s in &self.steps {
            k.max_accel = k.max_accel.max(s.accel);
            k.min_accel = k.min_accel.min(s.accel);
            k.max_speed = k.max_speed.max(s.speed);
            k.min_speed = k.min_speed.min(s.speed);
        }
        k
    }
}

/// Rolls out one episode from `seed`, asking `choose` for every action.
pub fn run_episode<F>(sim: &Simulator, seed: u64, mut choose: F) -> Result<Trajectory, SimError>
where
    F: FnMut(&Scene, &StateVector) -> ActionId,
{
    let mut scene = sim.reset(seed);
    let mut steps = Vec::new();
    loop {
        let state = encode_state(&scene);
        let action = choose(&scene, &state);
        let outcome = sim.step(&scene, action)?;
        steps.push(TrajectoryStep {
            state,
            action,
            speed: outcome.scene.ego.speed,
            accel: outcome.scene.ego.accel,
        });
        if outcome.terminal {
            return Ok(Trajectory {
                task: sim.task().name().to_string(),
                seed,
                steps,
                termination: outcome.termination,
                decision_steps: outcome.decision_steps,
            });
        }
        scene = outcome.scene;
    }
}
