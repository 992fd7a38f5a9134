use serde::{Deserialize, Serialize};

/// Lane 0 is the ego's starting lane, lane 1 the target lane.
pub const CURRENT_LANE: u8 = 0;
pub const TARGET_LANE: u8 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    /// Front-bumper longitudinal position, m.
    pub position: f64,
    pub lane: u8,
    /// Progress of a lane change toward the target lane, in [0, 1].
    pub lateral: f64,
    pub speed: f64,
    /// Acceleration applied over the most recent step.
    pub accel: f64,
    pub length: f64,
    /// IDM free-road speed. Unused for the ego, whose speed comes from its controller.
    pub desired_speed: f64,
}

impl VehicleState {
    pub fn rear(&self) -> f64 {
        self.position - self.length
    }

    pub fn center(&self) -> f64 {
        self.position - 0.5 * self.length
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Deciding,
    Executing,
    Done,
    /// Lateral offset is returning toward the start lane.
    Aborted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Termination {
    None,
    Crash,
    Success,
    Timeout,
}

impl Termination {
    pub fn is_terminal(self) -> bool {
        self != Termination::None
    }

    pub fn code(self) -> u8 {
        match self {
            Termination::None => 0,
            Termination::Crash => 1,
            Termination::Success => 2,
            Termination::Timeout => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => Termination::None,
            1 => Termination::Crash,
            2 => Termination::Success,
            3 => Termination::Timeout,
            _ => return None,
        })
    }
}

/// Complete simulator state between two steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub ego: VehicleState,
    pub others: Vec<VehicleState>,
    /// Steps taken so far.
    pub clock: u32,
    pub phase: Phase,
    pub seed: u64,
    /// Lateral progress in whole steps; `ego.lateral == lateral_steps / steps_needed`.
    pub lateral_steps: u32,
    /// Clock value at which the current (or last) lane-change maneuver began.
    pub maneuver_start: Option<u32>,
    pub aborts: u32,
    pub termination: Termination,
}

impl Scene {
    pub fn is_terminal(&self) -> bool {
        self.termination.is_terminal()
    }

    /// Steps spent before the final maneuver began; the whole episode if it never did.
    pub fn decision_steps(&self) -> u32 {
        self.maneuver_start.unwrap_or(self.clock)
    }

    pub fn target_lane_vehicles(&self) -> impl Iterator<Item = (usize, &VehicleState)> {
        self.others
            .iter()
            .enumerate()
            .filter(|(_, v)| v.lane == TARGET_LANE)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub scene: Scene,
    pub terminal: bool,
    pub termination: Termination,
    pub decision_steps: u32,
    pub rollout_steps: u32,
}
