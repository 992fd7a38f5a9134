//! Two-lane highway merge simulator.
//!
//! The ego starts on lane 0 with a standing lane-change request toward lane
//! 1. Each step it picks one of three target-lane gaps (which drives a
//! speed controller) and whether to move laterally now. Surrounding traffic
//! follows the Intelligent Driver Model and never changes lanes. Lateral
//! progress only advances while a time-headway safety margin holds on the
//! target lane; otherwise an in-progress maneuver is rolled back.

mod action;
mod encode;
mod gaps;
mod scene;

pub use action::{ActionId, GapChoice, Lateral, NUM_ACTIONS};
pub use encode::{
    encode_state, is_sentinel_slot, StateVector, ACCEL_SCALE, MAX_SLOTS, POSITION_SCALE,
    SENTINEL_POSITION, SPEED_SCALE, STATE_DIM,
};
pub use gaps::{candidate_gaps, gap_for, Gap, OPEN_GAP_HEADWAY};
pub use scene::{
    Phase, Scene, StepOutcome, Termination, VehicleState, CURRENT_LANE, TARGET_LANE,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expert::TaskSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("cannot step a terminated scene")]
    TerminalScene,
    #[error("action index {0} is outside 0..6")]
    InvalidAction(usize),
    #[error("invalid environment configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid task: {0}")]
    InvalidTask(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IdmParams {
    pub max_accel: f64,
    pub comfort_decel: f64,
    pub time_headway: f64,
    pub min_spacing: f64,
    pub exponent: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        Self {
            max_accel: 1.5,
            comfort_decel: 2.0,
            time_headway: 1.2,
            min_spacing: 2.0,
            exponent: 4.0,
        }
    }
}

/// Scenario settings shared by every driving style.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    /// Step length, s.
    pub dt: f64,
    /// Episode step limit.
    pub horizon: u32,
    /// Lateral progress per committed step.
    pub lateral_rate: f64,
    pub min_vehicles: usize,
    pub max_vehicles: usize,
    /// Initial ego speed, m/s.
    pub ego_speed: f64,
    /// Range of the shared flow speed on each lane, m/s.
    pub target_lane_speed: [f64; 2],
    pub current_lane_speed: [f64; 2],
    /// Per-vehicle deviation from its lane's flow speed, m/s.
    pub speed_jitter: f64,
    /// Probability that a sampled vehicle is placed ahead of the ego on its own lane.
    pub current_lane_share: f64,
    /// Range of bumper-to-bumper spacing between consecutive spawned vehicles, m.
    pub spawn_gap: [f64; 2],
    /// Minimum gap between the ego and a spawned vehicle ahead on its own lane, m.
    pub min_lead_gap: f64,
    pub vehicle_length: f64,
    /// Time headway on the target lane below which lateral motion is refused or undone, s.
    pub safety_headway: f64,
    /// Absolute bumper distance below which lateral motion is refused or undone, m.
    pub safety_distance: f64,
    pub traffic_accel: [f64; 2],
    pub idm: IdmParams,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            horizon: 300,
            lateral_rate: 0.04,
            min_vehicles: 3,
            max_vehicles: 10,
            ego_speed: 27.0,
            target_lane_speed: [22.0, 30.0],
            current_lane_speed: [28.0, 34.0],
            speed_jitter: 1.0,
            current_lane_share: 0.2,
            spawn_gap: [60.0, 240.0],
            min_lead_gap: 60.0,
            vehicle_length: 4.8,
            safety_headway: 0.5,
            safety_distance: 1.0,
            traffic_accel: [-6.0, 2.0],
            idm: IdmParams::default(),
        }
    }
}

impl EnvConfig {
    pub fn zero_traffic() -> Self {
        Self {
            min_vehicles: 0,
            max_vehicles: 0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let ranges_ok = |r: [f64; 2]| r[0] <= r[1] && r[0] >= 0.0 && r[1].is_finite();
        let ok = self.dt > 0.0
            && self.horizon >= 1
            && self.lateral_rate > 0.0
            && self.lateral_rate <= 1.0
            && self.min_vehicles <= self.max_vehicles
            && self.max_vehicles <= MAX_SLOTS
            && self.ego_speed >= 0.0
            && ranges_ok(self.target_lane_speed)
            && ranges_ok(self.current_lane_speed)
            && (0.0..=1.0).contains(&self.current_lane_share)
            && self.speed_jitter >= 0.0
            && self.spawn_gap[0] > 0.0
            && self.spawn_gap[0] <= self.spawn_gap[1]
            && self.min_lead_gap > 0.0
            && self.vehicle_length > 0.0
            && self.safety_headway >= 0.0
            && self.safety_distance > 0.0
            && self.traffic_accel[0] < 0.0
            && self.traffic_accel[1] > 0.0;
        if ok {
            Ok(())
        } else {
            Err(SimError::InvalidConfig(format!("{self:?}")))
        }
    }

    /// Committed steps needed to complete a lane change.
    pub fn lateral_steps_needed(&self) -> u32 {
        (1.0 / self.lateral_rate - 1e-9).ceil().max(1.0) as u32
    }
}

/// Ego speed controller gains.
const POSITION_GAIN: f64 = 0.4;
const SPEED_GAIN: f64 = 1.5;
/// Catch-up speed allowed toward a gap, as seconds of full acceleration.
const APPROACH_TIME: f64 = 4.0;
/// Upper bound on that catch-up speed, m/s.
const MAX_APPROACH_SPEED: f64 = 10.0;
/// Car-following parameters used to cap the ego's acceleration.
const EGO_FOLLOW_HEADWAY: f64 = 0.8;
const EGO_FOLLOW_DECEL: f64 = 3.0;
const EGO_FOLLOW_SPACING: f64 = 2.0;

/// Environment bound to one driving style.
#[derive(Debug, Clone)]
pub struct Simulator {
    env: EnvConfig,
    task: TaskSpec,
}

impl Simulator {
    pub fn new(env: EnvConfig, task: TaskSpec) -> Result<Self, SimError> {
        env.validate()?;
        task.validate()
            .map_err(|e| SimError::InvalidTask(e.to_string()))?;
        Ok(Self { env, task })
    }

    pub fn env(&self) -> &EnvConfig {
        &self.env
    }

    pub fn task(&self) -> &TaskSpec {
        &self.task
    }

    pub fn reset(&self, seed: u64) -> Scene {
        let env = &self.env;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ego = VehicleState {
            position: 0.0,
            lane: CURRENT_LANE,
            lateral: 0.0,
            speed: env.ego_speed,
            accel: 0.0,
            length: env.vehicle_length,
            desired_speed: env.ego_speed,
        };
        let count = rng.gen_range(env.min_vehicles..=env.max_vehicles);
        let on_current = (0..count)
            .filter(|_| rng.gen::<f64>() < env.current_lane_share)
            .count();
        let mut others = Vec::with_capacity(count);
        if count > on_current {
            // Platoon on the target lane, slid so the ego sits at a uniformly
            // random point along it.
            let flow = sample_range(&mut rng, env.target_lane_speed);
            let mut platoon = self.platoon(&mut rng, TARGET_LANE, count - on_current, flow);
            let extent = platoon.last().map_or(0.0, |v| v.position) - platoon[0].rear();
            let shift = platoon[0].rear() + rng.gen::<f64>() * extent;
            for v in &mut platoon {
                v.position -= shift;
            }
            others.extend(platoon);
        }
        if on_current > 0 {
            let flow = sample_range(&mut rng, env.current_lane_speed);
            let mut platoon = self.platoon(&mut rng, CURRENT_LANE, on_current, flow);
            let shift = env.min_lead_gap + env.vehicle_length - platoon[0].position;
            for v in &mut platoon {
                v.position += shift;
            }
            others.extend(platoon);
        }
        Scene {
            ego,
            others,
            clock: 0,
            phase: Phase::Deciding,
            seed,
            lateral_steps: 0,
            maneuver_start: None,
            aborts: 0,
            termination: Termination::None,
        }
    }

    /// `n` vehicles on `lane`, rearmost front bumper at 0, spaced by draws from `spawn_gap`.
    fn platoon(&self, rng: &mut ChaCha8Rng, lane: u8, n: usize, flow: f64) -> Vec<VehicleState> {
        let env = &self.env;
        let mut position = 0.0;
        (0..n)
            .map(|i| {
                if i > 0 {
                    position += sample_range(rng, env.spawn_gap) + env.vehicle_length;
                }
                let jitter = env.speed_jitter * (2.0 * rng.gen::<f64>() - 1.0);
                let speed = (flow + jitter).max(0.0);
                VehicleState {
                    position,
                    lane,
                    lateral: 0.0,
                    speed,
                    accel: 0.0,
                    length: env.vehicle_length,
                    desired_speed: speed,
                }
            })
            .collect()
    }

    /// Advances the scene by one step under `action`.
    pub fn step(&self, scene: &Scene, action: ActionId) -> Result<StepOutcome, SimError> {
        if scene.is_terminal() {
            return Err(SimError::TerminalScene);
        }
        let env = &self.env;
        let dt = env.dt;
        let needed = env.lateral_steps_needed();

        let gap = gap_for(scene, action.gap());
        let ego_accel = self.ego_accel(scene, &gap);
        let npc_accels: Vec<f64> = (0..scene.others.len())
            .map(|i| self.traffic_accel(scene, i))
            .collect();

        let mut next = scene.clone();
        integrate(&mut next.ego, ego_accel, dt);
        for (v, a) in next.others.iter_mut().zip(npc_accels) {
            integrate(v, a, dt);
        }

        let margin_ok = self.merge_margin_ok(&next);
        let was_aborting = scene.phase == Phase::Aborted;
        match (action.lateral(), margin_ok) {
            (Lateral::Commit, true) => {
                if next.lateral_steps == 0 {
                    next.maneuver_start = Some(scene.clock);
                }
                next.lateral_steps += 1;
                next.phase = Phase::Executing;
            }
            (_, false) if next.lateral_steps > 0 => {
                next.lateral_steps -= 1;
                next.phase = Phase::Aborted;
                if !was_aborting {
                    next.aborts += 1;
                }
            }
            (Lateral::Hold, true) if next.lateral_steps > 0 => {
                next.lateral_steps -= 1;
                next.phase = Phase::Aborted;
            }
            _ => next.phase = Phase::Deciding,
        }
        if next.lateral_steps == 0 {
            next.maneuver_start = None;
            if next.phase == Phase::Aborted {
                next.phase = Phase::Deciding;
            }
        }
        if next.lateral_steps >= needed {
            next.lateral_steps = needed;
            next.phase = Phase::Done;
            next.ego.lane = TARGET_LANE;
        }
        next.ego.lateral = f64::from(next.lateral_steps) / f64::from(needed);
        next.clock += 1;

        next.termination = if self.any_collision(&next) {
            Termination::Crash
        } else if next.phase == Phase::Done {
            Termination::Success
        } else if next.clock >= env.horizon {
            Termination::Timeout
        } else {
            Termination::None
        };
        Ok(StepOutcome {
            terminal: next.termination.is_terminal(),
            termination: next.termination,
            decision_steps: next.decision_steps(),
            rollout_steps: next.clock,
            scene: next,
        })
    }

    fn ego_accel(&self, scene: &Scene, gap: &Gap) -> f64 {
        let task = &self.task;
        let ego = &scene.ego;
        let approach = (APPROACH_TIME * task.max_accel).min(MAX_APPROACH_SPEED);
        let mut reference = gap.settle_speed(task.target_speed)
            + (POSITION_GAIN * gap.center).clamp(-approach, approach);
        // Once moving across, the driver settles toward its own preferred speed.
        if scene.lateral_steps > 0 {
            reference = task.target_speed;
        }
        let mut accel = SPEED_GAIN * (reference - ego.speed);

        if let Some(lead) = nearest_leader(scene, CURRENT_LANE, ego.position, None) {
            accel = accel.min(self.ego_follow_cap(ego, lead));
        }
        if scene.lateral_steps > 0 {
            if let Some(lead) = nearest_leader(scene, TARGET_LANE, ego.position, None) {
                accel = accel.min(self.ego_follow_cap(ego, lead));
            }
        }
        accel.clamp(task.min_accel, task.max_accel)
    }

    fn ego_follow_cap(&self, ego: &VehicleState, lead: &VehicleState) -> f64 {
        let a_max = self.task.max_accel;
        let spacing = lead.rear() - ego.position;
        if spacing <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let desired = EGO_FOLLOW_SPACING
            + (ego.speed * EGO_FOLLOW_HEADWAY
                + ego.speed * (ego.speed - lead.speed)
                    / (2.0 * (a_max * EGO_FOLLOW_DECEL).sqrt()))
            .max(0.0);
        a_max * (1.0 - (desired / spacing).powi(2))
    }

    fn traffic_accel(&self, scene: &Scene, index: usize) -> f64 {
        let me = &scene.others[index];
        let p = &self.env.idm;
        let free = if me.desired_speed > 0.0 {
            (me.speed / me.desired_speed).powf(p.exponent)
        } else {
            1.0
        };
        let mut accel = p.max_accel * (1.0 - free);
        let ego_on_lane = match me.lane {
            CURRENT_LANE => scene.lateral_steps < self.env.lateral_steps_needed(),
            _ => scene.lateral_steps > 0,
        };
        let npc_leader = nearest_leader(scene, me.lane, me.position, Some(index));
        let leader = match npc_leader {
            Some(l) if ego_on_lane && scene.ego.position > me.position && scene.ego.position < l.position => {
                Some(&scene.ego)
            }
            None if ego_on_lane && scene.ego.position > me.position => Some(&scene.ego),
            other => other,
        };
        if let Some(lead) = leader {
            let spacing = lead.rear() - me.position;
            if spacing <= 0.0 {
                accel = f64::NEG_INFINITY;
            } else {
                let desired = p.min_spacing
                    + (me.speed * p.time_headway
                        + me.speed * (me.speed - lead.speed)
                            / (2.0 * (p.max_accel * p.comfort_decel).sqrt()))
                    .max(0.0);
                accel -= p.max_accel * (desired / spacing).powi(2);
            }
        }
        accel.clamp(self.env.traffic_accel[0], self.env.traffic_accel[1])
    }

    /// Time-headway and distance margins to the target-lane neighbors of the ego.
    pub fn merge_margin_ok(&self, scene: &Scene) -> bool {
        let ego = &scene.ego;
        let ego_center = ego.center();
        let mut ok = true;
        for (_, v) in scene.target_lane_vehicles() {
            if v.center() > ego_center {
                let gap = v.rear() - ego.position;
                ok &= gap > self.env.safety_distance && gap >= self.env.safety_headway * ego.speed;
            } else {
                let gap = ego.rear() - v.position;
                ok &= gap > self.env.safety_distance && gap >= self.env.safety_headway * v.speed;
            }
        }
        ok
    }

    fn any_collision(&self, scene: &Scene) -> bool {
        let needed = self.env.lateral_steps_needed();
        for lane in [CURRENT_LANE, TARGET_LANE] {
            let mut occupants: Vec<&VehicleState> =
                scene.others.iter().filter(|v| v.lane == lane).collect();
            let ego_here = match lane {
                CURRENT_LANE => scene.lateral_steps < needed,
                _ => scene.lateral_steps > 0,
            };
            if ego_here {
                occupants.push(&scene.ego);
            }
            occupants.sort_by(|a, b| a.position.total_cmp(&b.position));
            if occupants
                .windows(2)
                .any(|pair| pair[1].rear() - pair[0].position <= 0.0)
            {
                return true;
            }
        }
        false
    }
}

fn sample_range(rng: &mut ChaCha8Rng, range: [f64; 2]) -> f64 {
    if range[0] < range[1] {
        rng.gen_range(range[0]..=range[1])
    } else {
        range[0]
    }
}

/// Nearest vehicle on `lane` whose front bumper is ahead of `position`.
fn nearest_leader<'a>(
    scene: &'a Scene,
    lane: u8,
    position: f64,
    exclude: Option<usize>,
) -> Option<&'a VehicleState> {
    scene
        .others
        .iter()
        .enumerate()
        .filter(|(i, v)| Some(*i) != exclude && v.lane == lane && v.position > position)
        .map(|(_, v)| v)
        .min_by(|a, b| a.position.total_cmp(&b.position))
}

/// Constant-acceleration update that never reverses: a vehicle that would
/// overshoot zero speed instead decelerates exactly to rest.
fn integrate(v: &mut VehicleState, accel: f64, dt: f64) {
    let accel = if v.speed + accel * dt < 0.0 {
        -v.speed / dt
    } else {
        accel
    };
    v.position += v.speed * dt + 0.5 * accel * dt * dt;
    v.speed = (v.speed + accel * dt).max(0.0);
    v.accel = accel;
}
