//! Rule-based expert driver.

use crate::sim::{
    candidate_gaps, ActionId, EnvConfig, Gap, GapChoice, Lateral, Scene, VehicleState,
};

use super::TaskSpec;

/// Horizon over which the ego is expected to settle into a chosen gap, s.
pub const REACH_TIME: f64 = 12.0;

/// Feasibility of one candidate gap for a given style.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapAssessment {
    pub gap: Gap,
    /// Constant acceleration that would place the ego at the gap center,
    /// moving at the gap speed, after `REACH_TIME`.
    pub required_accel: f64,
    pub accel_ok: bool,
    pub length_ok: bool,
}

impl GapAssessment {
    pub fn feasible(&self) -> bool {
        self.accel_ok && self.length_ok
    }
}

pub fn assess_gaps(scene: &Scene, task: &TaskSpec) -> [GapAssessment; 3] {
    let ego = &scene.ego;
    candidate_gaps(scene).map(|gap| {
        let gap_speed = gap.settle_speed(task.target_speed);
        let required_accel =
            2.0 * (gap.center + (gap_speed - ego.speed) * REACH_TIME) / (REACH_TIME * REACH_TIME);
        let accel_ok = required_accel <= task.max_accel && required_accel >= task.min_accel;
        let needed = ego.length + 2.0 * task.min_gap * gap_speed;
        GapAssessment {
            gap,
            required_accel,
            accel_ok,
            length_ok: gap.length >= needed,
        }
    })
}

/// Gap the oracle steers toward, and whether it is fully feasible.
///
/// The nearest feasible gap wins, ties going to adjacent, then front, then
/// rear. With no feasible gap the ego tracks the nearest gap it can reach
/// within its acceleration limits (the adjacent one if none) and waits.
pub fn choose_gap(assessments: &[GapAssessment; 3]) -> (GapChoice, bool) {
    let order = [GapChoice::Adjacent, GapChoice::Front, GapChoice::Rear];
    let nearest = |filter: &dyn Fn(&GapAssessment) -> bool| {
        order
            .iter()
            .copied()
            .filter(|g| filter(&assessments[*g as usize]))
            .min_by(|a, b| {
                let da = assessments[*a as usize].gap.center.abs();
                let db = assessments[*b as usize].gap.center.abs();
                da.total_cmp(&db)
            })
    };
    if let Some(g) = nearest(&|a| a.feasible()) {
        return (g, true);
    }
    (nearest(&|a| a.accel_ok).unwrap_or(GapChoice::Adjacent), false)
}

pub fn oracle_action(scene: &Scene, task: &TaskSpec, env: &EnvConfig) -> ActionId {
    let assessments = assess_gaps(scene, task);
    let (choice, feasible) = choose_gap(&assessments);
    let adjacent = &assessments[GapChoice::Adjacent as usize].gap;
    let beside = assessments[choice as usize].gap.same_space(adjacent);
    let commit = feasible
        && beside
        && margins_hold(scene, adjacent, task, env);
    let lateral = if commit { Lateral::Commit } else { Lateral::Hold };
    ActionId::encode(choice, lateral)
}

/// Whether both neighbors of the adjacent gap leave at least the style's
/// time gap. Before a maneuver starts, the check must hold over a
/// constant-speed lookahead of `commit_patience` steps; once executing the
/// threshold is halved and only the present is checked.
fn margins_hold(scene: &Scene, gap: &Gap, task: &TaskSpec, env: &EnvConfig) -> bool {
    let ego = &scene.ego;
    let lead = gap.lead.map(|i| &scene.others[i]);
    let rear = gap.rear.map(|i| &scene.others[i]);
    let (threshold, lookahead) = if scene.lateral_steps > 0 {
        (0.5 * task.min_gap, 0)
    } else {
        (task.min_gap, task.commit_patience)
    };
    (0..=lookahead).all(|k| {
        let t = f64::from(k) * env.dt;
        let ego_front = ego.position + ego.speed * t;
        let ego_rear = ego_front - ego.length;
        let front_ok = lead.map_or(true, |l| {
            let gap = advance(l, t) - l.length - ego_front;
            gap > env.safety_distance && gap / ego.speed.max(1.0) >= threshold
        });
        let rear_ok = rear.map_or(true, |r| {
            let gap = ego_rear - advance(r, t);
            gap > env.safety_distance && gap / r.speed.max(1.0) >= threshold
        });
        front_ok && rear_ok
    })
}

fn advance(v: &VehicleState, t: f64) -> f64 {
    v.position + v.speed * t
}
