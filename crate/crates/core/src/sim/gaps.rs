//! Merge gaps on the target lane around the ego's projection.

use super::action::GapChoice;
use super::scene::Scene;

/// Time headway kept from a single bounding vehicle when the other side of a
/// gap is open road, s. Longer than any built-in style's minimum gap.
pub const OPEN_GAP_HEADWAY: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gap {
    pub kind: GapChoice,
    /// Index into `Scene::others` of the vehicle bounding the gap ahead.
    pub lead: Option<usize>,
    /// Index into `Scene::others` of the vehicle bounding the gap behind.
    pub rear: Option<usize>,
    /// Free bumper-to-bumper length; infinite when either side is open road.
    pub length: f64,
    /// Where the ego's center should sit in this gap, relative to its current center.
    pub center: f64,
    /// Mean speed of the bounding vehicles, `None` for open road.
    pub speed: Option<f64>,
}

impl Gap {
    pub fn is_open_road(&self) -> bool {
        self.lead.is_none() && self.rear.is_none()
    }

    /// Speed a driver preferring `cruise` would hold inside this gap: the
    /// traffic speed when a lead bounds it, otherwise at least `cruise`.
    pub fn settle_speed(&self, cruise: f64) -> f64 {
        match (self.lead, self.speed) {
            (Some(_), Some(v)) => v,
            (None, Some(v)) => v.max(cruise),
            _ => cruise,
        }
    }

    /// Whether two descriptors bound the same stretch of road.
    pub fn same_space(&self, other: &Gap) -> bool {
        self.lead == other.lead && self.rear == other.rear
    }
}

/// Front, adjacent and rear gaps, in that order.
///
/// The adjacent gap is bounded by the nearest target-lane vehicle whose
/// center is strictly ahead of the ego's center and the nearest one at or
/// behind it. The front and rear gaps continue the tiling one vehicle further
/// in each direction. When there is no vehicle to extend past, the adjacent
/// gap already reaches open road on that side, and the outer gap repeats it.
pub fn candidate_gaps(scene: &Scene) -> [Gap; 3] {
    let ego_center = scene.ego.center();
    let mut ahead: Vec<(usize, f64)> = Vec::new();
    let mut behind: Vec<(usize, f64)> = Vec::new();
    for (i, v) in scene.target_lane_vehicles() {
        let c = v.center();
        if c > ego_center {
            ahead.push((i, c));
        } else {
            behind.push((i, c));
        }
    }
    ahead.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    behind.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let first_ahead = ahead.first().map(|x| x.0);
    let second_ahead = ahead.get(1).map(|x| x.0);
    let first_behind = behind.first().map(|x| x.0);
    let second_behind = behind.get(1).map(|x| x.0);

    let adjacent = make_gap(scene, GapChoice::Adjacent, first_ahead, first_behind);
    let front = match first_ahead {
        Some(_) => make_gap(scene, GapChoice::Front, second_ahead, first_ahead),
        None => Gap {
            kind: GapChoice::Front,
            ..adjacent
        },
    };
    let rear = match first_behind {
        Some(_) => make_gap(scene, GapChoice::Rear, first_behind, second_behind),
        None => Gap {
            kind: GapChoice::Rear,
            ..adjacent
        },
    };
    [front, adjacent, rear]
}

pub fn gap_for(scene: &Scene, choice: GapChoice) -> Gap {
    candidate_gaps(scene)[choice as usize]
}

fn make_gap(scene: &Scene, kind: GapChoice, lead: Option<usize>, rear: Option<usize>) -> Gap {
    let ego = &scene.ego;
    let half = 0.5 * ego.length;
    let ego_center = ego.center();
    let lead_v = lead.map(|i| &scene.others[i]);
    let rear_v = rear.map(|i| &scene.others[i]);
    let (length, center, speed) = match (lead_v, rear_v) {
        (Some(l), Some(r)) => {
            let length = l.rear() - r.position;
            let mid = 0.5 * (l.rear() + r.position);
            (length, mid - ego_center, Some(0.5 * (l.speed + r.speed)))
        }
        (Some(l), None) => {
            let limit = l.rear() - OPEN_GAP_HEADWAY * l.speed - half - ego_center;
            (f64::INFINITY, limit.min(0.0), Some(l.speed))
        }
        (None, Some(r)) => {
            let limit = r.position + OPEN_GAP_HEADWAY * r.speed + half - ego_center;
            (f64::INFINITY, limit.max(0.0), Some(r.speed))
        }
        (None, None) => (f64::INFINITY, 0.0, None),
    };
    Gap {
        kind,
        lead,
        rear,
        length,
        center,
        speed,
    }
}
