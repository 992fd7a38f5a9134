//! Fixed-length feature encoding shared by the policy and discriminator.
//!
//! Layout (44 values):
//!
//! | index   | feature                                   | scale          |
//! |---------|-------------------------------------------|----------------|
//! | 0       | ego speed                                 | / 30 m/s       |
//! | 1       | ego acceleration                          | / 5 m/s^2      |
//! | 2       | ego lane id                               | raw            |
//! | 3       | ego lateral progress                      | raw, in [0, 1] |
//! | 4 + 4k  | slot k: relative center position         | / 100 m        |
//! | 5 + 4k  | slot k: relative speed                    | / 10 m/s       |
//! | 6 + 4k  | slot k: acceleration                      | / 5 m/s^2      |
//! | 7 + 4k  | slot k: lane id                           | raw            |
//!
//! Slots hold up to ten surrounding vehicles sorted by absolute relative
//! position; unused slots carry a relative position of +1000 m (encoded
//! as `SENTINEL_POSITION / POSITION_SCALE`) and zeros elsewhere.

use super::scene::Scene;

pub const STATE_DIM: usize = 44;
pub const EGO_FEATURES: usize = 4;
pub const SLOT_FEATURES: usize = 4;
pub const MAX_SLOTS: usize = 10;

pub const SPEED_SCALE: f64 = 30.0;
pub const ACCEL_SCALE: f64 = 5.0;
pub const POSITION_SCALE: f64 = 100.0;
pub const RELATIVE_SPEED_SCALE: f64 = 10.0;
pub const SENTINEL_POSITION: f64 = 1000.0;

pub type StateVector = [f64; STATE_DIM];

pub fn encode_state(scene: &Scene) -> StateVector {
    let ego = &scene.ego;
    let mut out = [0.0; STATE_DIM];
    out[0] = ego.speed / SPEED_SCALE;
    out[1] = ego.accel / ACCEL_SCALE;
    out[2] = f64::from(ego.lane);
    out[3] = ego.lateral;

    let ego_center = ego.center();
    let mut slots: Vec<[f64; SLOT_FEATURES]> = scene
        .others
        .iter()
        .map(|v| {
            [
                v.center() - ego_center,
                v.speed - ego.speed,
                v.accel,
                f64::from(v.lane),
            ]
        })
        .collect();
    // Full lexicographic order so storage order never matters.
    slots.sort_by(|a, b| {
        a[0].abs()
            .total_cmp(&b[0].abs())
            .then(a[0].total_cmp(&b[0]))
            .then(a[3].total_cmp(&b[3]))
            .then(a[1].total_cmp(&b[1]))
            .then(a[2].total_cmp(&b[2]))
    });

    for k in 0..MAX_SLOTS {
        let base = EGO_FEATURES + k * SLOT_FEATURES;
        match slots.get(k) {
            Some(s) => {
                out[base] = s[0] / POSITION_SCALE;
                out[base + 1] = s[1] / RELATIVE_SPEED_SCALE;
                out[base + 2] = s[2] / ACCEL_SCALE;
                out[base + 3] = s[3];
            }
            None => out[base] = SENTINEL_POSITION / POSITION_SCALE,
        }
    }
    out
}

/// True when slot `k` of an encoded state is the empty-slot sentinel.
pub fn is_sentinel_slot(state: &StateVector, k: usize) -> bool {
    let base = EGO_FEATURES + k * SLOT_FEATURES;
    state[base] == SENTINEL_POSITION / POSITION_SCALE
        && state[base + 1..base + SLOT_FEATURES].iter().all(|&v| v == 0.0)
}
