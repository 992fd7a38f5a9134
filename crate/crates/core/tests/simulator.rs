use metairl::expert::{oracle_action, TaskSpec};
use metairl::sim::*;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn styles() -> [TaskSpec; 3] {
    [
        TaskSpec::conservative(),
        TaskSpec::neutral(),
        TaskSpec::aggressive(),
    ]
}

fn sim(task: TaskSpec) -> Simulator {
    Simulator::new(EnvConfig::default(), task).unwrap()
}

fn vehicle(position: f64, lane: u8, speed: f64) -> VehicleState {
    VehicleState {
        position,
        lane,
        lateral: 0.0,
        speed,
        accel: 0.0,
        length: 4.8,
        desired_speed: speed,
    }
}

#[test]
fn reset_is_deterministic_per_seed() {
    let s = sim(TaskSpec::neutral());
    for seed in [0, 7, 123_456] {
        assert_eq!(s.reset(seed), s.reset(seed));
    }
    assert_ne!(s.reset(1).others, s.reset(2).others);
}

#[test]
fn zero_traffic_scene_has_only_the_ego() {
    let s = Simulator::new(EnvConfig::zero_traffic(), TaskSpec::neutral()).unwrap();
    let scene = s.reset(3);
    assert!(scene.others.is_empty());
    assert_eq!(scene.ego.lane, CURRENT_LANE);
    assert_eq!(scene.ego.speed, EnvConfig::default().ego_speed);
    let state = encode_state(&scene);
    for k in 0..MAX_SLOTS {
        assert!(is_sentinel_slot(&state, k));
    }
}

#[test]
fn vehicle_count_within_bounds_over_many_seeds() {
    let env = EnvConfig::default();
    let s = sim(TaskSpec::neutral());
    let mut seen = std::collections::BTreeSet::new();
    for seed in 0..1000 {
        let scene = s.reset(seed);
        let n = scene.others.len();
        assert!((env.min_vehicles..=env.max_vehicles).contains(&n), "seed {seed}: {n}");
        seen.insert(n);
        for lane in [CURRENT_LANE, TARGET_LANE] {
            let mut pos: Vec<&VehicleState> = scene.others.iter().filter(|v| v.lane == lane).collect();
            pos.sort_by(|a, b| a.position.total_cmp(&b.position));
            for w in pos.windows(2) {
                assert!(w[1].rear() - w[0].position > 0.0, "seed {seed}: overlap at spawn");
            }
        }
        for v in scene.others.iter().filter(|v| v.lane == CURRENT_LANE) {
            assert!(v.rear() > scene.ego.position, "own-lane traffic spawns ahead only");
        }
    }
    assert_eq!(seen.len(), env.max_vehicles - env.min_vehicles + 1);
}

#[test]
fn lone_ego_commit_succeeds_in_exactly_the_lateral_step_count() {
    let env = EnvConfig::zero_traffic();
    let expected = (1.0 / env.lateral_rate).ceil() as u32;
    for task in styles() {
        let s = Simulator::new(env, task).unwrap();
        let mut scene = s.reset(11);
        let commit = ActionId::encode(GapChoice::Adjacent, Lateral::Commit);
        let mut steps = 0;
        loop {
            let out = s.step(&scene, commit).unwrap();
            steps += 1;
            if out.terminal {
                assert_eq!(out.termination, Termination::Success);
                assert_eq!(out.rollout_steps, expected);
                assert_eq!(out.decision_steps, 0);
                assert_eq!(out.scene.ego.lane, TARGET_LANE);
                assert_eq!(out.scene.ego.lateral, 1.0);
                break;
            }
            scene = out.scene;
        }
        assert_eq!(steps, expected);
    }
}

#[test]
fn holding_forever_times_out_at_the_horizon() {
    let env = EnvConfig::default();
    let hold = ActionId::encode(GapChoice::Adjacent, Lateral::Hold);
    for task in styles() {
        let s = sim(task);
        for seed in 0..20 {
            let mut scene = s.reset(seed);
            loop {
                let out = s.step(&scene, hold).unwrap();
                if out.terminal {
                    assert_eq!(out.termination, Termination::Timeout);
                    assert_eq!(out.rollout_steps, env.horizon);
                    assert_eq!(out.decision_steps, env.horizon);
                    break;
                }
                scene = out.scene;
            }
        }
    }
}

#[test]
fn stepping_a_terminal_scene_is_rejected() {
    let s = Simulator::new(EnvConfig::zero_traffic(), TaskSpec::neutral()).unwrap();
    let mut scene = s.reset(0);
    scene.termination = Termination::Success;
    assert_eq!(
        s.step(&scene, ActionId::new(0).unwrap()),
        Err(SimError::TerminalScene)
    );
}

/// First step at which an ego braking at `decel` from `v0` has covered `gap`.
fn braking_crash_step(v0: f64, decel: f64, gap: f64, dt: f64) -> u32 {
    let mut k = 1;
    loop {
        let t = f64::from(k) * dt;
        if v0 * t - 0.5 * decel * t * t >= gap {
            return k;
        }
        assert!(v0 - decel * t > 0.0, "ego stops before reaching the lead");
        k += 1;
    }
}

#[test]
fn ego_behind_stopped_lead_crashes_at_kinematic_step() {
    let env = EnvConfig::zero_traffic();
    let task = TaskSpec::conservative();
    let s = Simulator::new(env, task.clone()).unwrap();
    for gap in [0.0, 2.0, 10.0, 30.0, 50.0] {
        for action in ActionId::all() {
            let mut scene = s.reset(0);
            let lead_front = scene.ego.position + gap + 4.8;
            scene.others.push(vehicle(lead_front, CURRENT_LANE, 0.0));
            let expected = braking_crash_step(scene.ego.speed, -task.min_accel, gap, env.dt);
            let mut steps = 0;
            let termination = loop {
                let out = s.step(&scene, action).unwrap();
                steps += 1;
                if out.terminal {
                    break out.termination;
                }
                scene = out.scene;
            };
            assert_eq!(termination, Termination::Crash, "gap {gap} action {action}");
            assert_eq!(steps, expected, "gap {gap} action {action}");
        }
    }
}

/// Bumper overlap check written independently of the simulator.
fn overlaps(scene: &Scene, needed: u32) -> bool {
    let mut lanes: [Vec<(f64, f64)>; 2] = [Vec::new(), Vec::new()];
    for v in &scene.others {
        lanes[v.lane as usize].push((v.rear(), v.position));
    }
    let ego = (scene.ego.rear(), scene.ego.position);
    if scene.lateral_steps < needed {
        lanes[0].push(ego);
    }
    if scene.lateral_steps > 0 {
        lanes[1].push(ego);
    }
    lanes.iter().any(|lane| {
        (0..lane.len()).any(|i| {
            (0..lane.len()).any(|j| {
                i != j && lane[i].1 <= lane[j].1 && lane[j].0 - lane[i].1 <= 0.0
            })
        })
    })
}

/// Rolls out episodes under random and oracle actions, checking per-step invariants.
#[test]
fn per_step_invariants_hold_over_many_episodes() {
    let env = EnvConfig::default();
    let needed = env.lateral_steps_needed();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut terminations = [0usize; 4];
    for (ti, task) in styles().into_iter().enumerate() {
        let s = sim(task.clone());
        for ep in 0..120u64 {
            let use_oracle = ep % 2 == 0;
            let mut scene = s.reset(ep * 7 + ti as u64);
            loop {
                let action = if use_oracle {
                    oracle_action(&scene, &task, &env)
                } else {
                    ActionId::new(rng.gen_range(0..NUM_ACTIONS)).unwrap()
                };
                let out = s.step(&scene, action).unwrap();
                let next = &out.scene;
                assert_eq!(next.clock, scene.clock + 1);
                assert_eq!(out.terminal, out.termination != Termination::None);
                assert!(next.clock <= env.horizon);

                let pairs = std::iter::once((&scene.ego, &next.ego))
                    .chain(scene.others.iter().zip(&next.others));
                for (i, (a, b)) in pairs.enumerate() {
                    let predicted = a.position + a.speed * env.dt + 0.5 * b.accel * env.dt * env.dt;
                    assert!((b.position - predicted).abs() < 1e-9, "vehicle {i} teleported");
                    assert!(b.speed >= 0.0);
                    assert!((0.0..=1.0).contains(&b.lateral));
                    if i == 0 {
                        assert!(b.accel >= task.min_accel - 1e-12 && b.accel <= task.max_accel + 1e-12);
                    } else {
                        assert!(b.accel >= env.traffic_accel[0] - 1e-12);
                        assert!(b.accel <= env.traffic_accel[1] + 1e-12);
                    }
                }

                assert_eq!(
                    out.termination == Termination::Crash,
                    overlaps(next, needed),
                    "crash flag disagrees with geometry"
                );
                if out.terminal {
                    terminations[out.termination.code() as usize] += 1;
                    if use_oracle {
                        assert_ne!(out.termination, Termination::Crash, "oracle crashed");
                    }
                    break;
                }
                scene = out.scene;
            }
        }
    }
    assert_eq!(terminations[0], 0);
    assert_eq!(terminations.iter().sum::<usize>(), 360);
}

#[test]
fn identical_action_sequences_replay_bit_identically() {
    let s = sim(TaskSpec::aggressive());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let actions: Vec<ActionId> = (0..300)
        .map(|_| ActionId::new(rng.gen_range(0..NUM_ACTIONS)).unwrap())
        .collect();
    let run = || {
        let mut scene = s.reset(42);
        let mut trace = vec![scene.clone()];
        for &a in &actions {
            let out = s.step(&scene, a).unwrap();
            trace.push(out.scene.clone());
            if out.terminal {
                break;
            }
            scene = out.scene;
        }
        trace
    };
    assert_eq!(run(), run());
}

#[test]
fn encoding_has_fixed_length_and_finite_entries() {
    let s = sim(TaskSpec::neutral());
    for seed in 0..200 {
        let state = encode_state(&s.reset(seed));
        assert_eq!(state.len(), STATE_DIM);
        assert!(state.iter().all(|v| v.is_finite()));
    }
}

#[test]
fn far_vehicle_changes_exactly_one_slot() {
    let s = Simulator::new(EnvConfig::zero_traffic(), TaskSpec::neutral()).unwrap();
    let mut scene = s.reset(0);
    scene.others = vec![
        vehicle(30.0, TARGET_LANE, 25.0),
        vehicle(-20.0, TARGET_LANE, 26.0),
        vehicle(80.0, CURRENT_LANE, 28.0),
    ];
    let before = encode_state(&scene);
    scene.others.push(vehicle(scene.ego.position + 500.0, TARGET_LANE, 27.0));
    let after = encode_state(&scene);
    let changed: Vec<usize> = (0..MAX_SLOTS)
        .filter(|k| {
            let b = 4 + 4 * k;
            before[b..b + 4] != after[b..b + 4]
        })
        .collect();
    assert_eq!(changed, vec![3]);
    assert_eq!(before[..4], after[..4]);
}

#[test]
fn slots_are_sorted_by_distance() {
    let s = sim(TaskSpec::neutral());
    for seed in 0..200 {
        let scene = s.reset(seed);
        let state = encode_state(&scene);
        let filled = scene.others.len();
        let d: Vec<f64> = (0..filled).map(|k| state[4 + 4 * k].abs()).collect();
        assert!(d.windows(2).all(|w| w[0] <= w[1]), "seed {seed}");
        assert!((filled..MAX_SLOTS).all(|k| is_sentinel_slot(&state, k)));
    }
}

proptest! {
    #[test]
    fn encoding_ignores_storage_order(seed in 0u64..10_000, shuffle in any::<u64>()) {
        let s = sim(TaskSpec::neutral());
        let scene = s.reset(seed);
        let mut permuted = scene.clone();
        permuted.others.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle));
        prop_assert_eq!(encode_state(&scene), encode_state(&permuted));
    }

    #[test]
    fn action_encoding_round_trips(index in 0usize..NUM_ACTIONS) {
        let a = ActionId::new(index).unwrap();
        let (g, l) = a.decode();
        prop_assert_eq!(ActionId::encode(g, l), a);
    }
}

#[test]
fn empty_target_lane_gives_three_open_gaps() {
    let s = Simulator::new(EnvConfig::zero_traffic(), TaskSpec::neutral()).unwrap();
    let gaps = candidate_gaps(&s.reset(0));
    for (g, kind) in gaps.iter().zip(GapChoice::ALL) {
        assert_eq!(g.kind, kind);
        assert!(g.is_open_road());
        assert!(g.length.is_infinite());
        assert_eq!(g.center, 0.0);
    }
}

#[test]
fn vehicle_beside_ego_splits_the_neighborhood() {
    let s = Simulator::new(EnvConfig::zero_traffic(), TaskSpec::neutral()).unwrap();
    let mut scene = s.reset(0);
    // Center 0.1 m ahead of the ego's center.
    scene.others = vec![vehicle(scene.ego.position + 0.1, TARGET_LANE, 27.0)];
    let [front, adjacent, rear] = candidate_gaps(&scene);
    assert_eq!(adjacent.lead, Some(0));
    assert_eq!(adjacent.rear, None);
    assert!(adjacent.center < 0.0, "adjacent gap trails the vehicle");
    assert_eq!(rear.lead, Some(0));
    assert_eq!(front.rear, Some(0));
    assert_eq!(front.lead, None);
    assert!(front.center > 0.0, "front gap leads the vehicle");
}

/// Neighborhood tiling over many scenes: the distinct gaps are bounded by
/// consecutive target-lane vehicles nearest the ego, and no vehicle bounds
/// more than one gap from the same side.
#[test]
fn gaps_tile_the_neighborhood() {
    let task = TaskSpec::neutral();
    let env = EnvConfig::default();
    let s = sim(task.clone());
    let mut scenes = 0;
    for seed in 0..250u64 {
        let mut scene = s.reset(seed);
        for _ in 0..4 {
            scenes += 1;
            check_tiling(&scene);
            for _ in 0..15 {
                let out = s.step(&scene, oracle_action(&scene, &task, &env)).unwrap();
                if out.terminal {
                    break;
                }
                scene = out.scene;
            }
            if scene.is_terminal() {
                break;
            }
        }
    }
    assert!(scenes >= 1000, "{scenes}");
}

fn check_tiling(scene: &Scene) {
    let c = scene.ego.center();
    let mut ahead: Vec<usize> = Vec::new();
    let mut behind: Vec<usize> = Vec::new();
    for (i, v) in scene.others.iter().enumerate() {
        if v.lane != TARGET_LANE {
            continue;
        }
        if v.center() > c {
            ahead.push(i);
        } else {
            behind.push(i);
        }
    }
    ahead.sort_by(|&a, &b| scene.others[a].center().total_cmp(&scene.others[b].center()));
    behind.sort_by(|&a, &b| scene.others[b].center().total_cmp(&scene.others[a].center()));
    let mut chain: Vec<Option<usize>> = Vec::new();
    chain.push(if ahead.len() >= 2 { Some(ahead[1]) } else { None });
    chain.extend(ahead.iter().take(2).rev().map(|&i| Some(i)));
    chain.extend(behind.iter().take(2).map(|&i| Some(i)));
    chain.push(if behind.len() >= 2 { Some(behind[1]) } else { None });
    chain.dedup();
    let expected: Vec<(Option<usize>, Option<usize>)> = if chain.len() == 1 {
        vec![(None, None)]
    } else {
        chain.windows(2).map(|w| (w[0], w[1])).collect()
    };

    let gaps = candidate_gaps(scene);
    let mut distinct: Vec<(Option<usize>, Option<usize>)> = Vec::new();
    for g in &gaps {
        if !distinct.contains(&(g.lead, g.rear)) {
            distinct.push((g.lead, g.rear));
        }
    }
    assert_eq!(distinct, expected, "seed {}", scene.seed);
    let neighborhood: Vec<usize> = ahead.iter().take(2).chain(behind.iter().take(2)).copied().collect();
    for &v in &neighborhood {
        let as_lead = distinct.iter().filter(|g| g.0 == Some(v)).count();
        let as_rear = distinct.iter().filter(|g| g.1 == Some(v)).count();
        assert!(as_lead <= 1 && as_rear <= 1 && as_lead + as_rear >= 1);
    }
    for g in &gaps {
        if let (Some(l), Some(r)) = (g.lead, g.rear) {
            let expected_len = scene.others[l].rear() - scene.others[r].position;
            assert_eq!(g.length, expected_len);
        } else {
            assert!(g.length.is_infinite());
        }
    }
    assert!(gaps[0].center >= gaps[1].center && gaps[1].center >= gaps[2].center);
}
