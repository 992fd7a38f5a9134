use metairl::expert::*;
use metairl::persist::PersistError;
use metairl::sim::*;
use proptest::prelude::*;

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

fn styles() -> [TaskSpec; 3] {
    [
        TaskSpec::conservative(),
        TaskSpec::neutral(),
        TaskSpec::aggressive(),
    ]
}

#[test]
fn empty_target_lane_commits_immediately_for_every_style() {
    let env = EnvConfig::zero_traffic();
    for task in styles() {
        let sim = Simulator::new(env, task.clone()).unwrap();
        let mut scene = sim.reset(1);
        assert_eq!(
            oracle_action(&scene, &task, &env),
            ActionId::encode(GapChoice::Adjacent, Lateral::Commit)
        );
        // Own-lane traffic ahead does not change that.
        scene.others.push(vehicle(120.0, CURRENT_LANE, 25.0));
        assert_eq!(oracle_action(&scene, &task, &env).lateral(), Lateral::Commit);
    }
}

/// Adjacent gap centered on the ego with both neighbors `margin` seconds away.
fn symmetric_gap_scene(margin: f64) -> (Scene, EnvConfig) {
    let env = EnvConfig::zero_traffic();
    let sim = Simulator::new(env, TaskSpec::neutral()).unwrap();
    let mut scene = sim.reset(0);
    let v = scene.ego.speed;
    let ego = scene.ego.clone();
    scene.others = vec![
        vehicle(ego.position + margin * v + 4.8, TARGET_LANE, v),
        vehicle(ego.rear() - margin * v, TARGET_LANE, v),
    ];
    (scene, env)
}

#[test]
fn aggressive_commits_where_conservative_holds() {
    let aggressive = TaskSpec::aggressive();
    let conservative = TaskSpec::conservative();
    let mut checked = 0;
    let mut m = aggressive.min_gap + 0.01;
    while m < conservative.min_gap {
        let (scene, env) = symmetric_gap_scene(m);
        let a = oracle_action(&scene, &aggressive, &env);
        let c = oracle_action(&scene, &conservative, &env);
        assert_eq!(a, ActionId::encode(GapChoice::Adjacent, Lateral::Commit), "margin {m}");
        assert_eq!(c.lateral(), Lateral::Hold, "margin {m}");
        checked += 1;
        m += 0.05;
    }
    assert!(checked > 20);
    // Above both thresholds, both commit.
    let (scene, env) = symmetric_gap_scene(conservative.min_gap + 0.2);
    assert_eq!(oracle_action(&scene, &conservative, &env).lateral(), Lateral::Commit);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Whenever some gap is reachable within a style's limits, the oracle
    /// never steers toward one that is not.
    #[test]
    fn unreachable_gaps_are_never_chosen(seed in 0u64..100_000, style in 0usize..3, steps in 0usize..120) {
        let task = styles()[style].clone();
        let env = EnvConfig::default();
        let sim = Simulator::new(env, task.clone()).unwrap();
        let mut scene = sim.reset(seed);
        for _ in 0..steps {
            let out = sim.step(&scene, oracle_action(&scene, &task, &env)).unwrap();
            if out.terminal {
                break;
            }
            scene = out.scene;
        }
        if !scene.is_terminal() {
            let assessed = assess_gaps(&scene, &task);
            let chosen = oracle_action(&scene, &task, &env).gap();
            let a = &assessed[chosen as usize];
            let any_reachable = assessed.iter().any(|g| g.accel_ok);
            prop_assert!(a.accel_ok || !any_reachable);
            prop_assert!(a.required_accel <= task.max_accel || !any_reachable);
        }
    }
}

#[test]
fn required_accel_matches_closed_form() {
    let (scene, _) = symmetric_gap_scene(1.0);
    let task = TaskSpec::neutral();
    let assessed = assess_gaps(&scene, &task);
    let adjacent = assessed[GapChoice::Adjacent as usize];
    // Gap centered on the ego and moving at its speed: nothing to do.
    assert!(adjacent.required_accel.abs() < 1e-12);
    // Lead-only front gap region and rear-only rear region sit 2.5 s out.
    let mut s = scene.clone();
    s.others[0].speed += 2.0;
    let g = assess_gaps(&s, &task)[GapChoice::Adjacent as usize];
    let dx = g.gap.center;
    let dv = 0.5 * (s.others[0].speed + s.others[1].speed) - s.ego.speed;
    let expected = 2.0 * (dx + dv * REACH_TIME) / (REACH_TIME * REACH_TIME);
    assert!((g.required_accel - expected).abs() < 1e-12);
}

#[test]
fn demo_generation_is_deterministic_and_success_only() {
    let env = EnvConfig::default();
    let task = TaskSpec::neutral();
    let a = generate_demos(&env, &task, 5, 1).unwrap();
    let b = generate_demos(&env, &task, 5, 1).unwrap();
    assert_eq!(a.to_bytes(), b.to_bytes());
    assert_eq!(a.content_hash(), b.content_hash());
    assert_eq!(a.len(), 5);
    for t in &a.trajectories {
        assert_eq!(t.termination, Termination::Success);
        assert_eq!(t.task, "neutral");
        assert!(!t.is_empty() && t.len() <= env.horizon as usize);
        assert!(t.is_terminal_step(t.len() - 1));
        assert!((0..t.len() - 1).all(|i| !t.is_terminal_step(i)));
    }
    let c = generate_demos(&env, &task, 5, 2).unwrap();
    assert_ne!(a.content_hash(), c.content_hash());
}

#[test]
fn zero_count_is_rejected() {
    let err = generate_demos(&EnvConfig::default(), &TaskSpec::neutral(), 0, 1).unwrap_err();
    assert!(matches!(err, ExpertError::InvalidCount(0)));
}

#[test]
fn hopeless_task_reports_low_success_rate() {
    let mut task = TaskSpec::conservative();
    task.style = Style::Custom("timid".into());
    task.min_gap = 30.0;
    let err = generate_demos(&EnvConfig::default(), &task, 3, 1).unwrap_err();
    match err {
        ExpertError::LowSuccessRate { requested, attempts, .. } => {
            assert_eq!(requested, 3);
            assert_eq!(attempts, 26);
        }
        other => panic!("unexpected {other}"),
    }
}

struct StyleStats {
    max_accel: f64,
    min_accel: f64,
    max_speed: f64,
    crashes: usize,
    successes: usize,
}

fn style_stats(task: &TaskSpec, episodes: u64, offset: u64) -> StyleStats {
    let env = EnvConfig::default();
    let sim = Simulator::new(env, task.clone()).unwrap();
    let mut s = StyleStats {
        max_accel: 0.0,
        min_accel: 0.0,
        max_speed: 0.0,
        crashes: 0,
        successes: 0,
    };
    for seed in offset..offset + episodes {
        let t = run_episode(&sim, seed, |scene, _| oracle_action(scene, task, &env)).unwrap();
        let k = t.kinematics();
        s.max_accel += k.max_accel;
        s.min_accel += k.min_accel;
        s.max_speed += k.max_speed;
        s.crashes += usize::from(t.termination == Termination::Crash);
        s.successes += usize::from(t.termination == Termination::Success);
    }
    let n = episodes as f64;
    s.max_accel /= n;
    s.min_accel /= n;
    s.max_speed /= n;
    s
}

#[test]
fn styles_are_ordered_and_oracles_never_crash() {
    let [c, n, a] = styles().map(|t| style_stats(&t, 500, 0));
    for s in [&c, &n, &a] {
        assert_eq!(s.crashes, 0);
        assert!(s.successes >= 475, "success {}", s.successes);
    }
    assert!(a.max_accel > n.max_accel && n.max_accel > c.max_accel);
    assert!(a.max_speed > n.max_speed && n.max_speed > c.max_speed);
    assert!(a.min_accel < c.min_accel);
}

#[test]
fn dataset_round_trips_bit_exactly() {
    let ds = generate_demos(&EnvConfig::default(), &TaskSpec::aggressive(), 3, 9).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("demos.bin");
    save_dataset(&ds, &path).unwrap();
    let back = load_dataset(&path).unwrap();
    assert_eq!(back, ds);
    assert_eq!(back.to_bytes(), ds.to_bytes());
    for (x, y) in back.trajectories.iter().zip(&ds.trajectories) {
        for (p, q) in x.steps.iter().zip(&y.steps) {
            assert!(p.state.iter().zip(&q.state).all(|(u, v)| u.to_bits() == v.to_bits()));
        }
    }
}

#[test]
fn truncated_and_corrupted_datasets_fail_distinctly() {
    let ds = generate_demos(&EnvConfig::default(), &TaskSpec::aggressive(), 3, 9).unwrap();
    let bytes = ds.to_bytes();
    for cut in [0, 10, bytes.len() / 2, bytes.len() - 1] {
        let err = DemoDataset::from_bytes(&bytes[..cut]).unwrap_err();
        assert!(
            matches!(err, ExpertError::Persist(PersistError::Truncated { .. })),
            "cut {cut}: {err}"
        );
    }
    let mut corrupt = bytes.clone();
    let last = corrupt.len() - 5;
    corrupt[last] ^= 0xff;
    assert!(matches!(
        DemoDataset::from_bytes(&corrupt),
        Err(ExpertError::Persist(PersistError::ChecksumMismatch))
    ));

    let mut future = ds.clone();
    future.version = DATASET_VERSION + 1;
    assert!(matches!(
        DemoDataset::from_bytes(&future.to_bytes()),
        Err(ExpertError::Persist(PersistError::VersionMismatch { .. }))
    ));
}

#[test]
fn failed_save_leaves_no_file() {
    let ds = generate_demos(&EnvConfig::default(), &TaskSpec::aggressive(), 1, 9).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, b"x").unwrap();
    // Parent path is a regular file, so the write must fail.
    assert!(save_dataset(&ds, &blocker.join("demos.bin")).is_err());
    let entries: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(entries.len(), 1);
}
