use metairl::airl::*;
use metairl::expert::{generate_demos, TaskSpec, Trajectory, TrajectoryStep};
use metairl::numerics::{mean_kl, AdamConfig, AdamState, Activation, DenseNet, TrustRegionConfig};
use metairl::sim::{ActionId, EnvConfig, Simulator, Termination, NUM_ACTIONS, STATE_DIM};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LN2: f64 = std::f64::consts::LN_2;

fn action(i: usize) -> ActionId {
    ActionId::new(i).unwrap()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Discriminator whose `f` is affine in the input: `w . x + b`.
fn linear_disc(weights: &[f64], bias: f64) -> Discriminator {
    let mut params = weights.to_vec();
    params.push(bias);
    Discriminator {
        net: DenseNet::from_parts(vec![DISC_INPUT_DIM, 1], vec![Activation::Identity], params)
            .unwrap(),
    }
}

fn zero_disc() -> Discriminator {
    linear_disc(&[0.0; DISC_INPUT_DIM], 0.0)
}

fn random_state(r: &mut impl Rng) -> [f64; STATE_DIM] {
    let mut s = [0.0; STATE_DIM];
    for v in &mut s {
        *v = r.gen_range(-1.0..1.0);
    }
    s
}

#[test]
fn reward_identity_holds_for_random_pairs() {
    let mut r = rng(1);
    for _ in 0..10_000 {
        let f: f64 = r.gen_range(-30.0..30.0);
        let pi: f64 = r.gen_range(1e-6..=1.0);
        let lp = pi.ln();
        assert!((reward_from_logit(f, lp) - (f - lp)).abs() <= 1e-9);
        assert!((disc_prob_from_logit(lp, lp) - 0.5).abs() <= 1e-12);
    }
}

#[test]
fn network_level_probability_and_reward_agree_with_closed_form() {
    let mut r = rng(2);
    let params = ModelParams::init(&[16, 16], 5).unwrap();
    for _ in 0..50 {
        let s = random_state(&mut r);
        let a = action(r.gen_range(0..NUM_ACTIONS));
        let f = params.discriminator.logit(&s, a).unwrap();
        let pi = params.policy.probs(&s).unwrap()[a.index()];
        let d = disc_prob(&params.discriminator, &params.policy, &s, a).unwrap();
        assert!((d - f.exp() / (f.exp() + pi)).abs() < 1e-12);
        let rw = reward(&params.discriminator, &params.policy, &s, a).unwrap();
        assert!((rw - (d.ln() - (1.0 - d).ln())).abs() < 1e-9);
        assert!((rw - (f - pi.ln())).abs() < 1e-9);
    }
}

#[test]
fn disc_probability_examples() {
    assert_eq!(disc_prob_from_logit(0.0, 0.0), 0.5);
    let d = disc_prob_from_logit(5.0, 0.1f64.ln());
    assert!((d - 0.999_326).abs() < 1e-6);
    assert!((reward_from_logit(2.0, 0.25f64.ln()) - 3.3863).abs() < 1e-4);
}

#[test]
fn disc_loss_examples() {
    let s = [0.0; STATE_DIM];
    let disc = zero_disc();
    let pair = |lp: f64, a: usize| DiscPair {
        state: &s,
        action: action(a),
        log_pi: lp,
    };
    // f = 0 and pi = 1 give D = 0.5 everywhere.
    let loss = disc_loss(&disc, &[pair(0.0, 0); 4], &[pair(0.0, 3); 7]).unwrap();
    assert!((loss - 2.0 * LN2).abs() < 1e-12);

    // D = sigmoid(-log pi): pick log pi so that D is 0.8 on the expert pair and 0.3 on the generated one.
    let logit = |p: f64| (p / (1.0 - p)).ln();
    let loss = disc_loss(&disc, &[pair(-logit(0.8), 0)], &[pair(-logit(0.3), 1)]).unwrap();
    assert!((loss - (-(0.8f64.ln()) - 0.7f64.ln())).abs() < 1e-12);
    assert!((loss - 0.5798).abs() < 1e-4);

    // Perfect separation through the action one-hot.
    let mut w = [0.0; DISC_INPUT_DIM];
    w[STATE_DIM] = 40.0;
    w[STATE_DIM + 1] = -40.0;
    let sharp = linear_disc(&w, 0.0);
    let loss = disc_loss(&sharp, &[pair(0.5f64.ln(), 0)], &[pair(0.5f64.ln(), 1)]).unwrap();
    assert!(loss < 1e-15);

    assert!(disc_loss(&disc, &[], &[pair(0.0, 0)]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// Raising D on an expert pair or lowering it on a generated pair lowers the loss.
    #[test]
    fn label_convention(lp_e in -5.0f64..-0.01, lp_g in -5.0f64..-0.01, shift in 0.01f64..2.0, bias in -2.0f64..2.0) {
        let s = [0.0; STATE_DIM];
        let disc = linear_disc(&[0.0; DISC_INPUT_DIM], bias);
        let p = |lp: f64| DiscPair { state: &s, action: action(0), log_pi: lp };
        let base = disc_loss(&disc, &[p(lp_e)], &[p(lp_g)]).unwrap();
        let expert_up = disc_loss(&disc, &[p(lp_e - shift)], &[p(lp_g)]).unwrap();
        let generated_down = disc_loss(&disc, &[p(lp_e)], &[p(lp_g + shift)]).unwrap();
        prop_assert!(expert_up < base);
        prop_assert!(generated_down < base);
    }

    #[test]
    fn policy_probabilities_are_a_distribution(seed in 0u64..1000, scale in 0.0f64..20.0) {
        let mut r = rng(seed);
        let params = ModelParams::init(&[8, 8], seed).unwrap();
        let s = random_state(&mut r).map(|v| v * scale);
        let p = params.policy.probs(&s).unwrap();
        prop_assert!(p.iter().all(|&x| x > 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }
}

#[test]
fn disc_loss_gradient_matches_finite_differences() {
    let mut r = rng(3);
    for trial in 0..10 {
        let mut disc = Discriminator::random(&[6, 5], &mut r).unwrap();
        let states: Vec<[f64; STATE_DIM]> = (0..6).map(|_| random_state(&mut r)).collect();
        let pairs: Vec<DiscPair<'_>> = states
            .iter()
            .map(|s| DiscPair {
                state: s,
                action: action(r.gen_range(0..NUM_ACTIONS)),
                log_pi: r.gen_range(-3.0..-0.01),
            })
            .collect();
        let (expert, generated) = pairs.split_at(trial % 4 + 1);
        let (_, grad) = disc_loss_and_grad(&disc, expert, generated).unwrap();
        let theta = disc.net.params().to_vec();
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for k in 0..theta.len() {
            let mut p = theta.clone();
            p[k] += h;
            disc.net.set_params(&p).unwrap();
            let up = disc_loss(&disc, expert, generated).unwrap();
            p[k] -= 2.0 * h;
            disc.net.set_params(&p).unwrap();
            let down = disc_loss(&disc, expert, generated).unwrap();
            let fd = (up - down) / (2.0 * h);
            let rel = (fd - grad[k]).abs() / fd.abs().max(grad[k].abs()).max(1e-6);
            worst = worst.max(rel);
        }
        disc.net.set_params(&theta).unwrap();
        assert!(worst <= 1e-4, "trial {trial}: relative error {worst}");
    }
}

#[test]
fn discriminator_update_rejects_zero_steps() {
    let s = [0.0; STATE_DIM];
    let mut params = ModelParams::init(&[4], 1).unwrap();
    let mut adam = AdamState::new(params.discriminator.net.num_params(), AdamConfig::default());
    let gen = [DiscPair {
        state: &s,
        action: action(0),
        log_pi: -1.0,
    }];
    let err = update_discriminator(
        &mut params.discriminator,
        &mut adam,
        &params.policy,
        &[(&s[..], action(0))],
        &gen,
        0,
        8,
        &mut rng(0),
    )
    .unwrap_err();
    assert!(matches!(err, AirlError::InvalidConfig(_)));
}

fn full_loss(
    disc: &Discriminator,
    policy: &Policy,
    expert: &[ExpertPair<'_>],
    generated: &[DiscPair<'_>],
) -> f64 {
    let e: Vec<DiscPair<'_>> = expert
        .iter()
        .map(|&(state, a)| DiscPair {
            state,
            action: a,
            log_pi: policy.log_prob(state, a).unwrap(),
        })
        .collect();
    disc_loss(disc, &e, generated).unwrap()
}

#[test]
fn discriminator_learns_separable_batches() {
    let mut r = rng(4);
    let mut params = ModelParams::init(&[16], 2).unwrap();
    let expert_states: Vec<_> = (0..64)
        .map(|_| {
            let mut s = random_state(&mut r);
            s[0] = 1.0;
            s
        })
        .collect();
    let gen_states: Vec<_> = (0..64)
        .map(|_| {
            let mut s = random_state(&mut r);
            s[0] = -1.0;
            s
        })
        .collect();
    let expert: Vec<ExpertPair<'_>> = expert_states.iter().map(|s| (&s[..], action(1))).collect();
    let generated: Vec<DiscPair<'_>> = gen_states
        .iter()
        .map(|s| DiscPair {
            state: s,
            action: action(1),
            log_pi: params.policy.log_prob(s, action(1)).unwrap(),
        })
        .collect();
    let mut adam = AdamState::new(
        params.discriminator.net.num_params(),
        AdamConfig {
            step_size: 1e-2,
            ..Default::default()
        },
    );
    let report = update_discriminator(
        &mut params.discriminator,
        &mut adam,
        &params.policy,
        &expert,
        &generated,
        200,
        32,
        &mut r,
    )
    .unwrap();
    assert_eq!(report.steps, 200);
    assert_eq!(adam.steps(), 200);
    let loss = full_loss(&params.discriminator, &params.policy, &expert, &generated);
    assert!(loss < 0.1, "loss {loss}");
}

#[test]
fn identical_batches_settle_at_chance() {
    let mut r = rng(5);
    let mut params = ModelParams::init(&[16], 3).unwrap();
    let states: Vec<_> = (0..64).map(|_| random_state(&mut r)).collect();
    let expert: Vec<ExpertPair<'_>> = states
        .iter()
        .enumerate()
        .map(|(i, s)| (&s[..], action(i % NUM_ACTIONS)))
        .collect();
    let generated: Vec<DiscPair<'_>> = expert
        .iter()
        .map(|&(state, a)| DiscPair {
            state,
            action: a,
            log_pi: params.policy.log_prob(state, a).unwrap(),
        })
        .collect();
    let mut adam = AdamState::new(params.discriminator.net.num_params(), AdamConfig::default());
    update_discriminator(
        &mut params.discriminator,
        &mut adam,
        &params.policy,
        &expert,
        &generated,
        2000,
        128,
        &mut r,
    )
    .unwrap();
    let loss = full_loss(&params.discriminator, &params.policy, &expert, &generated);
    assert!((loss - 2.0 * LN2).abs() <= 0.05, "loss {loss}");
}

/// Single-state bandit batch drawn from `policy`, with the given per-action rewards.
fn bandit_batch(policy: &Policy, rewards: impl Fn(usize, f64) -> f64, n: usize, r: &mut ChaCha8Rng) -> RolloutBatch {
    let state = [0.3; STATE_DIM];
    let episodes = (0..n)
        .map(|i| {
            let (a, lp) = policy.sample(&state, r).unwrap();
            Episode {
                trajectory: Trajectory {
                    task: "bandit".into(),
                    seed: i as u64,
                    steps: vec![TrajectoryStep {
                        state,
                        action: a,
                        speed: 0.0,
                        accel: 0.0,
                    }],
                    termination: Termination::Success,
                    decision_steps: 0,
                },
                log_probs: vec![lp],
                rewards: vec![rewards(a.index(), lp)],
            }
        })
        .collect();
    let mut batch = RolloutBatch {
        episodes,
        advantages: Vec::new(),
    };
    batch.compute_advantages(0.99);
    batch
}

#[test]
fn zero_advantage_batch_leaves_policy_unchanged() {
    let mut params = ModelParams::init(&[8], 1).unwrap();
    let before = params.policy.clone();
    let batch = bandit_batch(&params.policy, |_, _| 1.0, 50, &mut rng(0));
    assert!(batch.advantages.iter().all(|&a| a == 0.0));
    update_policy(&mut params.policy, &batch, 1, &TrustRegionConfig::default()).unwrap();
    assert_eq!(params.policy, before);
}

#[test]
fn rewarded_action_gains_probability_within_the_trust_region() {
    let mut params = ModelParams::init(&[8], 2).unwrap();
    let config = TrustRegionConfig::default();
    let state = [0.3; STATE_DIM];
    let mut r = rng(6);
    let mut accepted = 0;
    for _ in 0..15 {
        let before = params.policy.clone();
        let p_before = before.probs(&state).unwrap()[2];
        let batch = bandit_batch(&before, |a, _| if a == 2 { 1.0 } else { 0.0 }, 200, &mut r);
        let reports = update_policy(&mut params.policy, &batch, 1, &config).unwrap();
        if reports[0].accepted() {
            accepted += 1;
            let p_after = params.policy.probs(&state).unwrap()[2];
            assert!(p_after > p_before);
            let kl = mean_kl(&before.net, &params.policy.net, &[&state[..]]).unwrap();
            assert!(kl <= 1.5 * config.max_kl, "kl {kl}");
        }
    }
    assert!(accepted >= 10);
}

#[test]
fn entropy_term_alone_drives_policy_toward_uniform() {
    let mut params = ModelParams::init(&[8], 3).unwrap();
    // Skew the initial policy hard toward action 0 through the output bias.
    let mut p = params.policy.net.params().to_vec();
    let n = p.len();
    p[n - NUM_ACTIONS] = 3.0;
    params.policy.net.set_params(&p).unwrap();
    let state = [0.3; STATE_DIM];
    assert!(params.policy.probs(&state).unwrap()[0] > 0.75);

    let disc = zero_disc();
    let mut r = rng(7);
    for _ in 0..80 {
        let batch = bandit_batch(
            &params.policy,
            |a, lp| reward_from_logit(disc.logit(&state, action(a)).unwrap(), lp),
            400,
            &mut r,
        );
        update_policy(&mut params.policy, &batch, 1, &TrustRegionConfig::default()).unwrap();
    }
    let max = params.policy.probs(&state).unwrap().into_iter().fold(0.0, f64::max);
    assert!(max <= 0.2 + 1.0 / 6.0, "max probability {max}");
}

#[test]
fn advantages_match_explicit_discounted_sums() {
    let params = ModelParams::init(&[8], 4).unwrap();
    let sim = Simulator::new(EnvConfig::default(), TaskSpec::neutral()).unwrap();
    let mut batch = RolloutBatch::collect(&params.policy, &sim, 3, 11, ActionMode::Sample).unwrap();
    let mut r = rng(8);
    for ep in &mut batch.episodes {
        ep.rewards = (0..ep.trajectory.len()).map(|_| r.gen_range(-2.0..2.0)).collect();
    }
    let gamma = 0.9;
    batch.compute_advantages(gamma);
    let mut returns = Vec::new();
    for ep in &batch.episodes {
        for t in 0..ep.rewards.len() {
            let g: f64 = (t..ep.rewards.len())
                .map(|k| gamma.powi((k - t) as i32) * ep.rewards[k])
                .sum();
            returns.push(g);
        }
    }
    let mean = returns.iter().sum::<f64>() / returns.len() as f64;
    for (a, g) in batch.advantages.iter().zip(&returns) {
        assert!((a - (g - mean)).abs() < 1e-9);
    }
}

#[test]
fn rollouts_store_behavior_probabilities_and_finite_rewards() {
    let params = ModelParams::init(&[16, 16], 5).unwrap();
    let sim = Simulator::new(EnvConfig::default(), TaskSpec::conservative()).unwrap();
    let mut batch = RolloutBatch::collect(&params.policy, &sim, 4, 3, ActionMode::Sample).unwrap();
    batch.assign_rewards(&params.discriminator).unwrap();
    for ep in &batch.episodes {
        assert_eq!(ep.log_probs.len(), ep.trajectory.len());
        for (s, &lp) in ep.trajectory.steps.iter().zip(&ep.log_probs) {
            assert!(lp.exp() > 0.0 && lp.exp() <= 1.0);
            assert_eq!(lp, params.policy.log_prob(&s.state, s.action).unwrap());
        }
        assert!(ep.rewards.iter().all(|r| r.is_finite()));
    }
    let again = RolloutBatch::collect(&params.policy, &sim, 4, 3, ActionMode::Sample).unwrap();
    assert_eq!(again.trajectories(), batch.trajectories());
}

fn small_config() -> AirlConfig {
    AirlConfig {
        disc_hidden: vec![16],
        policy_hidden: vec![16],
        disc_steps: 7,
        policy_steps: 3,
        rollout_episodes: 4,
        minibatch: 32,
        metrics_pairs: 64,
        ..Default::default()
    }
}

#[test]
fn inner_train_counts_updates_and_is_deterministic() {
    let env = EnvConfig::default();
    let task = TaskSpec::neutral();
    let demos = generate_demos(&env, &task, 5, 1).unwrap();
    let sim = Simulator::new(env, task).unwrap();
    let config = small_config();
    let init = config.init_params(9).unwrap();

    let unchanged = inner_train(&sim, &init, &demos, 0, &config, 1).unwrap();
    assert_eq!(unchanged.params, init);
    assert!(unchanged.stats.is_empty());

    let a = inner_train(&sim, &init, &demos, 3, &config, 1).unwrap();
    let b = inner_train(&sim, &init, &demos, 3, &config, 1).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.stats, b.stats);
    assert_ne!(a.params, init);
    assert_eq!(a.stats.len(), 3);
    for (i, s) in a.stats.iter().enumerate() {
        assert_eq!(s.disc_steps, 7);
        assert_eq!(s.policy_steps, 3);
        assert_eq!(s.metrics.iteration, i);
        assert_eq!(s.metrics.episodes, 4);
        let m = &s.metrics;
        for p in [m.expert_disc_prob.unwrap(), m.generated_disc_prob.unwrap()] {
            assert!((0.0..=1.0).contains(&p));
        }
        assert_eq!(m.success_ratio + m.crash_ratio + m.timeout_ratio, 1.0);
        assert!(m.rollout_steps >= m.decision_steps);
        assert!(s.policy_kl <= 1.5 * config.trust_region.max_kl);
    }
    let c = inner_train(&sim, &init, &demos, 3, &config, 2).unwrap();
    assert_ne!(a.params, c.params);
}

#[test]
fn invalid_configs_are_rejected() {
    let env = EnvConfig::default();
    let demos = generate_demos(&env, &TaskSpec::neutral(), 1, 1).unwrap();
    let sim = Simulator::new(env, TaskSpec::neutral()).unwrap();
    let init = ModelParams::init(&[4], 1).unwrap();
    for bad in [
        AirlConfig { disc_steps: 0, ..small_config() },
        AirlConfig { policy_steps: 0, ..small_config() },
        AirlConfig { rollout_episodes: 0, ..small_config() },
        AirlConfig { gamma: 1.5, ..small_config() },
    ] {
        assert!(matches!(
            inner_train(&sim, &init, &demos, 1, &bad, 0),
            Err(AirlError::InvalidConfig(_))
        ));
    }
    let empty = demos.truncated(0);
    assert!(matches!(
        inner_train(&sim, &init, &empty, 1, &small_config(), 0),
        Err(AirlError::EmptyExpertData)
    ));
}
