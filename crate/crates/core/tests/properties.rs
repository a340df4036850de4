use deadlock_lab::agents::{best_candidates, td_targets, Agent, AgentConfig, NoiseProcess, NoiseSpec};
use deadlock_lab::env::{self, EnvKind, Episode, EnvSpec};
use deadlock_lab::harness::RunConfig;
use deadlock_lab::net::{
    gradient_check, polyak_update, Activation, MlpParams, OutputTransform, SeedStreams, Stream,
};
use deadlock_lab::oracle::{compute_qpi, GridSpec};
use proptest::prelude::*;
use rand::{Rng as _, SeedableRng};

fn activation() -> impl Strategy<Value = Activation> {
    prop_oneof![Just(Activation::Relu), Just(Activation::Tanh)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn backprop_matches_finite_differences(
        seed in any::<u64>(),
        hidden in prop::collection::vec(1usize..12, 1..3),
        act in activation(),
        critic in any::<bool>(),
        x in -1.0f64..1.0,
        y in -1.0f64..1.0,
    ) {
        let mut rng = SeedStreams::new(seed).stream(Stream::Init);
        let mut sizes = vec![if critic { 2 } else { 1 }];
        sizes.extend(&hidden);
        sizes.push(1);
        let out = if critic { OutputTransform::Identity } else { OutputTransform::ScaledTanh { limit: 0.1 } };
        let mut net = MlpParams::init_xavier(&sizes, act, out, &mut rng).unwrap();
        // Nonzero biases keep pre-activations off the relu kink.
        let biases: Vec<usize> = net.layers().flat_map(|l| l.bias..l.bias + l.fan_out).collect();
        for k in biases {
            net.values_mut()[k] = rng.random_range(-0.5..=0.5);
        }
        let input = if critic { vec![x, y] } else { vec![x] };
        let r = gradient_check(&net, &input, &[1.0]).unwrap();
        prop_assert!(r.max_relative_error <= 1e-4, "{:?}", r);
    }

    #[test]
    fn polyak_is_elementwise_convex_combination(
        a in prop::collection::vec(-5.0f64..5.0, 9),
        b in prop::collection::vec(-5.0f64..5.0, 9),
        rho in 0.0f64..=1.0,
    ) {
        let make = |v: &[f64]| MlpParams::from_values(&[2, 2, 1], Activation::Relu, OutputTransform::Identity, v.to_vec()).unwrap();
        let mut target = make(&a);
        polyak_update(&mut target, &make(&b), rho).unwrap();
        for ((t, x), y) in target.values().iter().zip(&a).zip(&b) {
            prop_assert!((t - (rho * x + (1.0 - rho) * y)).abs() <= 1e-12);
            prop_assert!(*t >= x.min(*y) - 1e-12 && *t <= x.max(*y) + 1e-12);
        }
    }

    #[test]
    fn terminal_rows_ignore_target_critic(
        rows in prop::collection::vec((any::<bool>(), 0.0f64..1.0), 1..20),
        q1 in prop::collection::vec(-1e6f64..1e6, 20),
        q2 in prop::collection::vec(-1e6f64..1e6, 20),
    ) {
        let r: Vec<f64> = rows.iter().map(|(t, _)| if *t { 1.0 } else { 0.0 }).collect();
        let t: Vec<bool> = rows.iter().map(|(t, _)| *t).collect();
        let n = rows.len();
        let y1 = td_targets(&r, &t, 0.99, &q1[..n]);
        let y2 = td_targets(&r, &t, 0.99, &q2[..n]);
        for i in 0..n {
            if t[i] {
                prop_assert_eq!(y1[i], 1.0);
                prop_assert_eq!(y1[i], y2[i]);
            }
        }
    }

    #[test]
    fn argmax_over_full_grid_is_exhaustive_max(
        q in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 9), 1..6),
    ) {
        let grid: Vec<f64> = (0..9).map(|j| -0.1 + 0.025 * j as f64).collect();
        let flat: Vec<f64> = q.iter().flatten().copied().collect();
        let got = best_candidates(&flat, &grid);
        for (row, c) in q.iter().zip(got) {
            let best = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let first = row.iter().position(|&v| v == best).unwrap();
            prop_assert_eq!(c, grid[first]);
        }
    }

    #[test]
    fn config_round_trips(
        seed in any::<u64>(),
        hidden in prop::collection::vec(1usize..128, 0..4),
        sub in prop::option::of(0u64..100_000),
        gamma in 0.0f64..0.999,
        p in 0.0f64..=1.0,
    ) {
        let cfg = RunConfig {
            seed,
            hidden_sizes: hidden,
            substitute_optimal_at: sub,
            gamma,
            noise_p: p,
            ..RunConfig::default()
        };
        prop_assert_eq!(RunConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }
}

#[test]
fn dpg_direction_agrees_with_finite_differences() {
    let h = 1e-5;
    let mut checked = 0;
    for seed in 0..20 {
        let mut rng = SeedStreams::new(seed).stream(Stream::Init);
        let cfg = AgentConfig {
            hidden_sizes: vec![16, 16],
            ..AgentConfig::default()
        };
        let agent = Agent::new(cfg, &mut rng).unwrap();
        let states: Vec<f64> = (0..50).map(|_| rng.random_range(0.0..=1.0)).collect();
        let pi = agent.policy_batch(&states).unwrap();
        let grads = agent.action_gradients(&states, &pi).unwrap();
        for ((&s, &a), &g) in states.iter().zip(&pi).zip(&grads) {
            let fd = (agent.q_value(s, a + h).unwrap() - agent.q_value(s, a - h).unwrap()) / (2.0 * h);
            if fd.abs() > 1e-6 {
                assert_eq!(g.signum(), fd.signum(), "seed {seed} s {s}: analytic {g} vs fd {fd}");
                checked += 1;
            }
        }
    }
    assert!(checked > 500);
}

#[test]
fn probabilistic_first_steps_find_reward_at_half_rate() {
    let p = 0.1;
    let mut noise = NoiseProcess::new(NoiseSpec::Probabilistic { p });
    let mut rng = SeedStreams::new(11).stream(Stream::Noise);
    let n = 10_000;
    let (mut replaced, mut negative, mut rewarded) = (0, 0, 0);
    for _ in 0..n {
        noise.reset();
        let mut ep = Episode::new(EnvSpec::default());
        // Fixed actor pushing right.
        let out = noise.apply(0.1, &mut rng);
        if out.replaced {
            replaced += 1;
            negative += (out.action < 0.0) as usize;
        }
        rewarded += ep.step(out.action).unwrap().transition.rewarded() as usize;
    }
    let neg_frac = negative as f64 / replaced as f64;
    assert!((neg_frac - 0.5).abs() <= 0.02, "{neg_frac}");
    let rate = rewarded as f64 / n as f64;
    assert!((rate - p / 2.0).abs() <= 0.01, "{rate}");
}

#[test]
fn oracle_matches_environment_rollouts() {
    let gamma: f64 = 0.99;
    let grid = GridSpec::DEFAULT;
    let policies: [(&str, fn(f64) -> f64); 3] = [
        ("left", |_| -0.1),
        ("split", |s| if s < 0.5 { -0.1 } else { 0.05 }),
        ("slow", |_| -0.035),
    ];
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    for (name, policy) in policies {
        let table = compute_qpi(&policy, grid, gamma).unwrap();
        let mut boundary = 0;
        for _ in 0..100 {
            let i = rng.random_range(0..grid.n_states);
            let j = rng.random_range(0..grid.n_actions);
            let (s, a) = (grid.state(i), grid.action(j));
            // Independent float rollout through the environment.
            let mut value = 0.0;
            let mut on_boundary = false;
            let (mut state, mut action) = (s, a);
            for n in 0..=table.horizon {
                // Float sums within rounding of zero may disagree with exact arithmetic.
                on_boundary |= (state + action).abs() < 1e-12;
                let t = env::step(EnvKind::OneDToy, state, action).unwrap();
                if t.terminal {
                    value = gamma.powi(n as i32);
                    break;
                }
                if t.s_next == state && n > 0 {
                    break;
                }
                state = t.s_next;
                action = policy(state);
            }
            if on_boundary {
                boundary += 1;
                continue;
            }
            assert_eq!(table.get(i, j), value, "{name} at s={s}, a={a}");
        }
        assert!(boundary < 100, "{name}: every sample hit s + a = 0");
    }
}
