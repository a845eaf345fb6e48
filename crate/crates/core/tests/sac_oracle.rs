use cubegrasp_core::sac::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tiny_agent(seed: u64) -> Agent {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = SacConfig {
        hidden: vec![4],
        output_init_scale: 0.5,
        ..SacConfig::default()
    };
    Agent::new(2, 1, cfg, &mut rng).unwrap()
}

fn tiny_batch(rng: &mut ChaCha8Rng, n: usize) -> Vec<Experience> {
    use rand::Rng;
    (0..n)
        .map(|i| Experience {
            s: vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
            a: vec![rng.gen_range(-0.9..0.9)],
            r: rng.gen_range(0.0..1.0),
            s2: vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
            done: i % 5 == 4,
        })
        .collect()
}

fn assert_grad_matches(analytic: &[f64], params: &mut Vec<f64>, mut loss: impl FnMut(&[f64]) -> f64, what: &str) {
    let h = 1e-6;
    for i in 0..params.len() {
        let keep = params[i];
        params[i] = keep + h;
        let lp = loss(params);
        params[i] = keep - h;
        let lm = loss(params);
        params[i] = keep;
        let fd = (lp - lm) / (2.0 * h);
        let scale = analytic[i].abs().max(fd.abs());
        assert!(
            (analytic[i] - fd).abs() <= 1e-4 * scale + 1e-9,
            "{what} param {i}: analytic {} vs fd {fd}",
            analytic[i]
        );
    }
}

#[test]
fn critic_gradients_match_finite_differences() {
    let start = std::time::Instant::now();
    for seed in 0..5 {
        let agent = tiny_agent(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let batch = tiny_batch(&mut rng, 8);
        let noise = UpdateNoise::sample(8, 1, &mut rng);
        let y = agent.critic_targets(&batch, &noise.next);
        let (_, g1, g2) = agent.critic_loss_grad(&batch, &y);
        let mut p1 = agent.critics.q1.params.clone();
        assert_grad_matches(&g1, &mut p1, |p| {
            let mut a = agent.clone();
            a.critics.q1.params = p.to_vec();
            a.critic_loss_grad(&batch, &y).0
        }, "q1");
        let mut p2 = agent.critics.q2.params.clone();
        assert_grad_matches(&g2, &mut p2, |p| {
            let mut a = agent.clone();
            a.critics.q2.params = p.to_vec();
            a.critic_loss_grad(&batch, &y).0
        }, "q2");
    }
    assert!(start.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn actor_gradients_match_finite_differences() {
    for seed in 0..5 {
        let agent = tiny_agent(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let batch = tiny_batch(&mut rng, 8);
        let noise = UpdateNoise::sample(8, 1, &mut rng);
        let (_, g, _) = agent.actor_loss_grad(&batch, &noise.current);
        let mut p = agent.policy.net.params.clone();
        assert_grad_matches(&g, &mut p, |p| {
            let mut a = agent.clone();
            a.policy.net.params = p.to_vec();
            a.actor_loss_grad(&batch, &noise.current).0
        }, "policy");
    }
}

#[test]
fn degenerate_target_is_reward() {
    let mut agent = tiny_agent(3);
    agent.cfg.gamma = 0.0;
    agent.cfg.alpha = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let batch = tiny_batch(&mut rng, 16);
    let noise = UpdateNoise::sample(16, 1, &mut rng);
    let y = agent.critic_targets(&batch, &noise.next);
    for (e, y) in batch.iter().zip(y) {
        assert_eq!(y, e.r);
    }
}

#[test]
fn target_uses_target_networks_only() {
    let mut agent = tiny_agent(5);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let batch = tiny_batch(&mut rng, 16);
    let noise = UpdateNoise::sample(16, 1, &mut rng);
    let y = agent.critic_targets(&batch, &noise.next);
    for p in agent.critics.q1.params.iter_mut().chain(agent.critics.q2.params.iter_mut()) {
        *p += 0.37;
    }
    assert_eq!(agent.critic_targets(&batch, &noise.next), y);
}

#[test]
fn zero_learning_rate_changes_nothing() {
    let mut agent = tiny_agent(7);
    agent.cfg.lr = 0.0;
    let before = agent.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let batch = tiny_batch(&mut rng, 16);
    let noise = UpdateNoise::sample(16, 1, &mut rng);
    agent.update_with(&batch, &noise).unwrap();
    assert_eq!(agent.policy, before.policy);
    assert_eq!(agent.critics, before.critics);
}

#[test]
fn unit_tau_copies_main_to_target() {
    let mut agent = tiny_agent(9);
    for p in agent.critics.q1.params.iter_mut() {
        *p *= 3.1;
    }
    agent.critics.soft_update(1.0);
    assert_eq!(agent.critics.target1, agent.critics.q1);
    assert_eq!(agent.critics.target2, agent.critics.q2);
}

fn constant_policy(mean: f64, log_std: f64) -> GaussianPolicy {
    let mut net = Mlp::zeros(&[1, 2, 2], Activation::Tanh);
    let n = net.params.len();
    net.params[n - 2] = mean;
    net.params[n - 1] = log_std;
    GaussianPolicy::new(net).unwrap()
}

#[test]
fn squashed_density_integrates_to_one() {
    let p = constant_policy(0.0, 0.0);
    let n = 200_000;
    let h = 2.0 / n as f64;
    // midpoint rule on (-1, 1)
    let total: f64 = (0..n)
        .map(|i| log_prob_squashed(&p, &[0.0], &[-1.0 + (i as f64 + 0.5) * h]).exp() * h)
        .sum();
    assert!((total - 1.0).abs() < 1e-4, "{total}");
}

#[test]
fn narrow_policy_peaks_at_squashed_mean() {
    let p = constant_policy(0.5, -5.0);
    let grid: Vec<f64> = (0..20_001).map(|i| -0.999 + 1.998 * i as f64 / 20_000.0).collect();
    let best = grid
        .iter()
        .copied()
        .max_by(|a, b| log_prob_squashed(&p, &[0.0], &[*a]).total_cmp(&log_prob_squashed(&p, &[0.0], &[*b])))
        .unwrap();
    assert!((best - 0.5f64.tanh()).abs() < 2e-4, "{best}");
}

#[test]
fn log_prob_is_symmetric_for_zero_mean() {
    let p = constant_policy(0.0, -0.3);
    for a in [0.1, 0.5, 0.9, 0.999_999_9, 1.0] {
        assert_eq!(log_prob_squashed(&p, &[0.0], &[a]), log_prob_squashed(&p, &[0.0], &[-a]));
        assert!(log_prob_squashed(&p, &[0.0], &[a]).is_finite());
    }
}

#[test]
fn sampled_spread_matches_log_std() {
    let ls = -0.7;
    let p = constant_policy(0.2, ls);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 100_000;
    let u: Vec<f64> = (0..n).map(|_| sample_action(&p, &[0.0], false, &mut rng)[0].atanh()).collect();
    let mean = u.iter().sum::<f64>() / n as f64;
    let std = (u.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    assert!((std / f64::exp(ls) - 1.0).abs() < 0.02, "{std}");
}

#[test]
fn fixed_seed_reproduces_samples() {
    let p = constant_policy(0.1, -1.0);
    let draw = |s| {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        (0..5).map(|_| sample_action(&p, &[0.0], false, &mut rng)[0]).collect::<Vec<_>>()
    };
    assert_eq!(draw(3), draw(3));
    assert_ne!(draw(3), draw(4));
}

#[test]
fn wide_policy_has_more_entropy() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let entropy = |p: &GaussianPolicy, rng: &mut ChaCha8Rng| {
        let n = 10_000;
        -(0..n)
            .map(|_| {
                let a = sample_action(p, &[0.0], false, rng);
                log_prob_squashed(p, &[0.0], &a)
            })
            .sum::<f64>()
            / n as f64
    };
    let wide = entropy(&constant_policy(0.0, -0.5), &mut rng);
    let narrow = entropy(&constant_policy(0.0, -3.0), &mut rng);
    assert!(wide > narrow, "{wide} vs {narrow}");
}

#[test]
fn buffer_forgets_oldest_sentinels() {
    let mut b = ReplayBuffer::new(10);
    let mk = |r: f64| Experience { s: vec![], a: vec![], r, s2: vec![], done: false };
    for i in 0..10 {
        b.push(mk(-1.0 - i as f64));
    }
    for i in 0..25 {
        b.push(mk(i as f64));
        assert!(b.len() <= b.capacity());
    }
    assert!(b.iter().all(|e| e.r >= 15.0));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(b.sample(11, &mut rng).is_err());
    assert_eq!(b.sample(10, &mut rng).unwrap().len(), 10);
}

#[test]
fn checkpoint_round_trip_and_version_guard() {
    let agent = tiny_agent(13);
    let echo = vec![("sac.alpha".to_string(), "0.05".to_string())];
    let text = agent.to_checkpoint(&echo);
    let (back, echo_back) = Agent::from_checkpoint(&text, agent.cfg.clone()).unwrap();
    assert_eq!(back.policy, agent.policy);
    assert_eq!(back.critics, agent.critics);
    assert_eq!(echo_back, echo);
    let newer = text.replacen("cubegrasp-checkpoint 1", "cubegrasp-checkpoint 2", 1);
    assert!(matches!(Agent::from_checkpoint(&newer, agent.cfg.clone()), Err(SacError::Version { found: 2, .. })));
    let garbage = text.replacen("cubegrasp-checkpoint", "garbage", 1);
    assert!(matches!(Agent::from_checkpoint(&garbage, agent.cfg.clone()), Err(SacError::Version { .. })));
    let wrong = SacConfig { hidden: vec![8], ..agent.cfg.clone() };
    assert!(matches!(Agent::from_checkpoint(&text, wrong), Err(SacError::Shape(_))));
}

#[test]
fn learning_reduces_critic_error_on_a_bandit() {
    // one-step problem with reward -(a - 0.5)^2: the policy mean should move toward 0.5
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let cfg = SacConfig { hidden: vec![16, 16], batch_size: 64, lr: 3e-3, alpha: 0.01, ..SacConfig::default() };
    let mut agent = Agent::new(1, 1, cfg, &mut rng).unwrap();
    let mut buf = ReplayBuffer::new(10_000);
    for _ in 0..3000 {
        let a = sample_action(&agent.policy, &[0.0], false, &mut rng);
        let r = -(a[0] - 0.5).powi(2);
        buf.push(Experience { s: vec![0.0], a, r, s2: vec![0.0], done: true });
        if buf.len() >= 64 && rng.gen_bool(0.5) {
            agent.sac_update(&buf, &mut rng).unwrap();
        }
    }
    let a = sample_action(&agent.policy, &[0.0], true, &mut rng)[0];
    assert!((a - 0.5).abs() < 0.1, "{a}");
}
