mod common;

use common::{tanh_net, transitions};
use pvp_core::losses::{bc_loss, critic_term, policy_objective};
use pvp_core::{LearnerConfig, PvpLearner, Transition};
use pvp_nn::{soft_update, Activation, Mlp, NetSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const OBS: usize = 6;

fn small_cfg() -> LearnerConfig {
    LearnerConfig {
        hidden: vec![32, 32],
        batch_size: 32,
        warmup: 8,
        ..LearnerConfig::default()
    }
}

fn refs(ts: &[Transition]) -> Vec<&Transition> {
    ts.iter().collect()
}

fn mean_q(q: &Mlp, ts: &[Transition], pick: impl Fn(&Transition) -> [f64; 2]) -> f64 {
    ts.iter()
        .map(|t| {
            let mut x = t.s.to_vec();
            x.extend(pick(t));
            q.forward(&x).unwrap()[0]
        })
        .sum::<f64>()
        / ts.len() as f64
}

#[test]
fn proxy_values_settle_at_the_bound() {
    let h = transitions(1, 64, OBS, true);
    let n = transitions(2, 64, OBS, false);
    let mut learner = PvpLearner::new(OBS, LearnerConfig::default(), 3).unwrap();
    for _ in 0..2000 {
        learner.value_update(&refs(&h), &refs(&n)).unwrap();
    }
    let q = &learner.nets.q;
    let human = mean_q(q, &h, |t| t.a_h.unwrap());
    let novice = mean_q(q, &h, |t| t.a_n);
    assert!(human > 0.5, "{human}");
    assert!(novice < -0.5, "{novice}");
}

#[test]
fn without_interventions_the_value_step_is_pure_td() {
    let n = transitions(4, 16, OBS, false);
    let mut a = PvpLearner::new(OBS, small_cfg(), 5).unwrap();
    let (proxy, td) = a.value_update(&[], &refs(&n)).unwrap();
    assert_eq!(proxy, 0.0);
    assert!(td > 0.0);
}

#[test]
fn value_loss_decreases_on_a_frozen_batch() {
    let h = transitions(6, 32, OBS, true);
    let n = transitions(7, 32, OBS, false);
    let cfg = LearnerConfig {
        target_noise: 0.0,
        ..small_cfg()
    };
    let mut learner = PvpLearner::new(OBS, cfg, 8).unwrap();
    let mut prev = f64::INFINITY;
    for _ in 0..10 {
        let (p, t) = learner.value_update(&refs(&h), &refs(&n)).unwrap();
        assert!((p + t).is_finite());
        assert!(p + t <= prev, "{} > {prev}", p + t);
        prev = p + t;
    }
}

/// `Q(s, a) = −|a₀ − a*₀| − |a₁ − a*₁|`, built by hand from rectifiers.
fn concave_critic(target: [f64; 2]) -> Mlp {
    let mut q = Mlp::zeros(NetSpec::value_head(OBS + 2).with_hidden(vec![4])).unwrap();
    {
        let l = q.layer_mut(0);
        for (unit, (dim, sign)) in [(0, 1.0), (0, -1.0), (1, 1.0), (1, -1.0)].into_iter().enumerate() {
            l.weight[unit * (OBS + 2) + OBS + dim] = sign;
            l.bias[unit] = -sign * target[dim];
        }
    }
    {
        let l = q.layer_mut(1);
        l.weight.fill(-1.0);
    }
    q
}

#[test]
fn policy_ascends_a_concave_critic() {
    let target = [0.4, -0.3];
    let q = concave_critic(target);
    let states = transitions(9, 16, OBS, false);
    let mut pi = Mlp::new(
        NetSpec::action_head(OBS, 2).with_hidden(vec![32, 32]),
        0.01,
        &mut ChaCha8Rng::seed_from_u64(10),
    )
    .unwrap();
    for _ in 0..3000 {
        pi.zero_grad();
        policy_objective(&mut pi, &q, &refs(&states), &[], 0.0, true).unwrap();
        pi.optimizer_step(1e-3).unwrap();
    }
    for t in &states {
        let a = pi.forward(&t.s).unwrap();
        assert!((a[0] - target[0]).abs() < 0.05 && (a[1] - target[1]).abs() < 0.05, "{a:?}");
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

#[test]
fn heavy_bc_weight_aligns_with_cloning() {
    let h = transitions(11, 16, OBS, true);
    let n = transitions(12, 16, OBS, false);
    let union: Vec<&Transition> = h.iter().chain(&n).collect();
    let q = tanh_net(OBS + 2, vec![8], 1, Activation::Identity, 13);
    let mut pi = tanh_net(OBS, vec![8], 2, Activation::Tanh, 14);
    pi.zero_grad();
    policy_objective(&mut pi, &q, &union, &refs(&h), 1e6, true).unwrap();
    let combined = pi.grads().to_vec();
    pi.zero_grad();
    bc_loss(&mut pi, &refs(&h), 1.0, true).unwrap();
    let bc = pi.grads().to_vec();
    assert!(cosine(&combined, &bc) > 0.99);
}

#[test]
fn constant_critic_gives_no_policy_gradient() {
    let states = transitions(15, 8, OBS, false);
    let s: Vec<f64> = states.iter().flat_map(|t| t.s.iter().copied()).collect();
    let mut q = Mlp::zeros(NetSpec::value_head(OBS + 2).with_hidden(vec![8])).unwrap();
    q.layer_mut(1).bias[0] = 3.0;
    let mut pi = tanh_net(OBS, vec![8], 2, Activation::Tanh, 16);
    pi.zero_grad();
    let value = critic_term(&mut pi, &q, &s, 8, true).unwrap();
    assert_eq!(value, -3.0);
    assert!(pi.grads().iter().all(|&g| g == 0.0));
}

#[test]
fn targets_close_in_geometrically_on_a_frozen_online_net() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let spec = NetSpec::value_head(4).with_hidden(vec![8]);
    let online = Mlp::new(spec.clone(), 1.0, &mut rng).unwrap();
    let mut target = Mlp::new(spec, 1.0, &mut rng).unwrap();
    let gap = |t: &Mlp| {
        t.params()
            .iter()
            .zip(online.params())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let tau = 0.05;
    let mut prev = gap(&target);
    for _ in 0..50 {
        soft_update(&mut target, &online, tau).unwrap();
        let now = gap(&target);
        assert!((now / prev - (1.0 - tau)).abs() < 1e-9);
        prev = now;
    }
}

#[test]
fn reward_scaling_changes_no_loss() {
    let run = |scale: f64| {
        let mut learner = PvpLearner::new(OBS, small_cfg(), 18).unwrap();
        for mut t in transitions(19, 40, OBS, true).into_iter().chain(transitions(20, 40, OBS, false)) {
            t.reward *= scale;
            learner.store(t).unwrap();
        }
        let reports: Vec<_> = (0..20).map(|_| learner.update().unwrap().unwrap()).collect();
        (reports, learner.nets.q.params().to_vec(), learner.nets.policy.params().to_vec())
    };
    assert_eq!(run(1.0), run(1000.0));
}

#[test]
fn updates_wait_for_both_buffers() {
    let mut learner = PvpLearner::new(OBS, small_cfg(), 21).unwrap();
    for t in transitions(22, 50, OBS, true) {
        learner.store(t).unwrap();
    }
    assert!(learner.update().unwrap().is_none());
    for t in transitions(23, 8, OBS, false) {
        learner.store(t).unwrap();
    }
    let first = learner.update().unwrap().unwrap();
    assert!(first.loss_policy.is_none());
    let second = learner.update().unwrap().unwrap();
    assert!(second.loss_policy.is_some() && second.loss_bc.is_some());
}
