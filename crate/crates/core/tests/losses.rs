mod common;

use common::{numeric_gradient, relative_error, tanh_net, transitions};
use pvp_core::losses::{
    bc_loss, bc_loss_raw, critic_term, policy_objective, proxy_value_loss, td_loss, td_targets, TargetSmoothing,
    TdBatch,
};
use pvp_core::{CoreError, Transition};
use pvp_nn::{Activation, Mlp, NetSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const OBS: usize = 3;

fn q_net(seed: u64) -> Mlp {
    tanh_net(OBS + 2, vec![6, 5], 1, Activation::Identity, seed)
}

fn pi_net(seed: u64) -> Mlp {
    tanh_net(OBS, vec![5, 4], 2, Activation::Tanh, seed)
}

fn refs(ts: &[Transition]) -> Vec<&Transition> {
    ts.iter().collect()
}

#[test]
fn proxy_gradient_matches_finite_differences() {
    let h = transitions(1, 7, OBS, true);
    let mut q = q_net(2);
    q.zero_grad();
    proxy_value_loss(&mut q, &refs(&h), 1.0, true).unwrap();
    let analytic = q.grads().to_vec();
    let numeric = numeric_gradient(&mut q, |q| proxy_value_loss(q, &refs(&h), 1.0, false).unwrap());
    assert!(relative_error(&analytic, &numeric) < 1e-4);
}

#[test]
fn td_gradient_matches_finite_differences() {
    let ts = transitions(3, 9, OBS, false);
    let batch = TdBatch::reward_free(&refs(&ts));
    let smoothing = TargetSmoothing {
        gamma: 0.9,
        sigma: 0.2,
        clip: 0.5,
    };
    let y = td_targets(&[&q_net(4)], &pi_net(5), &batch, smoothing, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
    let mut q = q_net(7);
    q.zero_grad();
    td_loss(&mut q, &batch, &y, true).unwrap();
    let analytic = q.grads().to_vec();
    let numeric = numeric_gradient(&mut q, |q| td_loss(q, &batch, &y, false).unwrap());
    assert!(relative_error(&analytic, &numeric) < 1e-4);
}

#[test]
fn bc_gradient_matches_finite_differences() {
    let h = transitions(8, 6, OBS, true);
    let mut pi = pi_net(9);
    pi.zero_grad();
    bc_loss(&mut pi, &refs(&h), 1.0, true).unwrap();
    let analytic = pi.grads().to_vec();
    let numeric = numeric_gradient(&mut pi, |p| bc_loss(p, &refs(&h), 1.0, false).unwrap());
    assert!(relative_error(&analytic, &numeric) < 1e-4);
}

#[test]
fn policy_objective_gradient_matches_finite_differences() {
    let h = transitions(10, 5, OBS, true);
    let n = transitions(11, 5, OBS, false);
    let union: Vec<&Transition> = h.iter().chain(&n).collect();
    let q = q_net(12);
    let mut pi = pi_net(13);
    let lambda = 0.7;
    pi.zero_grad();
    policy_objective(&mut pi, &q, &union, &refs(&h), lambda, true).unwrap();
    let analytic = pi.grads().to_vec();
    let numeric = numeric_gradient(&mut pi, |p| {
        let (c, b) = policy_objective(p, &q, &union, &refs(&h), lambda, false).unwrap();
        c + lambda * b
    });
    assert!(relative_error(&analytic, &numeric) < 1e-4);
}

#[test]
fn critic_term_leaves_the_critic_untouched() {
    let ts = transitions(14, 4, OBS, false);
    let s: Vec<f64> = ts.iter().flat_map(|t| t.s.iter().copied()).collect();
    let q = q_net(15);
    let before = q.params().to_vec();
    let mut pi = pi_net(16);
    critic_term(&mut pi, &q, &s, 4, true).unwrap();
    assert_eq!(q.params(), &before[..]);
    assert!(q.grads().iter().all(|&g| g == 0.0));
}

#[test]
fn proxy_loss_of_a_zero_critic_is_two() {
    let h = transitions(17, 10, OBS, true);
    let mut q = Mlp::zeros(NetSpec::value_head(OBS + 2).with_hidden(vec![4])).unwrap();
    let loss = proxy_value_loss(&mut q, &refs(&h), 1.0, false).unwrap();
    assert!((loss - 2.0).abs() < 1e-12);
}

#[test]
fn proxy_loss_rejects_autonomous_transitions() {
    let mut mixed = transitions(18, 3, OBS, true);
    mixed.extend(transitions(19, 1, OBS, false));
    let mut q = q_net(20);
    let err = proxy_value_loss(&mut q, &refs(&mixed), 1.0, false).unwrap_err();
    assert!(matches!(err, CoreError::Contract(_)));
}

#[test]
fn empty_batches_contribute_nothing() {
    let mut q = q_net(21);
    let mut pi = pi_net(22);
    assert_eq!(proxy_value_loss(&mut q, &[], 1.0, true).unwrap(), 0.0);
    assert_eq!(bc_loss(&mut pi, &[], 1.0, true).unwrap(), 0.0);
    assert!(q.grads().iter().chain(pi.grads()).all(|&g| g == 0.0));
}

#[test]
fn bc_loss_of_a_fixed_offset() {
    let mut pi = Mlp::zeros(NetSpec::action_head(OBS, 2).with_hidden(vec![4])).unwrap();
    let s = vec![0.3, -0.2, 0.5, 0.1, 0.0, 0.9];
    // A zero network outputs (0, 0); targets sit 0.1 away along steer.
    let targets = vec![-0.1, 0.0, -0.1, 0.0];
    let loss = bc_loss_raw(&mut pi, &s, &targets, 2, 1.0, false).unwrap();
    assert!((loss - 0.005).abs() < 1e-12);
    let exact = bc_loss_raw(&mut pi, &s, &[0.0; 4], 2, 1.0, false).unwrap();
    assert_eq!(exact, 0.0);
}

#[test]
fn zero_discount_or_terminal_targets_reduce_to_squared_values() {
    let ts = transitions(23, 8, OBS, false);
    let mut q = q_net(24);
    let batch = TdBatch::reward_free(&refs(&ts));
    let zero_gamma = TargetSmoothing {
        gamma: 0.0,
        sigma: 0.2,
        clip: 0.5,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let y = td_targets(&[&q_net(25)], &pi_net(26), &batch, zero_gamma, &mut rng).unwrap();
    assert!(y.iter().all(|&v| v == 0.0));
    let rows = pvp_core::losses::state_action_rows(&batch.s, &batch.a, batch.n);
    let values = q.forward_batch(&rows, batch.n).unwrap().output().to_vec();
    let mean_sq = values.iter().map(|v| v * v).sum::<f64>() / batch.n as f64;
    assert!((td_loss(&mut q, &batch, &y, false).unwrap() - mean_sq).abs() < 1e-12);

    let mut terminal = batch.clone();
    terminal.not_done = vec![0.0; terminal.n];
    let smoothing = TargetSmoothing { gamma: 0.99, ..zero_gamma };
    let y = td_targets(&[&q_net(25)], &pi_net(26), &terminal, smoothing, &mut rng).unwrap();
    assert!(y.iter().all(|&v| v == 0.0));
}

#[test]
fn zeroed_reward_channel_reduces_to_reward_free_targets() {
    let ts = transitions(27, 8, OBS, false);
    let free = TdBatch::reward_free(&refs(&ts));
    let zeroed = free.clone().with_rewards(vec![0.0; free.n]);
    let smoothing = TargetSmoothing {
        gamma: 0.99,
        sigma: 0.2,
        clip: 0.5,
    };
    let (qt, pt) = (q_net(28), pi_net(29));
    let a = td_targets(&[&qt], &pt, &free, smoothing, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let b = td_targets(&[&qt], &pt, &zeroed, smoothing, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert_eq!(a, b);
    let mut q = q_net(30);
    assert_eq!(
        td_loss(&mut q, &free, &a, false).unwrap(),
        td_loss(&mut q, &zeroed, &b, false).unwrap()
    );
}

#[test]
fn twin_targets_take_the_smaller_critic() {
    let ts = transitions(31, 8, OBS, false);
    let batch = TdBatch::reward_free(&refs(&ts));
    let smoothing = TargetSmoothing {
        gamma: 0.9,
        sigma: 0.0,
        clip: 0.5,
    };
    let (q1, q2, pt) = (q_net(32), q_net(33), pi_net(34));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let y1 = td_targets(&[&q1], &pt, &batch, smoothing, &mut rng).unwrap();
    let y2 = td_targets(&[&q2], &pt, &batch, smoothing, &mut rng).unwrap();
    let y = td_targets(&[&q1, &q2], &pt, &batch, smoothing, &mut rng).unwrap();
    for i in 0..batch.n {
        assert_eq!(y[i], y1[i].min(y2[i]));
    }
}
