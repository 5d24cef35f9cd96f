//! Tabular three-state chain `s0 → s1 → s2 → end`, with the critic reduced to
//! a lookup table by one-hot inputs and a fixed zero action.

use pvp_core::losses::{td_loss, td_targets, TargetSmoothing, TdBatch};
use pvp_nn::{Mlp, NetSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GAMMA: f64 = 0.9;

fn onehot(i: usize) -> Vec<f64> {
    let mut v = vec![0.0; 3];
    if i < 3 {
        v[i] = 1.0;
    }
    v
}

fn chain(reward: Option<f64>) -> TdBatch {
    let s: Vec<f64> = (0..3).flat_map(onehot).collect();
    let s_next: Vec<f64> = (1..4).flat_map(onehot).collect();
    TdBatch {
        n: 3,
        s,
        a: vec![0.0; 6],
        s_next,
        not_done: vec![1.0, 1.0, 0.0],
        reward: reward.map(|r| vec![r; 3]),
    }
}

fn table(q: &Mlp) -> Vec<f64> {
    (0..3)
        .map(|i| {
            let mut x = onehot(i);
            x.extend([0.0, 0.0]);
            q.forward(&x).unwrap()[0]
        })
        .collect()
}

/// Fitted value iteration: freeze the target, descend the TD loss, repeat.
fn fit(batch: &TdBatch, sweeps: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let spec = NetSpec::value_head(5).with_hidden(vec![]);
    let mut q = Mlp::new(spec.clone(), 1.0, &mut rng).unwrap();
    // Start away from any fixed point.
    for p in q.params_mut() {
        *p += 0.5;
    }
    let policy = Mlp::zeros(NetSpec::action_head(3, 2).with_hidden(vec![])).unwrap();
    let smoothing = TargetSmoothing {
        gamma: GAMMA,
        sigma: 0.0,
        clip: 0.5,
    };
    for _ in 0..sweeps {
        let target = q.clone();
        let y = td_targets(&[&target], &policy, batch, smoothing, &mut rng).unwrap();
        for _ in 0..20 {
            q.zero_grad();
            td_loss(&mut q, batch, &y, true).unwrap();
            let g = q.grads().to_vec();
            for (p, g) in q.params_mut().iter_mut().zip(g) {
                *p -= 0.3 * g;
            }
        }
    }
    table(&q)
}

/// Value iteration on the same chain, as plain arithmetic.
fn value_iteration(r: f64) -> Vec<f64> {
    let mut v = [0.0; 3];
    for _ in 0..1000 {
        v = [r + GAMMA * v[1], r + GAMMA * v[2], r];
    }
    v.to_vec()
}

#[test]
fn reward_free_chain_converges_to_zero() {
    let q = fit(&chain(None), 500);
    let max = q.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(max < 1e-3, "{q:?}");
}

#[test]
fn rewarded_chain_matches_value_iteration() {
    let q = fit(&chain(Some(1.0)), 500);
    let oracle = value_iteration(1.0);
    for (a, b) in q.iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-2, "{q:?} vs {oracle:?}");
    }
}
