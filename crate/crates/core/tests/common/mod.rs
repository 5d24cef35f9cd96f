#![allow(dead_code)]

use std::sync::Arc;

use pvp_core::{Action, Transition};
use pvp_nn::{Activation, Mlp, NetSpec};
use pvp_sim::lane::BoundaryKind;
use pvp_sim::map::{LaneRecord, MapFile, MAP_FORMAT};
use pvp_sim::{Pose, SceneMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Smooth network, so that central differences are accurate.
pub fn tanh_net(input: usize, hidden: Vec<usize>, output: usize, out: Activation, seed: u64) -> Mlp {
    let spec = NetSpec {
        input,
        hidden,
        output,
        hidden_activation: Activation::Tanh,
        output_activation: out,
    };
    Mlp::new(spec, 1.0, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

pub fn random_action(rng: &mut impl Rng) -> Action {
    [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]
}

pub fn random_transition(rng: &mut impl Rng, obs: usize, intervened: bool) -> Transition {
    let s: Vec<f64> = (0..obs).map(|_| rng.random_range(-1.0..1.0)).collect();
    let s_next: Vec<f64> = (0..obs).map(|_| rng.random_range(-1.0..1.0)).collect();
    Transition {
        s: s.into(),
        a_n: random_action(rng),
        a_h: intervened.then(|| random_action(rng)),
        intervened,
        s_next: s_next.into(),
        done: rng.random_bool(0.2),
        reward: rng.random_range(-1.0..1.0),
        cost: 0.0,
    }
}

pub fn transitions(seed: u64, n: usize, obs: usize, intervened: bool) -> Vec<Transition> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| random_transition(&mut rng, obs, intervened)).collect()
}

/// Central-difference gradient of `f` with respect to every parameter.
pub fn numeric_gradient(net: &mut Mlp, mut f: impl FnMut(&mut Mlp) -> f64) -> Vec<f64> {
    let h = 1e-6;
    (0..net.num_params())
        .map(|i| {
            let orig = net.params()[i];
            net.params_mut()[i] = orig + h;
            let plus = f(net);
            net.params_mut()[i] = orig - h;
            let minus = f(net);
            net.params_mut()[i] = orig;
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(a).max(norm(b)).max(1e-12)
}

/// Two parallel 200 m lanes along +x: lane 0 on y = 0 under the yellow line
/// at y = 1.75, lane 1 on y = −3.5 next to the curb.
pub fn straight_road() -> Arc<SceneMap> {
    let raw = MapFile {
        format: MAP_FORMAT.to_string(),
        seed: 11,
        blocks: vec![],
        lanes: vec![
            LaneRecord {
                id: 0,
                width: 3.5,
                boundary_left: BoundaryKind::YellowSolid,
                boundary_right: BoundaryKind::WhiteBroken,
                points: vec![[0.0, 0.0], [200.0, 0.0]],
            },
            LaneRecord {
                id: 1,
                width: 3.5,
                boundary_left: BoundaryKind::WhiteBroken,
                boundary_right: BoundaryKind::None,
                points: vec![[0.0, -3.5], [200.0, -3.5]],
            },
        ],
        edges: vec![[0, 1], [1, 0]],
        spawns: vec![Pose::new(5.0, 0.0, 0.0)],
        destination: Pose::new(195.0, 0.0, 0.0),
        obstacles: vec![],
    };
    Arc::new(SceneMap::from_file(raw).unwrap())
}
