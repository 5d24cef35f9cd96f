//! Behavior cloning baseline: supervised regression of the policy onto
//! expert actions.

use pvp_nn::{Mlp, NetSpec};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::losses::{bc_loss_raw, ACT_DIM};
use crate::{Action, CoreError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BcConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub hidden: Vec<usize>,
}

impl Default for BcConfig {
    fn default() -> Self {
        BcConfig {
            epochs: 50,
            batch_size: 256,
            lr: 1e-3,
            hidden: vec![256, 256],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BcDataset {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Action>,
}

impl BcDataset {
    pub fn push(&mut self, s: Vec<f64>, a: Action) {
        self.states.push(s);
        self.actions.push(a);
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Full-dataset BC loss of `policy`.
pub fn dataset_loss(policy: &mut Mlp, data: &BcDataset) -> Result<f64, CoreError> {
    let s: Vec<f64> = data.states.iter().flatten().copied().collect();
    let a: Vec<f64> = data.actions.iter().flatten().copied().collect();
    Ok(bc_loss_raw(policy, &s, &a, data.len(), 1.0, false)?)
}

/// Trains a fresh policy for `epochs` passes of shuffled minibatches and
/// returns it with the per-epoch training loss.
pub fn baseline_bc_train(data: &BcDataset, cfg: &BcConfig, seed: u64) -> Result<(Mlp, Vec<f64>), CoreError> {
    if data.is_empty() {
        return Err(CoreError::Config("behavior cloning needs a non-empty dataset".into()));
    }
    let obs_dim = data.states[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut policy = Mlp::new(
        NetSpec::action_head(obs_dim, ACT_DIM).with_hidden(cfg.hidden.clone()),
        0.01,
        &mut rng,
    )?;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let bs = cfg.batch_size.max(1);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(bs) {
            let s: Vec<f64> = chunk.iter().flat_map(|&i| data.states[i].iter().copied()).collect();
            let a: Vec<f64> = chunk.iter().flat_map(|&i| data.actions[i]).collect();
            policy.zero_grad();
            bc_loss_raw(&mut policy, &s, &a, chunk.len(), 1.0, true)?;
            policy.optimizer_step(cfg.lr)?;
        }
        history.push(dataset_loss(&mut policy, data)?);
    }
    Ok((policy, history))
}

/// Lets the scripted expert drive the training scenes and records
/// `budget` (observation, sampled expert action) pairs. The sampled action is
/// also the one executed, as a human demonstrator's would be.
pub fn collect_expert_dataset(
    catalog: &pvp_sim::SceneCatalog,
    env_cfg: &pvp_sim::EnvConfig,
    expert: &crate::expert::ExpertPolicy,
    sigma: [f64; 2],
    budget: usize,
    seed: u64,
) -> Result<BcDataset, CoreError> {
    use pvp_sim::{DriveEnv, Split};
    if catalog.is_empty(Split::Train) {
        return Err(CoreError::Config("the training split has no scenes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = BcDataset::default();
    let mut episode = 0u64;
    while data.len() < budget {
        let (scene, env_seed) = crate::runner::episode_plan(seed, episode, catalog.len(Split::Train));
        let (_, map) = catalog.by_index(Split::Train, scene);
        let mut env = DriveEnv::new(map, env_cfg.clone())?;
        let mut obs = env.reset(env_seed).to_vec();
        while data.len() < budget {
            let mu = expert.act(&env).action;
            let a = crate::gate::sample_expert(mu, sigma, &mut rng);
            data.push(obs, a);
            let out = env.step(a)?;
            if out.done {
                break;
            }
            obs = out.observation.to_vec();
        }
        episode += 1;
    }
    Ok(data)
}
