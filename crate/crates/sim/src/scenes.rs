//! Train and test scene catalogs drawn from a single master seed.

use std::collections::HashSet;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::map::SceneMap;
use crate::pg::{pg_generate_with, PgConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneConfig {
    pub master_seed: u64,
    pub train_scenes: usize,
    pub test_scenes: usize,
    pub num_blocks: usize,
    pub pg: PgConfig,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            master_seed: 0,
            train_scenes: 50,
            test_scenes: 50,
            num_blocks: 3,
            pg: PgConfig::default(),
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SceneError {
    #[error("scene {scene} belongs to the {actual:?} split, not {requested:?}")]
    WrongSplit { scene: u64, requested: Split, actual: Split },
    #[error("unknown scene {0}")]
    Unknown(u64),
    #[error("could not generate enough scenes from master seed {0}")]
    Exhausted(u64),
}

/// Scenes are identified by their generation seed.
#[derive(Debug, Clone)]
pub struct SceneCatalog {
    train: Vec<(u64, Arc<SceneMap>)>,
    test: Vec<(u64, Arc<SceneMap>)>,
}

impl SceneCatalog {
    /// Draws distinct seeds until both splits are filled, skipping seeds whose
    /// generation fails.
    pub fn generate(cfg: &SceneConfig) -> Result<Self, SceneError> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.master_seed);
        let mut seen = HashSet::new();
        let mut maps = Vec::new();
        let want = cfg.train_scenes + cfg.test_scenes;
        let mut attempts = 0;
        while maps.len() < want {
            attempts += 1;
            if attempts > 20 * want + 100 {
                return Err(SceneError::Exhausted(cfg.master_seed));
            }
            let seed: u64 = rng.random::<u32>() as u64;
            if !seen.insert(seed) {
                continue;
            }
            if let Ok(map) = pg_generate_with(seed, cfg.num_blocks, &cfg.pg) {
                maps.push((seed, Arc::new(map)));
            }
        }
        let test = maps.split_off(cfg.train_scenes);
        Ok(SceneCatalog { train: maps, test })
    }

    pub fn ids(&self, split: Split) -> Vec<u64> {
        self.entries(split).iter().map(|(s, _)| *s).collect()
    }

    fn entries(&self, split: Split) -> &[(u64, Arc<SceneMap>)] {
        match split {
            Split::Train => &self.train,
            Split::Test => &self.test,
        }
    }

    pub fn len(&self, split: Split) -> usize {
        self.entries(split).len()
    }

    pub fn is_empty(&self, split: Split) -> bool {
        self.entries(split).is_empty()
    }

    /// Scene by position within its split.
    pub fn by_index(&self, split: Split, idx: usize) -> (u64, Arc<SceneMap>) {
        let (s, m) = &self.entries(split)[idx % self.len(split)];
        (*s, m.clone())
    }

    pub fn get(&self, split: Split, scene: u64) -> Result<Arc<SceneMap>, SceneError> {
        if let Some((_, m)) = self.entries(split).iter().find(|(s, _)| *s == scene) {
            return Ok(m.clone());
        }
        let other = match split {
            Split::Train => Split::Test,
            Split::Test => Split::Train,
        };
        if self.entries(other).iter().any(|(s, _)| *s == scene) {
            return Err(SceneError::WrongSplit {
                scene,
                requested: split,
                actual: other,
            });
        }
        Err(SceneError::Unknown(scene))
    }
}
