//! `nncore-v1` checkpoint files: a JSON document holding named networks with
//! their specs, parameters, Adam moments and step counters.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, NnError, Result};
use crate::mlp::Mlp;
use crate::spec::NetSpec;

pub const FORMAT_TAG: &str = "nncore-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetState {
    pub spec: NetSpec,
    pub params: Vec<f64>,
    pub adam_m: Vec<f64>,
    pub adam_v: Vec<f64>,
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub nets: BTreeMap<String, NetState>,
}

impl Default for Checkpoint {
    fn default() -> Self {
        Checkpoint {
            format: FORMAT_TAG.to_string(),
            nets: BTreeMap::new(),
        }
    }
}

impl NetState {
    pub fn capture(net: &Mlp) -> Self {
        NetState {
            spec: net.spec().clone(),
            params: net.params().to_vec(),
            adam_m: net.adam.m.clone(),
            adam_v: net.adam.v.clone(),
            step: net.adam.step,
        }
    }

    pub fn restore(&self) -> Result<Mlp> {
        let mut net = Mlp::zeros(self.spec.clone())?;
        let n = net.num_params();
        check_len("checkpoint params", n, self.params.len())?;
        check_len("checkpoint adam_m", n, self.adam_m.len())?;
        check_len("checkpoint adam_v", n, self.adam_v.len())?;
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(NnError::NonFinite("checkpoint params"));
        }
        net.params_mut().copy_from_slice(&self.params);
        net.adam.m.copy_from_slice(&self.adam_m);
        net.adam.v.copy_from_slice(&self.adam_v);
        net.adam.step = self.step;
        Ok(net)
    }
}

impl Checkpoint {
    pub fn insert(&mut self, name: &str, net: &Mlp) {
        self.nets.insert(name.to_string(), NetState::capture(net));
    }

    pub fn get(&self, name: &str) -> Result<Mlp> {
        self.nets
            .get(name)
            .ok_or_else(|| NnError::Checkpoint(format!("missing network '{name}'")))?
            .restore()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| NnError::Checkpoint(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(text).map_err(|e| NnError::Checkpoint(e.to_string()))?;
        if ckpt.format != FORMAT_TAG {
            return Err(NnError::Checkpoint(format!(
                "unsupported format '{}', expected '{FORMAT_TAG}'",
                ckpt.format
            )));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
