use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use tacfoot_core::balance::SimConfig;
use tacfoot_core::grasp::GraspConfig;
use tacfoot_core::harness::DatasetConfig;
use tacfoot_core::posenet::TrainConfig;
use tacfoot_core::FlowParams;

/// Contents of `--config`. Every section is optional.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    pub train: TrainConfig,
    pub balance: SimConfig,
    pub grasp: GraspConfig,
    pub flow: FlowParams,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Applies `--seed` to every seeded stage.
    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.train.seed = s;
            self.balance.seed = s;
        }
        self
    }
}
