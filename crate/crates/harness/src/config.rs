use std::path::{Path, PathBuf};

use crtwalk::discrete_tree::Offspring;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Parameters of one experiment. Every field has a default so a config file
/// only needs the entries it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub n_list: Vec<usize>,
    pub k_list: Vec<usize>,
    /// Grid spacing for diffusions.
    pub h: f64,
    /// Replicas for marginal laws.
    pub replicas: usize,
    /// Independent seeds for sup-statistics.
    pub seeds: usize,
    /// Time horizon `R`.
    pub horizon: f64,
    /// Offspring law, e.g. `geometric:0.5`.
    pub offspring: String,
    pub master_seed: u64,
    /// Resample the tree for every replica.
    pub annealed: bool,
    /// Vertex count of the master tree that couples the quenched trees.
    pub master_size: usize,
    /// Grid size of the target excursion.
    pub excursion_grid: usize,
    /// Point spacing for embedded clouds (rescaled units).
    pub cloud_spacing: f64,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "experiment".into(),
            n_list: vec![250, 500, 1000, 2000],
            k_list: vec![2, 4, 8, 16],
            h: 0.01,
            replicas: 2000,
            seeds: 20,
            horizon: 1.0,
            offspring: "geometric:0.5".into(),
            master_seed: 2024,
            annealed: false,
            master_size: 512_000,
            excursion_grid: 20_000,
            cloud_spacing: 0.02,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(HarnessError::Config(m.into()));
        if self.n_list.is_empty() || self.k_list.is_empty() {
            return bad("n_list and k_list must be nonempty");
        }
        if self.n_list.contains(&0) || self.k_list.contains(&0) {
            return bad("list entries must be positive");
        }
        if self.replicas == 0 || self.seeds == 0 {
            return bad("replicas and seeds must be at least 1");
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return bad("h must be positive");
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad("horizon must be positive");
        }
        if self.cloud_spacing <= 0.0 {
            return bad("cloud_spacing must be positive");
        }
        if self.excursion_grid < 2 {
            return bad("excursion_grid must be at least 2");
        }
        self.offspring_law()?;
        Ok(())
    }

    pub fn offspring_law(&self) -> Result<Offspring> {
        self.offspring.parse().map_err(HarnessError::Core)
    }

    /// Preset for the tightness suite.
    pub fn tightness() -> Self {
        ExperimentConfig {
            name: "tightness".into(),
            n_list: vec![2000],
            k_list: vec![2, 4, 8, 16, 32],
            ..Default::default()
        }
    }

    /// Preset for the convergence suite.
    pub fn convergence() -> Self {
        ExperimentConfig { name: "convergence".into(), k_list: vec![8], ..Default::default() }
    }

    /// Preset for the additive-functional trend.
    pub fn a_hat_trend() -> Self {
        ExperimentConfig { name: "a_hat_trend".into(), ..Default::default() }
    }
}
