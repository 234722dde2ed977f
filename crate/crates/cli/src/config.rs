use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spikegrid::data::{SplitMode, SplitSpec};
use spikegrid::network::{ArchPlan, NetworkSpec};
use spikegrid::neuron::LifConfig;
use spikegrid::train::TrainConfig;

use crate::CliError;

/// Network knobs the sweeps vary; patch size and time steps live in `train`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub arch: ArchPlan,
    pub lif: LifConfig,
}

/// One JSON document describing a run. Relative paths resolve against the
/// directory holding the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub cube: PathBuf,
    pub labels: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default = "default_components")]
    pub pca_components: usize,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_split")]
    pub split: SplitSpec,
}

fn default_components() -> usize {
    30
}

fn default_split() -> SplitSpec {
    SplitSpec {
        mode: SplitMode::PerClassCount(200),
        seed: 0,
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.cube, &mut cfg.labels, &mut cfg.output_dir] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.pca_components == 0 {
            return Err(CliError::usage("pca_components must be at least 1"));
        }
        if self.network.arch.width_factor == 0 {
            return Err(CliError::usage("width_factor must be at least 1"));
        }
        self.train.validate()?;
        self.split.validate()?;
        self.network.lif.validate()?;
        // catches geometry problems (e.g. a patch too small for both pools)
        self.network_spec(2)?;
        Ok(())
    }

    pub fn network_spec(&self, num_classes: usize) -> Result<NetworkSpec, CliError> {
        Ok(NetworkSpec::from_plan(
            &self.network.arch,
            self.pca_components,
            self.train.patch_size,
            num_classes,
            self.train.time_steps,
            self.network.lif,
        )?)
    }

    /// Same run with both the split and training seeds replaced.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.train.seed = seed;
        c.split.seed = seed;
        c
    }
}
