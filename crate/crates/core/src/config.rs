//! Codec configuration, stored as a small TOML key-value file.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::octree::validate_geometry;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodecConfig {
    /// Side of the coarsest octree voxels.
    pub coarsest_side: u32,
    /// Deepest split level; leaves there have side `coarsest_side >> max_level`.
    pub max_level: u8,
    pub min_side: u32,
    /// λ multipliers per octree level, level 0 first.
    pub multipliers: Vec<f64>,
    /// Codebook size per grid level, coarsest grid first. The last entry
    /// repeats for deeper grids.
    pub codebook_sizes: Vec<u32>,
    /// Surface thickness accepted around the near and far depths.
    pub thickness: u8,
    /// Inputs with more precision are voxelized down to this many bits.
    pub target_bits: u8,
    pub normal_k: usize,
    pub seed: u64,
    /// Patches used to fit each transform and codebook.
    pub max_train_samples: usize,
    /// Depth maps kept per leaf configuration during training.
    pub max_train_images: usize,
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self {
            coarsest_side: 32,
            max_level: 3,
            min_side: 4,
            multipliers: vec![8.0, 4.6, 2.5, 1.0],
            codebook_sizes: vec![256, 16, 4, 1],
            thickness: 1,
            target_bits: 9,
            normal_k: crate::pointcloud::metrics::DEFAULT_NORMAL_NEIGHBOURS,
            seed: 1,
            max_train_samples: 8192,
            max_train_images: 4096,
        }
    }
}

impl CodecConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: CodecConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        validate_geometry(self.coarsest_side, self.max_level)?;
        let leaf = self.coarsest_side >> self.max_level;
        if self.min_side < 4 || !self.min_side.is_power_of_two() || leaf < self.min_side {
            return Err(Error::Config(format!(
                "leaf side {leaf} must be >= min_side {} (a power of two >= 4)",
                self.min_side
            )));
        }
        if self.multipliers.len() != self.max_level as usize + 1 {
            return Err(Error::Config(format!(
                "{} multipliers for {} levels",
                self.multipliers.len(),
                self.max_level as usize + 1
            )));
        }
        if self.multipliers.iter().any(|m| !(m.is_finite() && *m > 0.0 && *m < 65.0)) {
            return Err(Error::Config("multipliers must lie in (0, 65)".into()));
        }
        if self.multipliers.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::Config("multipliers must strictly decrease with level".into()));
        }
        if self.codebook_sizes.is_empty()
            || self
                .codebook_sizes
                .iter()
                .any(|&c| c == 0 || !c.is_power_of_two() || c > 1 << 16)
        {
            return Err(Error::Config("codebook sizes must be powers of two <= 65536".into()));
        }
        if self.target_bits == 0 || self.target_bits > crate::pointcloud::MAX_BIT_DEPTH {
            return Err(Error::Config(format!("target_bits {} out of range", self.target_bits)));
        }
        if self.normal_k < 3 {
            return Err(Error::Config("normal_k must be >= 3".into()));
        }
        if self.max_train_samples < 2 || self.max_train_images == 0 {
            return Err(Error::Config("training caps must be positive".into()));
        }
        Ok(())
    }

    /// λ at octree level `level` for base rate knob `lambda`.
    pub fn lambda_at(&self, lambda: f64, level: u8) -> f64 {
        self.multipliers[level as usize] * lambda
    }

    pub fn codebook_size(&self, grid_level: usize) -> u32 {
        let i = grid_level.min(self.codebook_sizes.len() - 1);
        self.codebook_sizes[i]
    }

    pub fn leaf_side(&self, level: u8) -> u32 {
        self.coarsest_side >> level
    }
}
