//! Coarse-to-fine training of per-level transforms and codebooks.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::lanczos::upsample;
use super::{build_pyramid, extract_patches, pyramid_dims, GicModel, Image, LevelModel, ModelConfig, UnitKey, UnitModel, PATCH_DIM};
use super::{Codebook, SaabTransform};
use crate::config::CodecConfig;
use crate::error::{Result, TrainError};
use crate::leaf::prepare;
use crate::octree::Octree;
use crate::pointcloud::PointCloud;

/// Evenly spaced subset of `n` items of size at most `cap`.
fn spread(n: usize, cap: usize) -> Vec<usize> {
    if n <= cap {
        (0..n).collect()
    } else {
        (0..cap).map(|j| j * n / cap).collect()
    }
}

fn unit_seed(seed: u64, key: UnitKey, level: usize) -> u64 {
    seed ^ ((key.side as u64) << 32 | (key.layout as u64) << 16 | level as u64)
}

/// Trains one coder from fully filled depth maps, grid by grid. Residual
/// samples at a grid come from reconstructions through the already trained
/// coarser grids.
pub fn train_unit(
    key: UnitKey,
    images: &[Image],
    codebook_sizes: &[u32],
    seed: u64,
    max_samples: usize,
) -> Result<UnitModel, TrainError> {
    let dims = pyramid_dims(key);
    if images.is_empty() {
        return Err(TrainError::NoTrainingData);
    }
    let pyramids: Vec<Vec<Image>> = images
        .par_iter()
        .map(|img| build_pyramid(img, dims.len()).expect("pyramid dims follow the key"))
        .collect();
    let mut recon: Vec<Option<Image>> = vec![None; images.len()];
    let mut levels = Vec::with_capacity(dims.len());
    for (l, &(rows, cols)) in dims.iter().enumerate() {
        let size = codebook_sizes[l.min(codebook_sizes.len() - 1)] as usize;
        let bases: Vec<Option<Image>> = recon.par_iter().map(|r| r.as_ref().map(upsample)).collect();
        let mut patches = Vec::new();
        for (pyr, base) in pyramids.iter().zip(&bases) {
            let target = &pyr[l];
            let signal = match base {
                Some(b) => Image::new(rows, cols, target.data.iter().zip(&b.data).map(|(t, b)| t - b).collect()),
                None => target.clone(),
            };
            patches.extend(extract_patches(&signal));
        }
        let n = patches.len() / PATCH_DIM;
        if n < size {
            return Err(TrainError::InsufficientSamples {
                level: format!("{key} grid {rows}x{cols}"),
                have: n,
                need: size,
            });
        }
        let picked: Vec<f64> = spread(n, max_samples)
            .into_iter()
            .flat_map(|i| patches[i * PATCH_DIM..(i + 1) * PATCH_DIM].iter().copied())
            .collect();
        let saab = if picked.len() / PATCH_DIM >= 2 {
            SaabTransform::fit(&picked, PATCH_DIM)?
        } else {
            SaabTransform::identity(PATCH_DIM)
        };
        let coeffs: Vec<f64> = picked.chunks_exact(PATCH_DIM).flat_map(|p| saab.forward(p)).collect();
        let codebook = Codebook::train(&coeffs, PATCH_DIM, size, unit_seed(seed, key, l)).map_err(|e| match e {
            TrainError::InsufficientSamples { have, need, .. } => TrainError::InsufficientSamples {
                level: format!("{key} grid {rows}x{cols}"),
                have,
                need,
            },
            other => other,
        })?;
        let level = LevelModel { rows, cols, saab, codebook };
        recon = pyramids
            .par_iter()
            .zip(bases.par_iter())
            .map(|(pyr, base)| Some(level.code(&pyr[l], base.as_ref()).1))
            .collect();
        levels.push(level);
    }
    Ok(UnitModel { key, levels })
}

/// Filled depth maps of every codable node of `clouds`, grouped by coder.
pub fn harvest_leaf_images(clouds: &[PointCloud], config: &CodecConfig) -> Result<BTreeMap<UnitKey, Vec<Image>>> {
    let mut out: BTreeMap<UnitKey, Vec<Image>> = BTreeMap::new();
    for cloud in clouds {
        let cloud = if cloud.bit_depth() > config.target_bits {
            cloud.voxelize(config.target_bits)
        } else {
            cloud.clone()
        };
        let tree = Octree::build(&cloud, config.coarsest_side, config.max_level)?;
        let images: Vec<Option<(UnitKey, Image)>> = tree
            .nodes
            .par_iter()
            .map(|node| {
                let prep = prepare(&node.points, node.side, config.thickness);
                if !prep.projectable && node.key.level < config.max_level {
                    return None;
                }
                let layout = prep.layout();
                Some((UnitKey { side: node.side, layout }, prep.image(layout)))
            })
            .collect();
        for (key, img) in images.into_iter().flatten() {
            out.entry(key).or_default().push(img);
        }
    }
    Ok(out)
}

/// Trains a model for every leaf configuration present in `clouds`.
/// Configurations never seen in the corpus are left out of the model.
pub fn train_model(clouds: &[PointCloud], config: &CodecConfig) -> Result<GicModel> {
    config.validate()?;
    let harvested = harvest_leaf_images(clouds, config)?;
    if harvested.is_empty() {
        return Err(TrainError::NoTrainingData.into());
    }
    let mut units = BTreeMap::new();
    for (key, images) in harvested {
        let keep: Vec<Image> = spread(images.len(), config.max_train_images)
            .into_iter()
            .map(|i| images[i].clone())
            .collect();
        let unit = train_unit(key, &keep, &config.codebook_sizes, config.seed, config.max_train_samples)?;
        units.insert(key, unit);
    }
    let model = GicModel::new(ModelConfig::from_codec(config), units);
    Ok(model)
}
