//! Multi-resolution depth-map coder.
//!
//! A map is reduced by Lanczos decimation to a 4-row floor. The coarsest
//! image is coded patch-by-patch (4×4 patches, Saab transform, then VQ);
//! every finer level codes the residual between the pyramid image and the
//! interpolated reconstruction of the level below. The encoder runs the
//! decoder loop itself, so both sides hold identical reconstructions.

pub mod lanczos;
pub mod model;
pub mod saab;
pub mod train;
pub mod vq;

pub use lanczos::Image;
pub use model::{GicModel, ModelConfig};
pub use saab::SaabTransform;
pub use train::{harvest_leaf_images, train_model};
pub use vq::Codebook;

use crate::error::{Error, Result, StreamError};

pub const PATCH: usize = 4;
pub const PATCH_DIM: usize = PATCH * PATCH;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Layout {
    /// Near map only, `S`×`S`.
    Single = 0,
    /// Near and far maps side by side, `S`×`2S`.
    Dual = 1,
}

impl Layout {
    pub fn name(self) -> &'static str {
        match self {
            Layout::Single => "single",
            Layout::Dual => "dual",
        }
    }

    pub fn width_factor(self) -> usize {
        match self {
            Layout::Single => 1,
            Layout::Dual => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UnitKey {
    pub side: u32,
    pub layout: Layout,
}

impl std::fmt::Display for UnitKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "side {} {}", self.side, self.layout.name())
    }
}

/// Grid sizes from the 4-row floor up to the full map.
pub fn pyramid_dims(key: UnitKey) -> Vec<(usize, usize)> {
    let mut dims = Vec::new();
    let mut rows = PATCH;
    while rows <= key.side as usize {
        dims.push((rows, rows * key.layout.width_factor()));
        rows *= 2;
    }
    dims
}

/// One grid level: transform and codebook.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelModel {
    pub rows: usize,
    pub cols: usize,
    pub saab: SaabTransform,
    pub codebook: Codebook,
}

impl LevelModel {
    pub fn patch_count(&self) -> usize {
        (self.rows / PATCH) * (self.cols / PATCH)
    }

    pub fn index_bits(&self) -> u64 {
        self.codebook.index_bits() as u64
    }

    pub fn parameter_count(&self) -> usize {
        self.saab.parameter_count() + self.codebook.parameter_count()
    }

    /// Codes `target − base` patch-wise; returns the indices and the
    /// reconstruction `base + decoded residual`.
    pub fn code(&self, target: &Image, base: Option<&Image>) -> (Vec<u32>, Image) {
        let signal = match base {
            Some(b) => Image::new(
                target.rows,
                target.cols,
                target.data.iter().zip(&b.data).map(|(t, b)| t - b).collect(),
            ),
            None => target.clone(),
        };
        let indices: Vec<u32> = extract_patches(&signal)
            .chunks_exact(PATCH_DIM)
            .map(|p| self.codebook.encode(&self.saab.forward(p)))
            .collect();
        let recon = self
            .reconstruct(&indices, base)
            .expect("indices produced by the codebook are in range");
        (indices, recon)
    }

    pub fn reconstruct(&self, indices: &[u32], base: Option<&Image>) -> Result<Image, StreamError> {
        let mut patches = Vec::with_capacity(indices.len() * PATCH_DIM);
        for &i in indices {
            patches.extend(self.saab.inverse(self.codebook.decode(i)?));
        }
        let mut img = assemble_patches(&patches, self.rows, self.cols);
        if let Some(b) = base {
            img.data.iter_mut().zip(&b.data).for_each(|(v, b)| *v += b);
        }
        Ok(img)
    }
}

/// Row-major 4×4 tiles in raster order, flattened.
pub fn extract_patches(img: &Image) -> Vec<f64> {
    let mut out = Vec::with_capacity(img.data.len());
    for tr in 0..img.rows / PATCH {
        for tc in 0..img.cols / PATCH {
            for r in 0..PATCH {
                let start = (tr * PATCH + r) * img.cols + tc * PATCH;
                out.extend_from_slice(&img.data[start..start + PATCH]);
            }
        }
    }
    out
}

pub fn assemble_patches(patches: &[f64], rows: usize, cols: usize) -> Image {
    let mut data = vec![0.0; rows * cols];
    let tiles_per_row = cols / PATCH;
    for (t, p) in patches.chunks_exact(PATCH_DIM).enumerate() {
        let (tr, tc) = (t / tiles_per_row, t % tiles_per_row);
        for r in 0..PATCH {
            let start = (tr * PATCH + r) * cols + tc * PATCH;
            data[start..start + PATCH].copy_from_slice(&p[r * PATCH..(r + 1) * PATCH]);
        }
    }
    Image::new(rows, cols, data)
}

/// Fine-to-coarse pyramid, returned coarsest first.
pub fn build_pyramid(img: &Image, levels: usize) -> Result<Vec<Image>> {
    let mut out = vec![img.clone()];
    for _ in 1..levels {
        let next = lanczos::downsample(out.last().unwrap())?;
        out.push(next);
    }
    out.reverse();
    Ok(out)
}

/// Trained coder for one `(side, layout)` configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitModel {
    pub key: UnitKey,
    /// Coarsest first.
    pub levels: Vec<LevelModel>,
}

/// Output of [`UnitModel::encode`].
#[derive(Debug, Clone, PartialEq)]
pub struct GicCode {
    /// Per level, coarsest first.
    pub indices: Vec<Vec<u32>>,
    /// Encoder-side reconstruction after the finest level.
    pub reconstruction: Image,
}

impl UnitModel {
    pub fn finest_dims(&self) -> (usize, usize) {
        let l = self.levels.last().unwrap();
        (l.rows, l.cols)
    }

    /// Exact payload size of one coded map.
    pub fn payload_bits(&self) -> u64 {
        self.levels
            .iter()
            .map(|l| l.patch_count() as u64 * l.index_bits())
            .sum()
    }

    pub fn parameter_count(&self) -> usize {
        self.levels.iter().map(|l| l.parameter_count()).sum()
    }

    pub fn encode(&self, img: &Image) -> Result<GicCode> {
        if (img.rows, img.cols) != self.finest_dims() {
            return Err(Error::Domain(format!(
                "{}x{} map does not fit model {}",
                img.rows, img.cols, self.key
            )));
        }
        let pyramid = build_pyramid(img, self.levels.len())?;
        let mut indices = Vec::with_capacity(self.levels.len());
        let mut recon: Option<Image> = None;
        for (level, target) in self.levels.iter().zip(&pyramid) {
            let base = recon.as_ref().map(lanczos::upsample);
            let (idx, r) = level.code(target, base.as_ref());
            indices.push(idx);
            recon = Some(r);
        }
        Ok(GicCode {
            indices,
            reconstruction: recon.unwrap(),
        })
    }

    pub fn decode(&self, indices: &[Vec<u32>]) -> Result<Image, StreamError> {
        if indices.len() != self.levels.len() {
            return Err(StreamError::Truncated("missing grid levels"));
        }
        let mut recon: Option<Image> = None;
        for (level, idx) in self.levels.iter().zip(indices) {
            if idx.len() != level.patch_count() {
                return Err(StreamError::Truncated("patch index count"));
            }
            let base = recon.as_ref().map(lanczos::upsample);
            recon = Some(level.reconstruct(idx, base.as_ref())?);
        }
        Ok(recon.unwrap())
    }
}

/// Nearest integer (halves up), clamped to `[−1, side]`.
pub fn round_depths(img: &Image, side: u32) -> Vec<i32> {
    img.data
        .iter()
        .map(|v| ((v + 0.5).floor() as i64).clamp(-1, side as i64) as i32)
        .collect()
}

/// Packs filled near (and, for the dual layout, far) maps into one image.
pub fn layout_image(near: &[i32], far: &[i32], side: usize, layout: Layout) -> Image {
    let cols = side * layout.width_factor();
    let mut data = Vec::with_capacity(side * cols);
    for r in 0..side {
        data.extend(near[r * side..(r + 1) * side].iter().map(|&v| v as f64));
        if layout == Layout::Dual {
            data.extend(far[r * side..(r + 1) * side].iter().map(|&v| v as f64));
        }
    }
    Image::new(side, cols, data)
}

/// Inverse of [`layout_image`] on rounded values: `(near, far)`.
pub fn split_layout(values: &[i32], side: usize, layout: Layout) -> (Vec<i32>, Vec<i32>) {
    match layout {
        Layout::Single => (values.to_vec(), values.to_vec()),
        Layout::Dual => {
            let mut near = Vec::with_capacity(side * side);
            let mut far = Vec::with_capacity(side * side);
            for r in 0..side {
                near.extend_from_slice(&values[r * 2 * side..r * 2 * side + side]);
                far.extend_from_slice(&values[r * 2 * side + side..(r + 1) * 2 * side]);
            }
            (near, far)
        }
    }
}
