//! Integer voxel point clouds, PLY I/O and geometry distortion metrics.

pub mod kdtree;
pub mod metrics;
pub mod ply;

pub use metrics::{
    d1_distortion, d2_distortion, estimate_normals, estimate_normals_f64, evaluate,
    geometry_psnr, MetricsReport,
};
pub use ply::{read_ply, write_ply, PlyFormat};

use crate::error::{Error, Result};

pub type Point = [u32; 3];

/// Largest supported coordinate precision.
pub const MAX_BIT_DEPTH: u8 = 24;

/// A deduplicated set of voxel coordinates, stored in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointCloud {
    points: Vec<Point>,
    bit_depth: u8,
}

impl Default for PointCloud {
    fn default() -> Self {
        Self {
            points: Vec::new(),
            bit_depth: 1,
        }
    }
}

/// Smallest bit depth (at least 1) able to hold `max`.
pub fn bits_for(max: u32) -> u8 {
    (32 - max.leading_zeros()).max(1) as u8
}

impl PointCloud {
    /// Builds a cloud with the minimal bit depth covering its coordinates.
    pub fn new(mut points: Vec<Point>) -> Self {
        points.sort_unstable();
        points.dedup();
        let max = points
            .iter()
            .flat_map(|p| p.iter().copied())
            .max()
            .unwrap_or(0);
        Self {
            points,
            bit_depth: bits_for(max),
        }
    }

    /// Builds a cloud living in a `2^bit_depth` cube.
    pub fn with_bit_depth(points: Vec<Point>, bit_depth: u8) -> Result<Self> {
        if bit_depth == 0 || bit_depth > MAX_BIT_DEPTH {
            return Err(Error::Domain(format!("bit depth {bit_depth} out of range")));
        }
        let mut pc = Self::new(points);
        if pc.bit_depth > bit_depth {
            return Err(Error::Domain(format!(
                "coordinates need {} bits, cloud declared {bit_depth}",
                pc.bit_depth
            )));
        }
        pc.bit_depth = bit_depth;
        Ok(pc)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Point> {
        self.points
    }

    pub fn bit_depth(&self) -> u8 {
        self.bit_depth
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.points.binary_search(p).is_ok()
    }

    /// Rescales coordinates to a `2^target_bits` grid (floor on downscale) and
    /// deduplicates.
    pub fn voxelize(&self, target_bits: u8) -> PointCloud {
        let target_bits = target_bits.clamp(1, MAX_BIT_DEPTH);
        let points = if target_bits >= self.bit_depth {
            let shift = target_bits - self.bit_depth;
            self.points
                .iter()
                .map(|p| [p[0] << shift, p[1] << shift, p[2] << shift])
                .collect()
        } else {
            let shift = self.bit_depth - target_bits;
            self.points
                .iter()
                .map(|p| [p[0] >> shift, p[1] >> shift, p[2] >> shift])
                .collect()
        };
        let mut pc = PointCloud::new(points);
        pc.bit_depth = target_bits;
        pc
    }

    pub(crate) fn as_f64(&self) -> Vec<[f64; 3]> {
        self.points
            .iter()
            .map(|p| [p[0] as f64, p[1] as f64, p[2] as f64])
            .collect()
    }
}
