//! Coarse-to-fine octree decomposition and its structure signalling.
//!
//! Roots are the occupied voxels of a regular grid of `coarsest_side` cubes.
//! Children are indexed in Morton order: bit 0 selects the upper x half,
//! bit 1 the upper y half, bit 2 the upper z half.

use crate::bits::{BitReader, BitWriter};
use crate::error::{Error, Result, StreamError};
use crate::pointcloud::PointCloud;

pub type LocalPoint = [u16; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VoxelKey {
    pub level: u8,
    pub origin: [u32; 3],
}

impl VoxelKey {
    pub fn side(&self, coarsest_side: u32) -> u32 {
        coarsest_side >> self.level
    }

    /// Key of the ancestor at `level` (or `self` when already coarser).
    pub fn ancestor(&self, level: u8, coarsest_side: u32) -> VoxelKey {
        if level >= self.level {
            return *self;
        }
        let side = coarsest_side >> level;
        VoxelKey {
            level,
            origin: self.origin.map(|c| c - c % side),
        }
    }
}

#[derive(Debug, Clone)]
pub struct OctreeNode {
    pub key: VoxelKey,
    pub side: u32,
    /// Points relative to `key.origin`, each coordinate in `[0, side)`.
    pub points: Vec<LocalPoint>,
    pub split: bool,
    pub children: [Option<usize>; 8],
}

#[derive(Debug, Clone)]
pub struct Octree {
    pub coarse_dims: [u32; 3],
    pub coarsest_side: u32,
    pub max_level: u8,
    pub nodes: Vec<OctreeNode>,
    /// Root node ids in raster order (x fastest).
    pub roots: Vec<usize>,
}

/// Number of coarsest voxels per axis for a `2^bit_depth` cube.
pub fn coarse_dims_for(bit_depth: u8, coarsest_side: u32) -> [u32; 3] {
    let n = ((1u64 << bit_depth).div_ceil(coarsest_side as u64)).max(1) as u32;
    [n; 3]
}

pub fn validate_geometry(coarsest_side: u32, max_level: u8) -> Result<()> {
    if !coarsest_side.is_power_of_two() || coarsest_side > 128 {
        return Err(Error::Config(format!(
            "coarsest side {coarsest_side} must be a power of two <= 128"
        )));
    }
    if max_level as u32 >= 32 || coarsest_side >> max_level == 0 {
        return Err(Error::Config(format!(
            "max level {max_level} too deep for coarsest side {coarsest_side}"
        )));
    }
    Ok(())
}

fn morton_child(local: &LocalPoint, half: u16) -> usize {
    (local[0] >= half) as usize | ((local[1] >= half) as usize) << 1 | ((local[2] >= half) as usize) << 2
}

impl Octree {
    /// Decomposes `pc` down to `max_level`; every node above `max_level` is
    /// provisionally marked split.
    pub fn build(pc: &PointCloud, coarsest_side: u32, max_level: u8) -> Result<Octree> {
        validate_geometry(coarsest_side, max_level)?;
        let coarse_dims = coarse_dims_for(pc.bit_depth(), coarsest_side);
        let mut tree = Octree {
            coarse_dims,
            coarsest_side,
            max_level,
            nodes: Vec::new(),
            roots: Vec::new(),
        };
        let raster = |p: &[u32; 3]| {
            let c = p.map(|v| (v / coarsest_side) as u64);
            c[0] + coarse_dims[0] as u64 * (c[1] + coarse_dims[1] as u64 * c[2])
        };
        let mut keyed: Vec<(u64, [u32; 3])> = pc.points().iter().map(|p| (raster(p), *p)).collect();
        keyed.sort_unstable();
        let mut start = 0;
        while start < keyed.len() {
            let cell = keyed[start].0;
            let mut end = start;
            while end < keyed.len() && keyed[end].0 == cell {
                end += 1;
            }
            let origin = keyed[start].1.map(|v| v - v % coarsest_side);
            let locals: Vec<LocalPoint> = keyed[start..end]
                .iter()
                .map(|(_, p)| [(p[0] - origin[0]) as u16, (p[1] - origin[1]) as u16, (p[2] - origin[2]) as u16])
                .collect();
            let id = tree.add_subtree(VoxelKey { level: 0, origin }, locals);
            tree.roots.push(id);
            start = end;
        }
        Ok(tree)
    }

    fn add_subtree(&mut self, key: VoxelKey, points: Vec<LocalPoint>) -> usize {
        let side = key.side(self.coarsest_side);
        let id = self.nodes.len();
        let split = key.level < self.max_level;
        self.nodes.push(OctreeNode {
            key,
            side,
            points: Vec::new(),
            split,
            children: [None; 8],
        });
        if split {
            let half = (side / 2) as u16;
            let mut buckets: [Vec<LocalPoint>; 8] = Default::default();
            for p in &points {
                let c = morton_child(p, half);
                let off = [(c & 1) as u16, ((c >> 1) & 1) as u16, ((c >> 2) & 1) as u16].map(|b| b * half);
                buckets[c].push([p[0] - off[0], p[1] - off[1], p[2] - off[2]]);
            }
            for (c, bucket) in buckets.into_iter().enumerate() {
                if bucket.is_empty() {
                    continue;
                }
                let h = half as u32;
                let origin = [
                    key.origin[0] + (c as u32 & 1) * h,
                    key.origin[1] + ((c as u32 >> 1) & 1) * h,
                    key.origin[2] + ((c as u32 >> 2) & 1) * h,
                ];
                let child = self.add_subtree(VoxelKey { level: key.level + 1, origin }, bucket);
                self.nodes[id].children[c] = Some(child);
            }
        }
        let mut points = points;
        points.sort_unstable();
        self.nodes[id].points = points;
        id
    }

    pub fn leaf_side(&self, level: u8) -> u32 {
        self.coarsest_side >> level
    }

    /// Leaf node ids under the current split decisions, in canonical order
    /// (raster roots, Morton depth-first).
    pub fn leaves(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for &r in &self.roots {
            self.collect_leaves(r, &mut out);
        }
        out
    }

    fn collect_leaves(&self, id: usize, out: &mut Vec<usize>) {
        let node = &self.nodes[id];
        if node.split && node.key.level < self.max_level {
            for child in node.children.iter().flatten() {
                self.collect_leaves(*child, out);
            }
        } else {
            out.push(id);
        }
    }

    /// Coarse occupancy bitmap, then per occupied node above `max_level` a
    /// split flag; a split node is followed by its 8-bit child occupancy mask
    /// (child 0 first) and its occupied children, depth-first.
    pub fn structure_bits(&self) -> BitWriter {
        let mut w = BitWriter::new();
        let [nx, ny, nz] = self.coarse_dims;
        let mut occupied = vec![false; (nx as usize) * (ny as usize) * (nz as usize)];
        for &r in &self.roots {
            let o = self.nodes[r].key.origin.map(|v| (v / self.coarsest_side) as usize);
            occupied[o[0] + nx as usize * (o[1] + ny as usize * o[2])] = true;
        }
        for bit in occupied {
            w.write_bit(bit);
        }
        for &r in &self.roots {
            self.write_node(r, &mut w);
        }
        w
    }

    fn write_node(&self, id: usize, w: &mut BitWriter) {
        let node = &self.nodes[id];
        if node.key.level >= self.max_level {
            return;
        }
        w.write_bit(node.split);
        if node.split {
            for c in &node.children {
                w.write_bit(c.is_some());
            }
            for c in node.children.iter().flatten() {
                self.write_node(*c, w);
            }
        }
    }

    /// Structure cost in bits of coding `id` as split, excluding children.
    pub const SPLIT_OVERHEAD_BITS: u64 = 1 + 8;
}

/// Inverse of [`Octree::structure_bits`]: leaf keys in canonical order.
pub fn parse_structure(
    r: &mut BitReader<'_>,
    coarse_dims: [u32; 3],
    coarsest_side: u32,
    max_level: u8,
) -> Result<Vec<VoxelKey>, StreamError> {
    let [nx, ny, nz] = coarse_dims;
    let total = nx as u64 * ny as u64 * nz as u64;
    if total > r.remaining() {
        return Err(StreamError::Truncated("coarse occupancy bitmap"));
    }
    let mut roots = Vec::new();
    for i in 0..total {
        if r.read_bit()? {
            let x = (i % nx as u64) as u32;
            let y = ((i / nx as u64) % ny as u64) as u32;
            let z = (i / (nx as u64 * ny as u64)) as u32;
            roots.push([x * coarsest_side, y * coarsest_side, z * coarsest_side]);
        }
    }
    let mut leaves = Vec::new();
    for origin in roots {
        parse_node(r, VoxelKey { level: 0, origin }, coarsest_side, max_level, &mut leaves)?;
    }
    Ok(leaves)
}

fn parse_node(
    r: &mut BitReader<'_>,
    key: VoxelKey,
    coarsest_side: u32,
    max_level: u8,
    leaves: &mut Vec<VoxelKey>,
) -> Result<(), StreamError> {
    if key.level >= max_level || !r.read_bit()? {
        leaves.push(key);
        return Ok(());
    }
    let mask = r.read_bits(8)?;
    if mask == 0 {
        return Err(StreamError::InvalidField("split node without children".into()));
    }
    let half = key.side(coarsest_side) / 2;
    for c in 0..8u32 {
        if mask & (0x80 >> c) == 0 {
            continue;
        }
        let origin = [
            key.origin[0] + (c & 1) * half,
            key.origin[1] + ((c >> 1) & 1) * half,
            key.origin[2] + ((c >> 2) & 1) * half,
        ];
        parse_node(r, VoxelKey { level: key.level + 1, origin }, coarsest_side, max_level, leaves)?;
    }
    Ok(())
}
