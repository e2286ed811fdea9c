//! Coding of a single octree leaf: projection, occupancy mode, depth fill,
//! depth-map coding and the inverse path.

use crate::bits::{BitReader, BitWriter};
use crate::error::{Error, Result, StreamError};
use crate::gic::{layout_image, round_depths, split_layout, GicModel, Image, Layout, UnitKey};
use crate::occupancy::{fill_depth, reconstruct_pixels, select_mode, FilledMaps, OccupancyMode};
use crate::octree::LocalPoint;
use crate::projection::{is_projectable, project, select_axis, unproject_local, Axis, DepthMapSet};

/// Axis (2) + mode (4) + dummy (1) + dual (1).
pub const SIDE_INFO_BITS: u64 = 8;

#[derive(Debug, Clone)]
pub struct PreparedLeaf {
    pub axis: Axis,
    pub dms: DepthMapSet,
    pub mode: OccupancyMode,
    pub filled: FilledMaps,
    pub projectable: bool,
}

pub fn prepare(points: &[LocalPoint], side: u32, thickness: u8) -> PreparedLeaf {
    let side = side as usize;
    let axis = select_axis(points, side);
    let dms = project(points, side, axis);
    let projectable = is_projectable(&dms, points, thickness as i32);
    let mode = select_mode(&dms.occupancy, side);
    let filled = fill_depth(&dms, mode);
    PreparedLeaf {
        axis,
        dms,
        mode,
        filled,
        projectable,
    }
}

impl PreparedLeaf {
    pub fn layout(&self) -> Layout {
        if self.dms.dual {
            Layout::Dual
        } else {
            Layout::Single
        }
    }

    pub fn image(&self, layout: Layout) -> Image {
        layout_image(&self.filled.near, &self.filled.far, self.dms.side, layout)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeafPayload {
    pub axis: Axis,
    pub mode: OccupancyMode,
    pub dummy_bit: bool,
    pub dual: bool,
    /// VQ indices per grid level, coarsest first.
    pub indices: Vec<Vec<u32>>,
}

impl LeafPayload {
    pub fn layout(&self) -> Layout {
        if self.dual {
            Layout::Dual
        } else {
            Layout::Single
        }
    }

    pub fn write(&self, w: &mut BitWriter, model: &GicModel, side: u32) {
        w.write_bits(self.axis.code() as u64, 2);
        w.write_bits(self.mode.index() as u64, 4);
        w.write_bit(self.dummy_bit);
        w.write_bit(self.dual);
        let unit = model
            .unit(UnitKey { side, layout: self.layout() })
            .expect("payload built against this model");
        for (idx, level) in self.indices.iter().zip(&unit.levels) {
            for &i in idx {
                w.write_bits(i as u64, level.codebook.index_bits());
            }
        }
    }

    pub fn read(r: &mut BitReader<'_>, model: &GicModel, side: u32) -> Result<Self, StreamError> {
        let axis = Axis::from_code(r.read_bits(2)?)
            .ok_or_else(|| StreamError::InvalidField("projection axis".into()))?;
        let mode = OccupancyMode::from_index(r.read_bits(4)?)
            .ok_or_else(|| StreamError::InvalidField("occupancy mode".into()))?;
        let dummy_bit = r.read_bit()?;
        let dual = r.read_bit()?;
        let layout = if dual { Layout::Dual } else { Layout::Single };
        let unit = model.unit(UnitKey { side, layout }).ok_or_else(|| {
            StreamError::InvalidField(format!("model has no coder for side {side} {}", layout.name()))
        })?;
        let mut indices = Vec::with_capacity(unit.levels.len());
        for level in &unit.levels {
            let bits = level.codebook.index_bits();
            let n = level.patch_count();
            if r.remaining() < n as u64 * bits as u64 {
                return Err(StreamError::Truncated("leaf payload"));
            }
            let mut idx = Vec::with_capacity(n);
            for _ in 0..n {
                idx.push(r.read_bits(bits)? as u32);
            }
            indices.push(idx);
        }
        Ok(Self {
            axis,
            mode,
            dummy_bit,
            dual,
            indices,
        })
    }
}

/// Everything the encoder learns from coding one node as a leaf.
#[derive(Debug, Clone)]
pub struct EncodedLeaf {
    pub payload: LeafPayload,
    /// Exact payload size, side info included.
    pub bits: u64,
    /// Decoder-identical reconstruction in local coordinates.
    pub reconstruction: Vec<LocalPoint>,
    pub projectable: bool,
}

fn rebuild(payload: &LeafPayload, values: &[i32], side: u32) -> Vec<LocalPoint> {
    let (near, far) = split_layout(values, side as usize, payload.layout());
    let dms = reconstruct_pixels(&near, &far, payload.mode, payload.dual, side as usize, payload.axis);
    unproject_local(&dms)
}

pub fn encode_leaf(points: &[LocalPoint], side: u32, model: &GicModel, thickness: u8) -> Result<EncodedLeaf> {
    let prep = prepare(points, side, thickness);
    let mut layout = prep.layout();
    if model.unit(UnitKey { side, layout }).is_none() {
        // no dual coder trained for this side: code the near surface only
        layout = Layout::Single;
    }
    let key = UnitKey { side, layout };
    let unit = model.unit(key).ok_or(Error::MissingModelEntry {
        side: side as usize,
        layout: layout.name(),
    })?;
    let code = unit.encode(&prep.image(layout))?;
    let payload = LeafPayload {
        axis: prep.axis,
        mode: prep.mode,
        dummy_bit: prep.filled.dummy_bit(),
        dual: layout == Layout::Dual,
        indices: code.indices,
    };
    let values = round_depths(&code.reconstruction, side);
    let reconstruction = rebuild(&payload, &values, side);
    Ok(EncodedLeaf {
        bits: SIDE_INFO_BITS + unit.payload_bits(),
        payload,
        reconstruction,
        projectable: prep.projectable,
    })
}

pub fn decode_leaf(payload: &LeafPayload, side: u32, model: &GicModel) -> Result<Vec<LocalPoint>, StreamError> {
    let unit = model
        .unit(UnitKey { side, layout: payload.layout() })
        .ok_or_else(|| StreamError::InvalidField(format!("model has no coder for side {side}")))?;
    let img = unit.decode(&payload.indices)?;
    Ok(rebuild(payload, &round_depths(&img, side), side))
}
