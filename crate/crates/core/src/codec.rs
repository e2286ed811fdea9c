//! End-to-end encoder and decoder.

use rayon::prelude::*;

use crate::bitstream::{read_stream, write_stream, LeafRecord, ParsedStream, StreamHeader};
use crate::error::{Error, Result};
use crate::gic::GicModel;
use crate::leaf::decode_leaf;
use crate::octree::{coarse_dims_for, Octree};
use crate::pointcloud::{bits_for, PointCloud};
use crate::rdo::{apply, decide, evaluate_leaves, LeafEval, RdoPlan};

/// Rate accounting of one encode.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodeStats {
    pub lambda: f64,
    pub input_points: usize,
    pub header_bits: u64,
    /// Coarse occupancy bitmap.
    pub bitmap_bits: u64,
    /// Split flags, child masks and leaf payloads, as predicted by split
    /// selection.
    pub rdo_bits: u64,
    /// Bits of the emitted stream (header and body, padding excluded).
    pub stream_bits: u64,
    /// Leaves per octree level, level 0 first.
    pub leaves_per_level: Vec<usize>,
    /// Σ of the chosen leaves' local distortion.
    pub distortion_sum: f64,
}

impl EncodeStats {
    /// Predicted total bits.
    pub fn predicted_bits(&self) -> u64 {
        self.header_bits + self.bitmap_bits + self.rdo_bits
    }

    /// Bits per input point of the emitted stream; 0 for an empty input.
    pub fn bpp(&self) -> f64 {
        if self.input_points == 0 {
            0.0
        } else {
            self.stream_bits as f64 / self.input_points as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct Encoded {
    pub bytes: Vec<u8>,
    pub stats: EncodeStats,
}

/// An input prepared for coding: the octree with every candidate leaf
/// already coded. Encoding at several λ reuses this work.
pub struct PreparedInput<'m> {
    model: &'m GicModel,
    tree: Octree,
    evals: Vec<Option<LeafEval>>,
    header: StreamHeader,
    input_points: usize,
}

impl<'m> PreparedInput<'m> {
    pub fn new(cloud: &PointCloud, model: &'m GicModel) -> Result<Self> {
        let cfg = &model.config;
        let source = cloud.bit_depth();
        let work = if source > cfg.target_bits {
            cloud.voxelize(cfg.target_bits)
        } else {
            cloud.clone()
        };
        let side_bits = bits_for(cfg.coarsest_side - 1);
        let bit_depth = work.bit_depth().max(side_bits);
        let dims = coarse_dims_for(bit_depth, cfg.coarsest_side);
        if dims.iter().any(|&d| d > u16::MAX as u32) {
            return Err(Error::Config(format!(
                "{bit_depth}-bit geometry needs a coarsest side above {}",
                cfg.coarsest_side
            )));
        }
        let work = PointCloud::with_bit_depth(work.into_points(), bit_depth)?;
        let tree = Octree::build(&work, cfg.coarsest_side, cfg.max_level)?;
        let evals = evaluate_leaves(&tree, model, cfg.thickness)?;
        Ok(Self {
            model,
            tree,
            evals,
            header: StreamHeader::for_model(model, bit_depth, source.max(bit_depth)),
            input_points: cloud.len(),
        })
    }

    pub fn tree(&self) -> &Octree {
        &self.tree
    }

    pub fn plan(&self, lambda: f64) -> Result<RdoPlan> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Config(format!("lambda {lambda} must be finite and >= 0")));
        }
        decide(&self.tree, &self.evals, &self.model.config.multipliers, lambda)
    }

    /// Encoder-side reconstruction of the leaves chosen by `plan`, at the
    /// coded precision.
    pub fn reconstruction(&self, plan: &RdoPlan) -> Result<PointCloud> {
        let mut pts = Vec::new();
        for &id in &plan.leaves {
            let node = &self.tree.nodes[id];
            let eval = self.evals[id].as_ref().expect("chosen leaves are coded");
            pts.extend(eval.leaf.reconstruction.iter().map(|p| {
                let o = node.key.origin;
                [o[0] + p[0] as u32, o[1] + p[1] as u32, o[2] + p[2] as u32]
            }));
        }
        PointCloud::with_bit_depth(pts, self.header.bit_depth)
    }

    pub fn encode(&self, lambda: f64) -> Result<Encoded> {
        let plan = self.plan(lambda)?;
        let mut tree = self.tree.clone();
        apply(&mut tree, &plan);
        let structure = tree.structure_bits();
        let leaves: Vec<LeafRecord> = plan
            .leaves
            .iter()
            .map(|&id| LeafRecord {
                key: tree.nodes[id].key,
                payload: self.evals[id].as_ref().expect("chosen leaves are coded").leaf.payload.clone(),
            })
            .collect();
        let bytes = write_stream(&self.header, &structure, &leaves, self.model);
        let header_bits = 8 * self.header.byte_len() as u64;
        let [nx, ny, nz] = tree.coarse_dims;
        let mut leaves_per_level = vec![0; tree.max_level as usize + 1];
        for &id in &plan.leaves {
            leaves_per_level[tree.nodes[id].key.level as usize] += 1;
        }
        let (written, _) = StreamHeader::parse(&bytes)?;
        Ok(Encoded {
            stats: EncodeStats {
                lambda,
                input_points: self.input_points,
                header_bits,
                bitmap_bits: nx as u64 * ny as u64 * nz as u64,
                rdo_bits: plan.rate_bits,
                stream_bits: header_bits + written.payload_bit_count,
                leaves_per_level,
                distortion_sum: plan.distortion_sum,
            },
            bytes,
        })
    }
}

pub fn encode(cloud: &PointCloud, model: &GicModel, lambda: f64) -> Result<Encoded> {
    PreparedInput::new(cloud, model)?.encode(lambda)
}

fn rebuild(parsed: &ParsedStream, model: &GicModel, max_level: u8) -> Result<PointCloud> {
    let h = &parsed.header;
    let side = h.coarsest_side;
    let decoded: Vec<Vec<[u32; 3]>> = parsed
        .leaves
        .par_iter()
        .map(|leaf| {
            if leaf.key.level > max_level {
                let anc = leaf.key.ancestor(max_level, side);
                let half = anc.side(side) / 2;
                return Ok(vec![anc.origin.map(|c| c + half)]);
            }
            let local = decode_leaf(&leaf.payload, leaf.key.side(side), model)?;
            Ok(local
                .iter()
                .map(|p| std::array::from_fn(|a| leaf.key.origin[a] + p[a] as u32))
                .collect())
        })
        .collect::<Result<_, crate::error::StreamError>>()?;
    let cloud = PointCloud::with_bit_depth(decoded.into_iter().flatten().collect(), h.bit_depth)?;
    Ok(if h.source_bit_depth > h.bit_depth {
        cloud.voxelize(h.source_bit_depth)
    } else {
        cloud
    })
}

pub fn decode(bytes: &[u8], model: &GicModel) -> Result<PointCloud> {
    let parsed = read_stream(bytes, model)?;
    let deepest = parsed.header.max_level;
    rebuild(&parsed, model, deepest)
}

/// Decodes only leaves at octree levels `0..=level`; each deeper leaf is
/// replaced by the centre of its ancestor at `level`.
pub fn decode_progressive(bytes: &[u8], model: &GicModel, level: u8) -> Result<PointCloud> {
    let parsed = read_stream(bytes, model)?;
    rebuild(&parsed, model, level.min(parsed.header.max_level))
}
