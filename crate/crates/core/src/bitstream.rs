//! Coded stream container.
//!
//! A byte-aligned little-endian header is followed by a bit-packed body
//! (MSB first): the coarse occupancy bitmap and octree flags, then one
//! payload per leaf in canonical order. The body is zero-padded to a byte.

use crate::bits::{BitReader, BitWriter};
use crate::error::StreamError;
use crate::gic::GicModel;
use crate::leaf::LeafPayload;
use crate::octree::{coarse_dims_for, parse_structure, VoxelKey};
use crate::pointcloud::MAX_BIT_DEPTH;

pub const MAGIC: &[u8; 4] = b"GPCG";
pub const VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamHeader {
    /// Precision of the coded geometry.
    pub bit_depth: u8,
    /// Precision the decoder restores (≥ `bit_depth` when the encoder
    /// voxelized down).
    pub source_bit_depth: u8,
    pub coarsest_side: u32,
    pub max_level: u8,
    pub coarse_dims: [u32; 3],
    pub model_hash: u64,
    /// log2 of the codebook size per grid level.
    pub codebook_log2: Vec<u8>,
    pub thickness: u8,
    /// λ multipliers ×1000, level 0 first.
    pub multipliers_milli: Vec<u16>,
    /// Body length in bits (structure + leaf payloads, padding excluded).
    pub payload_bit_count: u64,
}

impl StreamHeader {
    /// Header for coding a `bit_depth`-bit cloud with `model`.
    pub fn for_model(model: &GicModel, bit_depth: u8, source_bit_depth: u8) -> Self {
        let c = &model.config;
        Self {
            bit_depth,
            source_bit_depth,
            coarsest_side: c.coarsest_side,
            max_level: c.max_level,
            coarse_dims: coarse_dims_for(bit_depth, c.coarsest_side),
            model_hash: model.hash(),
            codebook_log2: c.codebook_sizes.iter().map(|s| s.trailing_zeros() as u8).collect(),
            thickness: c.thickness,
            multipliers_milli: c.multipliers.iter().map(|m| (m * 1000.0).round() as u16).collect(),
            payload_bit_count: 0,
        }
    }

    pub fn byte_len(&self) -> usize {
        4 + 1 + 4 + 6 + 8 + 1 + self.codebook_log2.len() + 1 + 2 * self.multipliers_milli.len() + 8
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.byte_len());
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(self.bit_depth);
        out.push(self.source_bit_depth);
        out.push(self.coarsest_side as u8);
        out.push(self.max_level);
        for d in self.coarse_dims {
            out.extend_from_slice(&(d as u16).to_le_bytes());
        }
        out.extend_from_slice(&self.model_hash.to_le_bytes());
        out.push(self.codebook_log2.len() as u8);
        out.extend_from_slice(&self.codebook_log2);
        out.push(self.thickness);
        for m in &self.multipliers_milli {
            out.extend_from_slice(&m.to_le_bytes());
        }
        out.extend_from_slice(&self.payload_bit_count.to_le_bytes());
        out
    }

    /// Parses and validates a header; returns it with its byte length.
    pub fn parse(bytes: &[u8]) -> Result<(Self, usize), StreamError> {
        let mut r = Cursor { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(StreamError::BadMagic);
        }
        let version = r.u8()?;
        if version != VERSION {
            return Err(StreamError::UnsupportedVersion(version));
        }
        let bit_depth = r.u8()?;
        let source_bit_depth = r.u8()?;
        let coarsest_side = r.u8()? as u32;
        let max_level = r.u8()?;
        let coarse_dims = [r.u16()? as u32, r.u16()? as u32, r.u16()? as u32];
        let model_hash = r.u64()?;
        let n = r.u8()? as usize;
        let codebook_log2 = r.take(n)?.to_vec();
        let thickness = r.u8()?;
        let mut multipliers_milli = Vec::with_capacity(max_level as usize + 1);
        for _ in 0..=max_level {
            multipliers_milli.push(r.u16()?);
        }
        let payload_bit_count = r.u64()?;
        let h = Self {
            bit_depth,
            source_bit_depth,
            coarsest_side,
            max_level,
            coarse_dims,
            model_hash,
            codebook_log2,
            thickness,
            multipliers_milli,
            payload_bit_count,
        };
        h.check()?;
        Ok((h, r.pos))
    }

    fn check(&self) -> Result<(), StreamError> {
        let bad = |what: &str| Err(StreamError::InvalidField(what.to_string()));
        if self.bit_depth == 0 || self.bit_depth > MAX_BIT_DEPTH {
            return bad("bit depth");
        }
        if self.source_bit_depth == 0 || self.source_bit_depth > MAX_BIT_DEPTH {
            return bad("source bit depth");
        }
        if !self.coarsest_side.is_power_of_two() || self.coarsest_side.checked_shr(self.max_level as u32).is_none_or(|leaf| leaf < 4) {
            return bad("octree geometry");
        }
        if self.coarse_dims != coarse_dims_for(self.bit_depth, self.coarsest_side) {
            return bad("coarse grid dimensions");
        }
        Ok(())
    }

    /// Confirms the stream was produced with `model`.
    pub fn check_model(&self, model: &GicModel) -> Result<(), StreamError> {
        if self.model_hash != model.hash() {
            return Err(StreamError::ModelMismatch {
                stream: self.model_hash,
                model: model.hash(),
            });
        }
        let expect = Self::for_model(model, self.bit_depth, self.source_bit_depth);
        if expect.coarsest_side != self.coarsest_side
            || expect.max_level != self.max_level
            || expect.codebook_log2 != self.codebook_log2
            || expect.thickness != self.thickness
            || expect.multipliers_milli != self.multipliers_milli
        {
            return Err(StreamError::InvalidField("configuration echo disagrees with model".into()));
        }
        Ok(())
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], StreamError> {
        let s = self
            .bytes
            .get(self.pos..self.pos + n)
            .ok_or(StreamError::Truncated("header"))?;
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, StreamError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, StreamError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, StreamError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeafRecord {
    pub key: VoxelKey,
    pub payload: LeafPayload,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedStream {
    pub header: StreamHeader,
    /// Leaves in canonical order.
    pub leaves: Vec<LeafRecord>,
}

impl ParsedStream {
    /// Header bits plus body bits: the rate of the stream.
    pub fn total_bits(&self) -> u64 {
        8 * self.header.byte_len() as u64 + self.header.payload_bit_count
    }
}

/// Serializes a stream. `header.payload_bit_count` is filled in here.
pub fn write_stream(header: &StreamHeader, structure: &BitWriter, leaves: &[LeafRecord], model: &GicModel) -> Vec<u8> {
    let mut body = BitWriter::new();
    body.append(structure);
    for l in leaves {
        l.payload.write(&mut body, model, l.key.side(header.coarsest_side));
    }
    let mut header = header.clone();
    header.payload_bit_count = body.bit_len();
    let mut out = header.to_bytes();
    out.extend_from_slice(body.as_bytes());
    out
}

pub fn read_stream(bytes: &[u8], model: &GicModel) -> Result<ParsedStream, StreamError> {
    let (header, start) = StreamHeader::parse(bytes)?;
    header.check_model(model)?;
    let body = &bytes[start..];
    let needed = header.payload_bit_count.div_ceil(8);
    if (body.len() as u64) < needed {
        return Err(StreamError::Truncated("body"));
    }
    if body.len() as u64 > needed {
        return Err(StreamError::InvalidField("trailing bytes".into()));
    }
    let pad = (needed * 8 - header.payload_bit_count) as u32;
    if pad > 0 && body[body.len() - 1] & ((1u8 << pad) - 1) != 0 {
        return Err(StreamError::InvalidField("non-zero padding".into()));
    }
    let mut r = BitReader::new(body, header.payload_bit_count);
    let keys = parse_structure(&mut r, header.coarse_dims, header.coarsest_side, header.max_level)?;
    let mut leaves = Vec::with_capacity(keys.len());
    for key in keys {
        let payload = LeafPayload::read(&mut r, model, key.side(header.coarsest_side))?;
        leaves.push(LeafRecord { key, payload });
    }
    if r.remaining() != 0 {
        return Err(StreamError::InvalidField("unused body bits".into()));
    }
    Ok(ParsedStream { header, leaves })
}
