//! Trained model container and its binary file format.
//!
//! Layout (little endian): `"GICM"`, version, configuration echo, entry
//! count, then per entry the key and per grid level the Saab kernels,
//! eigenvalues and codewords as `f64`. A trailing `u64` holds the first
//! eight bytes of the SHA-256 digest of everything before it; the same value
//! identifies the model inside coded streams.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

use super::{pyramid_dims, Codebook, Layout, LevelModel, SaabTransform, UnitKey, UnitModel, PATCH_DIM};
use crate::config::CodecConfig;
use crate::error::ModelError;

const MAGIC: &[u8; 4] = b"GICM";
const VERSION: u8 = 1;
const MAX_CODEBOOK: u32 = 1 << 16;

/// Codec settings a model was trained for.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub coarsest_side: u32,
    pub max_level: u8,
    pub min_side: u32,
    pub thickness: u8,
    pub target_bits: u8,
    pub multipliers: Vec<f64>,
    pub codebook_sizes: Vec<u32>,
    pub seed: u64,
}

impl ModelConfig {
    pub fn from_codec(c: &CodecConfig) -> Self {
        Self {
            coarsest_side: c.coarsest_side,
            max_level: c.max_level,
            min_side: c.min_side,
            thickness: c.thickness,
            target_bits: c.target_bits,
            multipliers: c.multipliers.clone(),
            codebook_sizes: c.codebook_sizes.clone(),
            seed: c.seed,
        }
    }

    /// Codec configuration with these settings and defaults elsewhere.
    pub fn to_codec(&self) -> CodecConfig {
        CodecConfig {
            coarsest_side: self.coarsest_side,
            max_level: self.max_level,
            min_side: self.min_side,
            thickness: self.thickness,
            target_bits: self.target_bits,
            multipliers: self.multipliers.clone(),
            codebook_sizes: self.codebook_sizes.clone(),
            seed: self.seed,
            ..CodecConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GicModel {
    pub config: ModelConfig,
    units: BTreeMap<UnitKey, UnitModel>,
    hash: u64,
}

fn digest(bytes: &[u8]) -> u64 {
    let d = Sha256::digest(bytes);
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

fn put_f64s(out: &mut Vec<u8>, v: &[f64]) {
    for x in v {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

impl GicModel {
    pub fn new(config: ModelConfig, units: BTreeMap<UnitKey, UnitModel>) -> Self {
        let mut m = Self { config, units, hash: 0 };
        let bytes = m.body_bytes();
        m.hash = digest(&bytes);
        m
    }

    pub fn unit(&self, key: UnitKey) -> Option<&UnitModel> {
        self.units.get(&key)
    }

    pub fn units(&self) -> impl Iterator<Item = &UnitModel> {
        self.units.values()
    }

    pub fn hash(&self) -> u64 {
        self.hash
    }

    /// Kernels, eigenvalues and codeword coordinates over all coders.
    pub fn parameter_count(&self) -> usize {
        self.units.values().map(|u| u.parameter_count()).sum()
    }

    fn body_bytes(&self) -> Vec<u8> {
        let c = &self.config;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&(c.coarsest_side as u16).to_le_bytes());
        out.push(c.max_level);
        out.extend_from_slice(&(c.min_side as u16).to_le_bytes());
        out.push(c.thickness);
        out.push(c.target_bits);
        out.extend_from_slice(&c.seed.to_le_bytes());
        out.push(c.multipliers.len() as u8);
        put_f64s(&mut out, &c.multipliers);
        out.push(c.codebook_sizes.len() as u8);
        for s in &c.codebook_sizes {
            out.extend_from_slice(&s.to_le_bytes());
        }
        out.extend_from_slice(&(self.units.len() as u16).to_le_bytes());
        for (key, unit) in &self.units {
            out.extend_from_slice(&(key.side as u16).to_le_bytes());
            out.push(key.layout as u8);
            out.push(unit.levels.len() as u8);
            for l in &unit.levels {
                out.extend_from_slice(&(l.rows as u16).to_le_bytes());
                out.extend_from_slice(&(l.cols as u16).to_le_bytes());
                out.extend_from_slice(&(l.saab.dim() as u16).to_le_bytes());
                put_f64s(&mut out, l.saab.kernels());
                put_f64s(&mut out, l.saab.eigenvalues());
                out.extend_from_slice(&(l.codebook.size() as u32).to_le_bytes());
                put_f64s(&mut out, l.codebook.codewords());
            }
        }
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.body_bytes();
        out.extend_from_slice(&self.hash.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        if bytes.len() < 5 {
            return Err(ModelError::Truncated);
        }
        if &bytes[..4] != MAGIC {
            return Err(ModelError::BadMagic);
        }
        if bytes[4] != VERSION {
            return Err(ModelError::UnsupportedVersion(bytes[4]));
        }
        if bytes.len() < 13 {
            return Err(ModelError::Truncated);
        }
        let (body, tail) = bytes.split_at(bytes.len() - 8);
        let stored = u64::from_le_bytes(tail.try_into().unwrap());
        if digest(body) != stored {
            return Err(ModelError::ChecksumMismatch);
        }
        let mut r = Cursor { bytes: body, pos: 5 };
        let coarsest_side = r.u16()? as u32;
        let max_level = r.u8()?;
        let min_side = r.u16()? as u32;
        let thickness = r.u8()?;
        let target_bits = r.u8()?;
        let seed = r.u64()?;
        let n_mult = r.u8()? as usize;
        let multipliers = r.f64s(n_mult)?;
        let n_sizes = r.u8()? as usize;
        let mut codebook_sizes = Vec::with_capacity(n_sizes);
        for _ in 0..n_sizes {
            codebook_sizes.push(r.u32()?);
        }
        let config = ModelConfig {
            coarsest_side,
            max_level,
            min_side,
            thickness,
            target_bits,
            multipliers,
            codebook_sizes,
            seed,
        };
        config
            .to_codec()
            .validate()
            .map_err(|e| ModelError::InvalidField(e.to_string()))?;
        let n_units = r.u16()? as usize;
        let mut units = BTreeMap::new();
        for _ in 0..n_units {
            let side = r.u16()? as u32;
            let layout = match r.u8()? {
                0 => Layout::Single,
                1 => Layout::Dual,
                v => return Err(ModelError::InvalidField(format!("layout {v}"))),
            };
            if !side.is_power_of_two() || side < 4 || side > coarsest_side {
                return Err(ModelError::InvalidField(format!("leaf side {side}")));
            }
            let key = UnitKey { side, layout };
            let dims = pyramid_dims(key);
            let n_levels = r.u8()? as usize;
            if n_levels != dims.len() {
                return Err(ModelError::InvalidField(format!("{key}: {n_levels} grid levels")));
            }
            let mut levels = Vec::with_capacity(n_levels);
            for &(rows, cols) in &dims {
                let (lr, lc, dim) = (r.u16()? as usize, r.u16()? as usize, r.u16()? as usize);
                if (lr, lc) != (rows, cols) || dim != PATCH_DIM {
                    return Err(ModelError::InvalidField(format!("{key}: grid {lr}x{lc} dim {dim}")));
                }
                let kernels = r.f64s(dim * dim)?;
                let eigenvalues = r.f64s(dim)?;
                let size = r.u32()?;
                if size == 0 || !size.is_power_of_two() || size > MAX_CODEBOOK {
                    return Err(ModelError::InvalidField(format!("codebook size {size}")));
                }
                let codewords = r.f64s(size as usize * dim)?;
                levels.push(LevelModel {
                    rows,
                    cols,
                    saab: SaabTransform::from_parts(dim, kernels, eigenvalues),
                    codebook: Codebook::new(dim, codewords),
                });
            }
            if units.insert(key, UnitModel { key, levels }).is_some() {
                return Err(ModelError::InvalidField(format!("duplicate entry {key}")));
            }
        }
        if r.pos != body.len() {
            return Err(ModelError::InvalidField("trailing bytes".into()));
        }
        Ok(Self {
            config,
            units,
            hash: stored,
        })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        let end = self.pos.checked_add(n).ok_or(ModelError::Truncated)?;
        let s = self.bytes.get(self.pos..end).ok_or(ModelError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, ModelError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, ModelError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, ModelError> {
        let raw = self.take(n.checked_mul(8).ok_or(ModelError::Truncated)?)?;
        let v: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if v.iter().any(|x| !x.is_finite()) {
            return Err(ModelError::InvalidField("non-finite parameter".into()));
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_model() -> GicModel {
        let key = UnitKey { side: 8, layout: Layout::Dual };
        let levels = pyramid_dims(key)
            .into_iter()
            .enumerate()
            .map(|(l, (rows, cols))| LevelModel {
                rows,
                cols,
                saab: SaabTransform::identity(PATCH_DIM),
                codebook: Codebook::new(PATCH_DIM, (0..PATCH_DIM * 2).map(|i| (i + l) as f64).collect()),
            })
            .collect();
        let mut units = BTreeMap::new();
        units.insert(key, UnitModel { key, levels });
        let cfg = CodecConfig {
            coarsest_side: 16,
            max_level: 1,
            multipliers: vec![2.0, 1.0],
            ..CodecConfig::default()
        };
        GicModel::new(ModelConfig::from_codec(&cfg), units)
    }

    #[test]
    fn bytes_round_trip() {
        let m = tiny_model();
        let bytes = m.to_bytes();
        let back = GicModel::from_bytes(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.hash(), m.hash());
        assert_eq!(m.parameter_count(), 2 * (256 + 32));
    }

    #[test]
    fn hash_tracks_content() {
        let a = tiny_model();
        let mut cfg = a.config.clone();
        cfg.seed = 2;
        let b = GicModel::new(cfg, a.units.clone());
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn rejects_corruption() {
        let bytes = tiny_model().to_bytes();
        assert_eq!(GicModel::from_bytes(b"GIC"), Err(ModelError::Truncated));
        assert_eq!(GicModel::from_bytes(b"XXXX\x01abcdefgh"), Err(ModelError::BadMagic));
        let mut v = bytes.clone();
        v[4] = 9;
        assert_eq!(GicModel::from_bytes(&v), Err(ModelError::UnsupportedVersion(9)));
        let mut v = bytes.clone();
        v[40] ^= 1;
        assert_eq!(GicModel::from_bytes(&v), Err(ModelError::ChecksumMismatch));
        for cut in [6, 20, bytes.len() / 2, bytes.len() - 1] {
            assert!(GicModel::from_bytes(&bytes[..cut]).is_err());
        }
    }
}
