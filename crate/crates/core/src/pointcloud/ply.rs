//! PLY reading and writing (ASCII and binary little-endian).
//!
//! Only vertex positions are kept. Other elements and properties are parsed
//! and skipped so files carrying faces or colours still load.

use std::fmt::Write as _;

use super::{Point, PointCloud, MAX_BIT_DEPTH};
use crate::error::PlyError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(token: &str) -> Option<Self> {
        Some(match token {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

struct Header {
    format: PlyFormat,
    elements: Vec<Element>,
    declared_bits: Option<u8>,
    body_offset: usize,
}

fn malformed(offset: usize, reason: impl Into<String>) -> PlyError {
    PlyError::MalformedHeader {
        offset,
        reason: reason.into(),
    }
}

fn parse_header(bytes: &[u8]) -> Result<Header, PlyError> {
    let mut offset = 0usize;
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    let mut declared_bits = None;
    let mut first = true;
    loop {
        let rest = &bytes[offset..];
        let Some(nl) = rest.iter().position(|&b| b == b'\n') else {
            return Err(malformed(offset, "missing end_header"));
        };
        let line = std::str::from_utf8(&rest[..nl])
            .map_err(|_| malformed(offset, "header is not UTF-8"))?
            .trim_end_matches('\r');
        let line_offset = offset;
        offset += nl + 1;
        let mut tokens = line.split_whitespace();
        let keyword = tokens.next().unwrap_or("");
        if first {
            if line.trim() != "ply" {
                return Err(malformed(line_offset, "missing `ply` magic"));
            }
            first = false;
            continue;
        }
        match keyword {
            "format" => {
                let token = tokens.next().unwrap_or("");
                format = Some(match token {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::Binary,
                    _ => {
                        return Err(PlyError::UnsupportedFormat {
                            offset: line_offset,
                            token: token.to_string(),
                        })
                    }
                });
            }
            "comment" => {
                if tokens.next() == Some("bit_depth") {
                    if let Some(b) = tokens.next().and_then(|t| t.parse::<u8>().ok()) {
                        if (1..=MAX_BIT_DEPTH).contains(&b) {
                            declared_bits = Some(b);
                        }
                    }
                }
            }
            "obj_info" | "" => {}
            "element" => {
                let name = tokens
                    .next()
                    .ok_or_else(|| malformed(line_offset, "element without name"))?;
                let count = tokens
                    .next()
                    .and_then(|t| t.parse::<usize>().ok())
                    .ok_or_else(|| malformed(line_offset, "element count is not an integer"))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            "property" => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| malformed(line_offset, "property before element"))?;
                let ty = tokens.next().unwrap_or("");
                let prop = if ty == "list" {
                    let count = tokens.next().and_then(Scalar::parse);
                    let item = tokens.next().and_then(Scalar::parse);
                    match (count, item, tokens.next()) {
                        (Some(count), Some(item), Some(_)) => Property::List { count, item },
                        _ => return Err(malformed(line_offset, "bad list property")),
                    }
                } else {
                    let ty = Scalar::parse(ty)
                        .ok_or_else(|| malformed(line_offset, format!("unknown type `{ty}`")))?;
                    let name = tokens
                        .next()
                        .ok_or_else(|| malformed(line_offset, "property without name"))?;
                    Property::Scalar {
                        name: name.to_string(),
                        ty,
                    }
                };
                element.properties.push(prop);
            }
            "end_header" => break,
            other => return Err(malformed(line_offset, format!("unknown keyword `{other}`"))),
        }
    }
    let format = format.ok_or_else(|| malformed(0, "missing format line"))?;
    Ok(Header {
        format,
        elements,
        declared_bits,
        body_offset: offset,
    })
}

fn xyz_slots(el: &Element) -> Option<[usize; 3]> {
    let find = |axis: &str| {
        el.properties
            .iter()
            .position(|p| matches!(p, Property::Scalar { name, .. } if name == axis))
    };
    Some([find("x")?, find("y")?, find("z")?])
}

fn to_coordinate(v: f64, offset: usize) -> Result<u32, PlyError> {
    let r = v.round_ties_even();
    if !r.is_finite() || r < 0.0 || r > ((1u64 << MAX_BIT_DEPTH) - 1) as f64 {
        return Err(PlyError::InvalidValue {
            offset,
            reason: format!("coordinate {v} outside [0, 2^{MAX_BIT_DEPTH})"),
        });
    }
    Ok(r as u32)
}

struct AsciiTokens<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> AsciiTokens<'a> {
    fn next(&mut self) -> Result<(usize, &'a str), PlyError> {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if self.pos >= self.bytes.len() {
            return Err(PlyError::Truncated { offset: self.pos });
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let s = std::str::from_utf8(&self.bytes[start..self.pos]).map_err(|_| {
            PlyError::InvalidValue {
                offset: start,
                reason: "non-UTF-8 token".into(),
            }
        })?;
        Ok((start, s))
    }

    fn number(&mut self) -> Result<(usize, f64), PlyError> {
        let (off, tok) = self.next()?;
        tok.parse::<f64>()
            .map(|v| (off, v))
            .map_err(|_| PlyError::InvalidValue {
                offset: off,
                reason: format!("`{tok}` is not a number"),
            })
    }
}

struct BinaryCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl BinaryCursor<'_> {
    fn read(&mut self, ty: Scalar) -> Result<(usize, f64), PlyError> {
        let n = ty.size();
        if self.pos + n > self.bytes.len() {
            return Err(PlyError::Truncated { offset: self.pos });
        }
        let off = self.pos;
        let v = ty.read_le(&self.bytes[off..off + n]);
        self.pos += n;
        Ok((off, v))
    }
}

/// Parses a PLY file into a deduplicated integer cloud.
pub fn read_ply(bytes: &[u8]) -> Result<PointCloud, PlyError> {
    let header = parse_header(bytes)?;
    let mut points: Vec<Point> = Vec::new();
    let body = header.body_offset;
    let mut ascii = AsciiTokens { bytes, pos: body };
    let mut binary = BinaryCursor { bytes, pos: body };
    for el in &header.elements {
        let slots = if el.name == "vertex" {
            Some(xyz_slots(el).ok_or_else(|| malformed(0, "vertex element lacks x/y/z"))?)
        } else {
            None
        };
        for _ in 0..el.count {
            let mut xyz = [0u32; 3];
            for (pi, prop) in el.properties.iter().enumerate() {
                match prop {
                    Property::Scalar { ty, .. } => {
                        let (off, v) = match header.format {
                            PlyFormat::Ascii => ascii.number()?,
                            PlyFormat::Binary => binary.read(*ty)?,
                        };
                        if let Some(slots) = slots {
                            if let Some(axis) = slots.iter().position(|&s| s == pi) {
                                xyz[axis] = to_coordinate(v, off)?;
                            }
                        }
                    }
                    Property::List { count, item } => {
                        let (off, n) = match header.format {
                            PlyFormat::Ascii => ascii.number()?,
                            PlyFormat::Binary => binary.read(*count)?,
                        };
                        if !(n >= 0.0 && n.fract() == 0.0) {
                            return Err(PlyError::InvalidValue {
                                offset: off,
                                reason: "bad list length".into(),
                            });
                        }
                        for _ in 0..n as usize {
                            match header.format {
                                PlyFormat::Ascii => {
                                    ascii.next()?;
                                }
                                PlyFormat::Binary => {
                                    binary.read(*item)?;
                                }
                            }
                        }
                    }
                }
            }
            if slots.is_some() {
                points.push(xyz);
            }
        }
    }
    let mut pc = PointCloud::new(points);
    if let Some(bits) = header.declared_bits {
        if bits > pc.bit_depth {
            pc.bit_depth = bits;
        }
    }
    Ok(pc)
}

/// Serializes a cloud as PLY with `int` coordinates. The bit depth is kept in
/// a `comment bit_depth` line so a read restores the same cloud.
pub fn write_ply(pc: &PointCloud, format: PlyFormat) -> Vec<u8> {
    let mut header = String::new();
    header.push_str("ply\n");
    header.push_str(match format {
        PlyFormat::Ascii => "format ascii 1.0\n",
        PlyFormat::Binary => "format binary_little_endian 1.0\n",
    });
    let _ = writeln!(header, "comment bit_depth {}", pc.bit_depth());
    let _ = writeln!(header, "element vertex {}", pc.len());
    header.push_str("property int x\nproperty int y\nproperty int z\nend_header\n");
    let mut out = header.into_bytes();
    match format {
        PlyFormat::Ascii => {
            let mut body = String::with_capacity(pc.len() * 12);
            for p in pc.points() {
                let _ = writeln!(body, "{} {} {}", p[0], p[1], p[2]);
            }
            out.extend_from_slice(body.as_bytes());
        }
        PlyFormat::Binary => {
            out.reserve(pc.len() * 12);
            for p in pc.points() {
                for c in p {
                    out.extend_from_slice(&(*c as i32).to_le_bytes());
                }
            }
        }
    }
    out
}
