//! MSB-first bit packing.

use crate::error::StreamError;

#[derive(Debug, Default, Clone)]
pub struct BitWriter {
    bytes: Vec<u8>,
    len: u64,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn write_bit(&mut self, bit: bool) {
        let used = (self.len % 8) as u32;
        if used == 0 {
            self.bytes.push(0);
        }
        if bit {
            *self.bytes.last_mut().unwrap() |= 0x80 >> used;
        }
        self.len += 1;
    }

    /// Writes the low `width` bits of `value`, most significant first.
    pub fn write_bits(&mut self, value: u64, width: u32) {
        debug_assert!(width <= 64);
        debug_assert!(width == 64 || value >> width == 0);
        for i in (0..width).rev() {
            self.write_bit((value >> i) & 1 == 1);
        }
    }

    pub fn append(&mut self, other: &BitWriter) {
        let mut r = BitReader::new(&other.bytes, other.len);
        while let Ok(b) = r.read_bit() {
            self.write_bit(b);
        }
    }

    pub fn bit_len(&self) -> u64 {
        self.len
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }
}

#[derive(Debug, Clone)]
pub struct BitReader<'a> {
    bytes: &'a [u8],
    len: u64,
    pos: u64,
}

impl<'a> BitReader<'a> {
    /// Reads at most `len` bits from `bytes`.
    pub fn new(bytes: &'a [u8], len: u64) -> Self {
        let len = len.min(bytes.len() as u64 * 8);
        Self { bytes, len, pos: 0 }
    }

    pub fn read_bit(&mut self) -> Result<bool, StreamError> {
        if self.pos >= self.len {
            return Err(StreamError::Truncated("bit exhaustion"));
        }
        let byte = self.bytes[(self.pos / 8) as usize];
        let bit = byte & (0x80 >> (self.pos % 8)) != 0;
        self.pos += 1;
        Ok(bit)
    }

    pub fn read_bits(&mut self, width: u32) -> Result<u64, StreamError> {
        if self.remaining() < width as u64 {
            return Err(StreamError::Truncated("bit exhaustion"));
        }
        let mut v = 0u64;
        for _ in 0..width {
            v = (v << 1) | self.read_bit()? as u64;
        }
        Ok(v)
    }

    pub fn position(&self) -> u64 {
        self.pos
    }

    pub fn remaining(&self) -> u64 {
        self.len - self.pos
    }
}
