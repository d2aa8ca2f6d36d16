//! Little-endian byte encoding for snapshot blobs.

use alloc::format;
use alloc::vec::Vec;

use crate::lsh::{FamilyKind, LshSpec};
use crate::{Result, SketchError};

pub(crate) struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new(magic: &[u8; 4], version: u32) -> Self {
        let mut e = Encoder { buf: Vec::new() };
        e.buf.extend_from_slice(magic);
        e.u32(version);
        e
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u128(&mut self, v: u128) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.u64(v.to_bits());
    }

    pub fn f32s(&mut self, v: &[f32]) {
        for x in v {
            self.buf.extend_from_slice(&x.to_bits().to_le_bytes());
        }
    }

    pub fn bytes(&mut self, v: &[u8]) {
        self.buf.extend_from_slice(v);
    }

    pub fn spec(&mut self, spec: &LshSpec) {
        match spec.kind {
            FamilyKind::Srp => self.u8(0),
            FamilyKind::PStable { width, range } => {
                self.u8(1);
                self.f64(width);
                self.u64(range.unwrap_or(0));
            }
        }
        self.u32(spec.concat);
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub(crate) struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    pub fn new(buf: &'a [u8], magic: &[u8; 4], version: u32) -> Result<Self> {
        let mut d = Decoder { buf, pos: 0 };
        let found = d.take(4)?;
        if found != magic {
            return Err(SketchError::Snapshot(format!(
                "bad magic {found:?}, expected {magic:?}"
            )));
        }
        let v = d.u32()?;
        if v != version {
            return Err(SketchError::Snapshot(format!(
                "unsupported version {v}, expected {version}"
            )));
        }
        Ok(d)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| SketchError::Snapshot(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn u128(&mut self) -> Result<u128> {
        Ok(u128::from_le_bytes(self.take(16)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }

    pub fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let len = n
            .checked_mul(4)
            .ok_or_else(|| SketchError::Snapshot(format!("vector length {n} overflows")))?;
        let raw = self.take(len)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_bits(u32::from_le_bytes(c.try_into().unwrap())))
            .collect())
    }

    pub fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().unwrap())
    }

    /// A length prefix, sanity-checked against the bytes that remain.
    pub fn len(&mut self, min_item_bytes: usize) -> Result<usize> {
        let n = self.u64()?;
        let remaining = (self.buf.len() - self.pos) as u64;
        if n.saturating_mul(min_item_bytes as u64) > remaining {
            return Err(SketchError::Snapshot(format!(
                "length {n} at byte {} exceeds the remaining {remaining} bytes",
                self.pos - 8
            )));
        }
        Ok(n as usize)
    }

    pub fn spec(&mut self) -> Result<LshSpec> {
        let kind = match self.u8()? {
            0 => FamilyKind::Srp,
            1 => {
                let width = self.f64()?;
                let range = self.u64()?;
                FamilyKind::PStable {
                    width,
                    range: (range != 0).then_some(range),
                }
            }
            t => return Err(SketchError::Snapshot(format!("unknown family tag {t}"))),
        };
        Ok(LshSpec {
            kind,
            concat: self.u32()?,
        })
    }

    pub fn finish(self) -> Result<()> {
        if self.pos == self.buf.len() {
            Ok(())
        } else {
            Err(SketchError::Snapshot(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )))
        }
    }
}
