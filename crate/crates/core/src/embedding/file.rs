//! Field files, little-endian: magic `SCEF`, version, `H`, `W`, `D` (`u32`),
//! `H*W*D` `f32` values, then the mask as `ceil(H*W/8)` bytes, pixel `i` in
//! bit `i % 8` of byte `i / 8`.

use std::path::Path;

use super::EmbeddingField;
use crate::correspondence::Mask;
use crate::error::Result;
use crate::io::{self, Reader};

const MAGIC: &[u8; 4] = b"SCEF";
const VERSION: u32 = 1;

pub fn encode_field(field: &EmbeddingField) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(20 + field.data().len() * 4 + field.mask().data.len() / 8 + 1);
    out.extend_from_slice(MAGIC);
    io::put_u32(&mut out, VERSION);
    io::put_u32(&mut out, io::to_u32(field.height(), "height")?);
    io::put_u32(&mut out, io::to_u32(field.width(), "width")?);
    io::put_u32(&mut out, io::to_u32(field.dim(), "dim")?);
    io::put_f32s(&mut out, field.data());
    let mut bits = vec![0u8; field.mask().data.len().div_ceil(8)];
    for (i, &b) in field.mask().data.iter().enumerate() {
        if b {
            bits[i / 8] |= 1 << (i % 8);
        }
    }
    out.extend_from_slice(&bits);
    Ok(out)
}

pub fn decode_field(buf: &[u8], path: &Path) -> Result<EmbeddingField> {
    let mut r = Reader::new(buf, path);
    r.magic(MAGIC)?;
    let version = r.u32()?;
    if version != VERSION {
        return Err(r.err(format!("unsupported field version {version}")));
    }
    let (h, w, d) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
    let n = h.checked_mul(w).and_then(|x| x.checked_mul(d)).ok_or_else(|| r.err("size overflow"))?;
    let data = r.f32s(n)?;
    let bits = r.bytes((h * w).div_ceil(8))?;
    r.finish()?;
    let mask = Mask::new(h, w, (0..h * w).map(|i| bits[i / 8] >> (i % 8) & 1 == 1).collect())?;
    EmbeddingField::new(d, data, mask)
}

pub fn write_field(path: &Path, field: &EmbeddingField) -> Result<()> {
    io::write_atomic(path, &encode_field(field)?)
}

pub fn read_field(path: &Path) -> Result<EmbeddingField> {
    decode_field(&std::fs::read(path)?, path)
}
