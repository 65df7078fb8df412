//! File plumbing shared by the modules: atomic writes, PGM/PPM images and
//! the named-tensor container used for checkpoints and feature dumps.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Argument(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = dir.join(tmp_name);
    let res = (|| -> Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)?;
        Ok(())
    })();
    if res.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    res
}

fn format_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Format { path: path.to_path_buf(), msg: msg.into() }
}

/// Little-endian cursor over a byte buffer.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: PathBuf,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8], path: &Path) -> Self {
        Self { buf, pos: 0, path: path.to_path_buf() }
    }

    pub(crate) fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(format_err(&self.path, "unexpected end of file"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn magic(&mut self, magic: &[u8; 4]) -> Result<()> {
        if self.bytes(4)? != magic {
            return Err(format_err(&self.path, "bad magic"));
        }
        Ok(())
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    pub(crate) fn f32s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.bytes(n.checked_mul(4).ok_or_else(|| format_err(&self.path, "size overflow"))?)?;
        Ok(raw.chunks_exact(4).map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap()))).collect())
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(format_err(&self.path, "trailing bytes"));
        }
        Ok(())
    }

    pub(crate) fn err(&self, msg: impl Into<String>) -> Error {
        format_err(&self.path, msg)
    }
}

pub(crate) fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_f32s(out: &mut Vec<u8>, vals: &[f64]) {
    for &v in vals {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

pub(crate) fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Argument(format!("{what} {v} exceeds u32")))
}

/// A named, shaped tensor. Stored as `f32` on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl NamedTensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Shape(format!("tensor shape {shape:?} holds {n} values, got {}", data.len())));
        }
        Ok(Self { name: name.into(), shape, data })
    }
}

const TENSOR_MAGIC: &[u8; 4] = b"SCTN";
const TENSOR_VERSION: u32 = 1;

/// Serializes tensors: magic, version, count, then per tensor
/// name length + UTF-8 name, rank, dims, `f32` payload.
pub fn encode_tensors(tensors: &[NamedTensor]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(TENSOR_MAGIC);
    put_u32(&mut out, TENSOR_VERSION);
    put_u32(&mut out, to_u32(tensors.len(), "tensor count")?);
    for t in tensors {
        put_u32(&mut out, to_u32(t.name.len(), "name length")?);
        out.extend_from_slice(t.name.as_bytes());
        put_u32(&mut out, to_u32(t.shape.len(), "rank")?);
        for &d in &t.shape {
            put_u32(&mut out, to_u32(d, "dimension")?);
        }
        if let Some(v) = t.data.iter().find(|v| v.is_finite() && !(**v as f32).is_finite()) {
            return Err(Error::Validation(format!("tensor {:?} holds {v:e}, outside the f32 range", t.name)));
        }
        put_f32s(&mut out, &t.data);
    }
    Ok(out)
}

pub fn decode_tensors(buf: &[u8], path: &Path) -> Result<Vec<NamedTensor>> {
    let mut r = Reader::new(buf, path);
    r.magic(TENSOR_MAGIC)?;
    let version = r.u32()?;
    if version != TENSOR_VERSION {
        return Err(r.err(format!("unsupported version {version}")));
    }
    let count = r.u32()? as usize;
    let mut out = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = String::from_utf8(r.bytes(len)?.to_vec()).map_err(|_| r.err("tensor name is not UTF-8"))?;
        let rank = r.u32()? as usize;
        let mut shape = Vec::with_capacity(rank.min(16));
        for _ in 0..rank {
            shape.push(r.u32()? as usize);
        }
        let n = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| r.err("size overflow"))?;
        let data = r.f32s(n)?;
        out.push(NamedTensor { name, shape, data });
    }
    r.finish()?;
    Ok(out)
}

pub fn write_tensors(path: &Path, tensors: &[NamedTensor]) -> Result<()> {
    write_atomic(path, &encode_tensors(tensors)?)
}

pub fn read_tensors(path: &Path) -> Result<Vec<NamedTensor>> {
    decode_tensors(&fs::read(path)?, path)
}

/// 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<u8>,
}

/// Binary PGM (P5, maxval 255).
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

fn header_tokens<'a>(buf: &'a [u8], count: usize, path: &Path) -> Result<(Vec<&'a str>, usize)> {
    let mut tokens = Vec::new();
    let mut i = 0;
    while tokens.len() < count {
        while i < buf.len() && buf[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < buf.len() && buf[i] == b'#' {
            while i < buf.len() && buf[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        while i < buf.len() && !buf[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err(format_err(path, "truncated header"));
        }
        tokens.push(std::str::from_utf8(&buf[start..i]).map_err(|_| format_err(path, "bad header"))?);
    }
    // exactly one whitespace byte separates header and raster
    Ok((tokens, i + 1))
}

pub fn decode_pgm(buf: &[u8], path: &Path) -> Result<GrayImage> {
    let (tok, start) = header_tokens(buf, 4, path)?;
    if tok[0] != "P5" {
        return Err(format_err(path, "expected binary PGM (P5)"));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| format_err(path, format!("bad header field {s:?}")));
    let (width, height, maxval) = (parse(tok[1])?, parse(tok[2])?, parse(tok[3])?);
    if maxval == 0 || maxval > 255 {
        return Err(format_err(path, "only 8-bit PGM is supported"));
    }
    let n = width * height;
    let pixels = buf.get(start..start + n).ok_or_else(|| format_err(path, "truncated raster"))?.to_vec();
    Ok(GrayImage { height, width, pixels })
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    decode_pgm(&fs::read(path)?, path)
}

pub fn write_pgm(path: &Path, img: &GrayImage) -> Result<()> {
    write_atomic(path, &encode_pgm(img))
}

/// Binary PPM (P6) from interleaved RGB bytes.
pub fn encode_ppm(height: usize, width: usize, rgb: &[u8]) -> Vec<u8> {
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(rgb);
    out
}
