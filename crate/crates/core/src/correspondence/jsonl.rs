//! One [`CorrespondenceSet`] per line:
//!
//! ```text
//! {"image": str, "h": int, "w": int, "pid": int, "cam": int, "clothes": int,
//!  "entries": [[row, col, vertex], ...],
//!  "cross_view": [[row, col, "image_id", row2, col2], ...]}
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Correspondence, CorrespondenceSet, CrossViewLink, Pixel};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    image: String,
    h: usize,
    w: usize,
    pid: i64,
    cam: i64,
    clothes: i64,
    entries: Vec<(usize, usize, usize)>,
    #[serde(default)]
    cross_view: Vec<(usize, usize, String, usize, usize)>,
}

impl From<&CorrespondenceSet> for Record {
    fn from(s: &CorrespondenceSet) -> Self {
        Record {
            image: s.image.clone(),
            h: s.height,
            w: s.width,
            pid: s.pid,
            cam: s.cam,
            clothes: s.clothes,
            entries: s.entries.iter().map(|e| (e.pixel.row, e.pixel.col, e.vertex)).collect(),
            cross_view: s
                .cross_view
                .iter()
                .map(|l| (l.local.row, l.local.col, l.partner_image.clone(), l.partner.row, l.partner.col))
                .collect(),
        }
    }
}

fn parse_line(text: &str, line: usize) -> Result<CorrespondenceSet> {
    let r: Record = serde_json::from_str(text).map_err(|e| Error::Schema { line, msg: e.to_string() })?;
    let set = CorrespondenceSet {
        image: r.image,
        height: r.h,
        width: r.w,
        pid: r.pid,
        cam: r.cam,
        clothes: r.clothes,
        entries: r
            .entries
            .into_iter()
            .map(|(row, col, vertex)| Correspondence { pixel: Pixel::new(row, col), vertex })
            .collect(),
        cross_view: r
            .cross_view
            .into_iter()
            .map(|(r1, c1, partner_image, r2, c2)| CrossViewLink {
                local: Pixel::new(r1, c1),
                partner_image,
                partner: Pixel::new(r2, c2),
            })
            .collect(),
    };
    set.validate(None).map_err(|e| Error::Schema { line, msg: e.to_string() })?;
    Ok(set)
}

/// Streams sets from a JSONL source one line at a time. Blank lines are
/// skipped.
pub struct CorrReader<R> {
    inner: R,
    line: usize,
    buf: String,
}

impl<R: BufRead> CorrReader<R> {
    pub fn new(inner: R) -> Self {
        Self { inner, line: 0, buf: String::new() }
    }
}

impl CorrReader<BufReader<File>> {
    pub fn open(path: &Path) -> Result<Self> {
        Ok(Self::new(BufReader::new(File::open(path)?)))
    }
}

impl<R: BufRead> Iterator for CorrReader<R> {
    type Item = Result<CorrespondenceSet>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            self.line += 1;
            match self.inner.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) if self.buf.trim().is_empty() => continue,
                Ok(_) => return Some(parse_line(self.buf.trim_end(), self.line)),
                Err(e) => return Some(Err(e.into())),
            }
        }
    }
}

pub fn read_corrs(path: &Path) -> Result<Vec<CorrespondenceSet>> {
    CorrReader::open(path)?.collect()
}

pub fn encode_corrs<'a>(sets: impl IntoIterator<Item = &'a CorrespondenceSet>) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for s in sets {
        serde_json::to_writer(&mut out, &Record::from(s))?;
        out.write_all(b"\n")?;
    }
    Ok(out)
}

pub fn write_corrs(path: &Path, sets: &[CorrespondenceSet]) -> Result<()> {
    crate::io::write_atomic(path, &encode_corrs(sets)?)
}
