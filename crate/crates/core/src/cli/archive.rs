//! Processed-cloud archive: every preprocessed scan of a run in one file.
//!
//! ```text
//! "LPAR" | version u32 | count u32
//! per entry: id length u32 | id (UTF-8) | frame u8 (0 cartesian, 1 spherical)
//!            | has_intensity u8 | points u32 | xyz f64 × 3n | intensity f64 × n
//! ```
//! All values little-endian. Entries are written in input order.

use std::fs;
use std::path::Path;

use crate::cloud::{Frame, PointCloud};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"LPAR";
const VERSION: u32 = 1;

pub fn encode(clouds: &[PointCloud]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(clouds.len() as u32).to_le_bytes());
    for c in clouds {
        out.extend_from_slice(&(c.source_id().len() as u32).to_le_bytes());
        out.extend_from_slice(c.source_id().as_bytes());
        out.push(match c.frame() {
            Frame::Cartesian => 0,
            Frame::Spherical => 1,
        });
        out.push(c.intensity().is_some() as u8);
        out.extend_from_slice(&(c.len() as u32).to_le_bytes());
        for p in c.points() {
            for v in p {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        if let Some(i) = c.intensity() {
            for v in i {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

/// Decodes an archive. Entries may be empty clouds; consumers decide whether that is an error.
pub fn decode(bytes: &[u8]) -> Result<Vec<PointCloud>> {
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8]> {
        let end = pos.checked_add(n).filter(|&e| e <= bytes.len());
        let end = end.ok_or_else(|| Error::Format("archive truncated".into()))?;
        let s = &bytes[pos..end];
        pos = end;
        Ok(s)
    };
    let u32_of = |b: &[u8]| u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize;
    let f64s = |b: &[u8]| -> Vec<f64> {
        b.chunks_exact(8)
            .map(|w| f64::from_le_bytes(w.try_into().expect("8 bytes")))
            .collect()
    };
    if take(4)? != MAGIC {
        return Err(Error::Format("not a cloud archive (bad magic)".into()));
    }
    let version = u32_of(take(4)?) as u32;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported archive version {version}")));
    }
    let count = u32_of(take(4)?);
    let mut clouds = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let id_len = u32_of(take(4)?);
        let id = std::str::from_utf8(take(id_len)?)
            .map_err(|_| Error::Format("source id is not UTF-8".into()))?
            .to_string();
        let frame = match take(1)?[0] {
            0 => Frame::Cartesian,
            1 => Frame::Spherical,
            f => return Err(Error::Format(format!("unknown frame tag {f}"))),
        };
        let has_intensity = take(1)?[0] != 0;
        let n = u32_of(take(4)?);
        let flat = f64s(take(n * 24)?);
        let points = flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        let intensity = if has_intensity { Some(f64s(take(n * 8)?)) } else { None };
        clouds.push(PointCloud::new(points, intensity, frame, id.clone()).map_err(|e| e.in_cloud(&id))?);
    }
    if pos != bytes.len() {
        return Err(Error::Format("trailing bytes after archive entries".into()));
    }
    Ok(clouds)
}

pub fn write(path: impl AsRef<Path>, clouds: &[PointCloud]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(clouds)).map_err(|e| Error::io(path, e))
}

pub fn read(path: impl AsRef<Path>) -> Result<Vec<PointCloud>> {
    let path = path.as_ref();
    decode(&fs::read(path).map_err(|e| Error::io(path, e))?)
}
