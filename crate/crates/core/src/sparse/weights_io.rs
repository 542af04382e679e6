//! Self-describing weight container.
//!
//! Layout (all integers u32 little-endian, payloads f32 little-endian):
//!
//! ```text
//! "LPWT" | version | graph text length | graph text (UTF-8) | layer count
//! per layer: tag u8 (0 = none, 1 = conv, 2 = norm)
//!   conv: kernel volume | in | out | has_bias u8 | weights[kvol·out·in] | bias[out]?
//!   norm: channels | scale[channels] | shift[channels]
//! ```

use std::fs;
use std::path::Path;

use super::conv::ConvWeights;
use super::graph::{GraphWeights, LayerGraph, LayerWeights};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"LPWT";
pub const FORMAT_VERSION: u32 = 1;

pub fn encode(graph: &LayerGraph, weights: &GraphWeights) -> Result<Vec<u8>> {
    weights.check(graph)?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, FORMAT_VERSION);
    let text = graph.to_string();
    put_u32(&mut out, text.len() as u32);
    out.extend_from_slice(text.as_bytes());
    put_u32(&mut out, weights.layers.len() as u32);
    for w in &weights.layers {
        match w {
            None => out.push(0),
            Some(LayerWeights::Conv(c)) => {
                out.push(1);
                put_u32(&mut out, c.kernel_volume as u32);
                put_u32(&mut out, c.in_dim as u32);
                put_u32(&mut out, c.out_dim as u32);
                out.push(c.bias.is_some() as u8);
                put_f32s(&mut out, &c.weights);
                if let Some(b) = &c.bias {
                    put_f32s(&mut out, b);
                }
            }
            Some(LayerWeights::Norm { scale, shift }) => {
                out.push(2);
                put_u32(&mut out, scale.len() as u32);
                put_f32s(&mut out, scale);
                put_f32s(&mut out, shift);
            }
        }
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<(LayerGraph, GraphWeights)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Format("not a weight file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported weight file version {version}")));
    }
    let text_len = r.u32()? as usize;
    let text = std::str::from_utf8(r.take(text_len)?)
        .map_err(|_| Error::Format("graph description is not UTF-8".into()))?;
    let graph: LayerGraph = text
        .parse()
        .map_err(|e| Error::Format(format!("embedded graph: {e}")))?;
    let count = r.u32()? as usize;
    let mut layers = Vec::with_capacity(count);
    for _ in 0..count {
        layers.push(match r.u8()? {
            0 => None,
            1 => {
                let (kvol, in_dim, out_dim) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
                let has_bias = r.u8()? != 0;
                let weights = r.f32s(kvol * in_dim * out_dim)?;
                let bias = if has_bias { Some(r.f32s(out_dim)?) } else { None };
                Some(LayerWeights::Conv(ConvWeights::new(kvol, in_dim, out_dim, weights, bias)?))
            }
            2 => {
                let c = r.u32()? as usize;
                let scale = r.f32s(c)?;
                let shift = r.f32s(c)?;
                Some(LayerWeights::Norm { scale, shift })
            }
            t => return Err(Error::Format(format!("unknown layer tag {t}"))),
        });
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    let weights = GraphWeights { layers };
    weights.check(&graph)?;
    Ok((graph, weights))
}

pub fn write(path: impl AsRef<Path>, graph: &LayerGraph, weights: &GraphWeights) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(graph, weights)?).map_err(|e| Error::io(path, e))
}

pub fn read(path: impl AsRef<Path>) -> Result<(LayerGraph, GraphWeights)> {
    let path = path.as_ref();
    decode(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f32s(out: &mut Vec<u8>, values: &[f64]) {
    for &v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format("weight file truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f64>> {
        let b = self.take(n.checked_mul(4).ok_or_else(|| Error::Format("size overflow".into()))?)?;
        Ok(b.chunks_exact(4)
            .map(|w| f32::from_le_bytes([w[0], w[1], w[2], w[3]]) as f64)
            .collect())
    }
}
