//! Descriptor sets and their binary file format.
//!
//! ```text
//! "LPDS" | version u32 | role u8 | dimension u32 | count u32
//! per row: id length u32 | id (UTF-8) | timestamp f64 | x f64 | y f64 | has_z u8 | z f64
//!          | descriptor f32 × dimension
//! ```
//! All values little-endian.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use crate::cloud::Pose;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"LPDS";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Query,
    Database,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Query => "query",
            Role::Database => "database",
        }
    }
}

impl std::str::FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "query" => Ok(Role::Query),
            "database" => Ok(Role::Database),
            _ => Err(Error::Config(format!("unknown descriptor-set role '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorEntry {
    pub source_id: String,
    pub descriptor: Vec<f64>,
    pub pose: Pose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    role: Role,
    dim: usize,
    entries: Vec<DescriptorEntry>,
}

impl DescriptorSet {
    /// Checks uniform dimension, finite values and unique source ids.
    pub fn new(role: Role, entries: Vec<DescriptorEntry>) -> Result<Self> {
        let dim = entries.first().map_or(0, |e| e.descriptor.len());
        let mut seen = HashSet::new();
        for e in &entries {
            if e.descriptor.len() != dim {
                return Err(Error::Shape(format!(
                    "descriptor '{}' has dimension {}, expected {dim}",
                    e.source_id,
                    e.descriptor.len()
                )));
            }
            if e.descriptor.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("descriptor '{}' is not finite", e.source_id)));
            }
            if !seen.insert(e.source_id.as_str()) {
                return Err(Error::Data(format!("duplicate source id '{}'", e.source_id)));
            }
        }
        Ok(Self { role, dim, entries })
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[DescriptorEntry] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<DescriptorEntry> {
        self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(match self.role {
            Role::Query => 0,
            Role::Database => 1,
        });
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for e in &self.entries {
            out.extend_from_slice(&(e.source_id.len() as u32).to_le_bytes());
            out.extend_from_slice(e.source_id.as_bytes());
            for v in [e.pose.timestamp, e.pose.x, e.pose.y] {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out.push(e.pose.z.is_some() as u8);
            out.extend_from_slice(&e.pose.z.unwrap_or(0.0).to_le_bytes());
            for &v in &e.descriptor {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            let end = pos + n;
            if end > bytes.len() {
                return Err(Error::Format("descriptor file truncated".into()));
            }
            let s = &bytes[pos..end];
            pos = end;
            Ok(s)
        };
        if take(4)? != MAGIC {
            return Err(Error::Format("not a descriptor file (bad magic)".into()));
        }
        let u32_at = |b: &[u8]| u32::from_le_bytes([b[0], b[1], b[2], b[3]]);
        let f64_at = |b: &[u8]| f64::from_le_bytes(b.try_into().expect("8 bytes"));
        let version = u32_at(take(4)?);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported descriptor file version {version}")));
        }
        let role = match take(1)?[0] {
            0 => Role::Query,
            1 => Role::Database,
            r => return Err(Error::Format(format!("unknown role tag {r}"))),
        };
        let dim = u32_at(take(4)?) as usize;
        let count = u32_at(take(4)?) as usize;
        let mut entries = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            let id_len = u32_at(take(4)?) as usize;
            let id = std::str::from_utf8(take(id_len)?)
                .map_err(|_| Error::Format("source id is not UTF-8".into()))?
                .to_string();
            let t = f64_at(take(8)?);
            let x = f64_at(take(8)?);
            let y = f64_at(take(8)?);
            let has_z = take(1)?[0] != 0;
            let z = f64_at(take(8)?);
            let payload = take(dim * 4)?;
            let descriptor = payload
                .chunks_exact(4)
                .map(|w| f32::from_le_bytes([w[0], w[1], w[2], w[3]]) as f64)
                .collect();
            let pose = Pose::new(id.clone(), t, x, y, has_z.then_some(z))?;
            entries.push(DescriptorEntry {
                source_id: id,
                descriptor,
                pose,
            });
        }
        if pos != bytes.len() {
            return Err(Error::Format("trailing bytes after descriptor rows".into()));
        }
        let set = Self::new(role, entries)?;
        if set.dim != dim && !set.is_empty() {
            return Err(Error::Format("declared dimension disagrees with rows".into()));
        }
        Ok(Self { dim, ..set })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::decode(&fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}
