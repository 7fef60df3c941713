//! Binary matrix container used for device and dictionary files.
//!
//! Layout:
//!
//! ```text
//! b"MONOLOC\0"                 8-byte magic
//! u64 little-endian            length of the JSON manifest in bytes
//! manifest                     UTF-8 JSON, see `Manifest`
//! payload                      f64 little-endian, matrices back to back, row-major
//! ```
//!
//! The manifest lists every matrix with its shape in payload order, so the
//! file can be read without knowing what produced it.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"MONOLOC\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub kind: String,
    pub meta: serde_json::Value,
    pub matrices: Vec<MatrixEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub kind: String,
    pub meta: serde_json::Value,
    pub matrices: Vec<(String, Array2<f64>)>,
}

impl Container {
    pub fn matrix(&self, name: &str) -> Result<&Array2<f64>> {
        self.matrices
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, m)| m)
            .ok_or_else(|| Error::Format(format!("missing matrix `{name}`")))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let manifest = Manifest {
            version: VERSION,
            kind: self.kind.clone(),
            meta: self.meta.clone(),
            matrices: self
                .matrices
                .iter()
                .map(|(name, m)| MatrixEntry {
                    name: name.clone(),
                    rows: m.nrows(),
                    cols: m.ncols(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&manifest)?;
        let payload_len: usize = self.matrices.iter().map(|(_, m)| m.len() * 8).sum();
        let mut out = Vec::with_capacity(16 + json.len() + payload_len);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, m) in &self.matrices {
            // `iter` walks in logical (row-major) order whatever the memory layout.
            for v in m.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self> {
        let mut magic = [0u8; 8];
        bytes
            .read_exact(&mut magic)
            .map_err(|_| Error::Format("truncated header".into()))?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let mut len = [0u8; 8];
        bytes
            .read_exact(&mut len)
            .map_err(|_| Error::Format("truncated header".into()))?;
        let len = u64::from_le_bytes(len) as usize;
        if bytes.len() < len {
            return Err(Error::Format("truncated manifest".into()));
        }
        let manifest: Manifest = serde_json::from_slice(&bytes[..len])?;
        if manifest.version != VERSION {
            return Err(Error::Format(format!(
                "unsupported container version {}",
                manifest.version
            )));
        }
        bytes = &bytes[len..];
        let expected: usize = manifest.matrices.iter().map(|e| e.rows * e.cols * 8).sum();
        if bytes.len() != expected {
            return Err(Error::Format(format!(
                "payload is {} bytes, manifest describes {expected}",
                bytes.len()
            )));
        }
        let mut matrices = Vec::with_capacity(manifest.matrices.len());
        for entry in manifest.matrices {
            let n = entry.rows * entry.cols;
            let data: Vec<f64> = bytes[..n * 8]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            bytes = &bytes[n * 8..];
            let m = Array2::from_shape_vec((entry.rows, entry.cols), data)
                .map_err(|e| Error::Format(e.to_string()))?;
            matrices.push((entry.name, m));
        }
        Ok(Self {
            kind: manifest.kind,
            meta: manifest.meta,
            matrices,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_bytes()?)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}
