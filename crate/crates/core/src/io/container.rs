//! Versioned single-file tensor container.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic   8 bytes  b"CSYNTEN\0"
//! version u32
//! meta_len u64, then meta_len bytes of UTF-8 JSON (caller-defined metadata)
//! tensor count u64
//! per tensor: name_len u64, name bytes, ndim u64, dims u64*,
//!             data_len u64, data f64 little-endian
//! ```
//!
//! Tensor data is stored as `f64` regardless of the in-memory scalar so that
//! both `f32` and `f64` models round-trip losslessly.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use ndarray::{ArrayD, IxDyn};
use std::fs;
use std::io::Write;
use std::path::Path;

const MAGIC: &[u8; 8] = b"CSYNTEN\0";
pub const CONTAINER_VERSION: u32 = 1;

pub struct Container {
    pub version: u32,
    pub meta_json: String,
    pub tensors: Vec<(String, ArrayD<f64>)>,
}

impl Container {
    pub fn new(meta_json: String) -> Self {
        Container {
            version: CONTAINER_VERSION,
            meta_json,
            tensors: Vec::new(),
        }
    }

    pub fn push<F: Scalar>(&mut self, name: &str, tensor: &ArrayD<F>) {
        let data = tensor.mapv(|v| v.as_f64());
        self.tensors.push((name.to_string(), data));
    }

    pub fn get(&self, name: &str) -> Option<&ArrayD<f64>> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    /// Serialize to bytes. Deterministic for identical contents.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        let meta = self.meta_json.as_bytes();
        out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
        out.extend_from_slice(meta);
        out.extend_from_slice(&(self.tensors.len() as u64).to_le_bytes());
        for (name, tensor) in &self.tensors {
            let name_bytes = name.as_bytes();
            out.extend_from_slice(&(name_bytes.len() as u64).to_le_bytes());
            out.extend_from_slice(name_bytes);
            let shape = tensor.shape();
            out.extend_from_slice(&(shape.len() as u64).to_le_bytes());
            for &d in shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            out.extend_from_slice(&(tensor.len() as u64).to_le_bytes());
            // standard layout guaranteed by mapv in push
            for &v in tensor.as_slice().expect("contiguous tensor") {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cursor = Cursor { bytes, pos: 0 };
        let magic = cursor.take(8)?;
        if magic != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = u32::from_le_bytes(cursor.take(4)?.try_into().unwrap());
        if version != CONTAINER_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported container version {version}"
            )));
        }
        let meta_len = cursor.take_u64()? as usize;
        let meta_json = String::from_utf8(cursor.take(meta_len)?.to_vec())
            .map_err(|_| Error::Checkpoint("metadata is not utf-8".into()))?;
        let count = cursor.take_u64()? as usize;
        let mut tensors = Vec::with_capacity(count);
        for _ in 0..count {
            let name_len = cursor.take_u64()? as usize;
            let name = String::from_utf8(cursor.take(name_len)?.to_vec())
                .map_err(|_| Error::Checkpoint("tensor name is not utf-8".into()))?;
            let ndim = cursor.take_u64()? as usize;
            let mut dims = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                dims.push(cursor.take_u64()? as usize);
            }
            let len = cursor.take_u64()? as usize;
            if dims.iter().product::<usize>() != len {
                return Err(Error::Checkpoint(format!(
                    "tensor `{name}`: shape/length mismatch"
                )));
            }
            let raw = cursor.take(len * 8)?;
            let mut data = Vec::with_capacity(len);
            for chunk in raw.chunks_exact(8) {
                data.push(f64::from_le_bytes(chunk.try_into().unwrap()));
            }
            let arr = ArrayD::from_shape_vec(IxDyn(&dims), data)
                .map_err(|e| Error::Checkpoint(format!("tensor `{name}`: {e}")))?;
            tensors.push((name, arr));
        }
        Ok(Container {
            version,
            meta_json,
            tensors,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(&self.to_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Checkpoint("truncated container".into()));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn take_u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
