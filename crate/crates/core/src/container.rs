//! Binary matrix container ("DHMX"): the on-disk format for adjacency
//! archives, exported embedding matrices and model checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    b"DHMX"
//! version  u16
//! count    u32            number of entries
//! entry*:  name_len u16, name bytes (UTF-8, may be empty for single-matrix
//!          files), dtype u8 (0 = f32, 1 = f64), ndim u8, dims u32 × ndim,
//!          payload (row-major, dtype-sized)
//! ```

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{ArrayD, IxDyn};
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"DHMX";
pub const VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("format error: {0}")]
    Format(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("duplicate entry name {0:?}")]
    DuplicateName(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    fn code(self) -> u8 {
        match self {
            Dtype::F32 => 0,
            Dtype::F64 => 1,
        }
    }

    fn from_code(c: u8) -> Result<Self, ContainerError> {
        match c {
            0 => Ok(Dtype::F32),
            1 => Ok(Dtype::F64),
            other => Err(ContainerError::Format(format!("unknown dtype {other}"))),
        }
    }
}

/// One named tensor payload.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    F32(ArrayD<f32>),
    F64(ArrayD<f64>),
}

impl Payload {
    pub fn dtype(&self) -> Dtype {
        match self {
            Payload::F32(_) => Dtype::F32,
            Payload::F64(_) => Dtype::F64,
        }
    }

    pub fn shape(&self) -> &[usize] {
        match self {
            Payload::F32(a) => a.shape(),
            Payload::F64(a) => a.shape(),
        }
    }

    pub fn as_f32(&self) -> Option<&ArrayD<f32>> {
        match self {
            Payload::F32(a) => Some(a),
            Payload::F64(_) => None,
        }
    }

    pub fn as_f64(&self) -> Option<&ArrayD<f64>> {
        match self {
            Payload::F64(a) => Some(a),
            Payload::F32(_) => None,
        }
    }
}

/// In-memory container: ordered list of (name, payload).
#[derive(Debug, Default, Clone)]
pub struct MatrixContainer {
    entries: Vec<(String, Payload)>,
}

impl MatrixContainer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(payload: Payload) -> Self {
        MatrixContainer {
            entries: vec![(String::new(), payload)],
        }
    }

    pub fn push(&mut self, name: impl Into<String>, payload: Payload) -> Result<(), ContainerError> {
        let name = name.into();
        if self.entries.iter().any(|(n, _)| *n == name) {
            return Err(ContainerError::DuplicateName(name));
        }
        self.entries.push((name, payload));
        Ok(())
    }

    pub fn entries(&self) -> &[(String, Payload)] {
        &self.entries
    }

    pub fn get(&self, name: &str) -> Option<&Payload> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, p)| p)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<(), ContainerError> {
        w.write_all(&MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.entries.len() as u32).to_le_bytes())?;
        for (name, payload) in &self.entries {
            let name_bytes = name.as_bytes();
            w.write_all(&(name_bytes.len() as u16).to_le_bytes())?;
            w.write_all(name_bytes)?;
            w.write_all(&[payload.dtype().code()])?;
            let shape = payload.shape();
            w.write_all(&[shape.len() as u8])?;
            for &d in shape {
                w.write_all(&(d as u32).to_le_bytes())?;
            }
            match payload {
                Payload::F32(a) => {
                    for v in a.iter() {
                        w.write_all(&v.to_le_bytes())?;
                    }
                }
                Payload::F64(a) => {
                    for v in a.iter() {
                        w.write_all(&v.to_le_bytes())?;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self, ContainerError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if magic != MAGIC {
            return Err(ContainerError::Format(format!(
                "bad magic {:?}, expected {:?}",
                magic, MAGIC
            )));
        }
        let version = read_u16(&mut r)?;
        if version != VERSION {
            return Err(ContainerError::Format(format!(
                "unsupported version {version}"
            )));
        }
        let count = read_u32(&mut r)? as usize;
        let mut entries = Vec::with_capacity(count);
        let mut seen = BTreeSet::new();
        for _ in 0..count {
            let name_len = read_u16(&mut r)? as usize;
            let mut name_bytes = vec![0u8; name_len];
            r.read_exact(&mut name_bytes)?;
            let name = String::from_utf8(name_bytes)
                .map_err(|e| ContainerError::Format(format!("bad entry name: {e}")))?;
            if !seen.insert(name.clone()) {
                return Err(ContainerError::DuplicateName(name));
            }
            let mut byte = [0u8; 1];
            r.read_exact(&mut byte)?;
            let dtype = Dtype::from_code(byte[0])?;
            r.read_exact(&mut byte)?;
            let ndim = byte[0] as usize;
            let mut dims = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                dims.push(read_u32(&mut r)? as usize);
            }
            let len: usize = dims.iter().product();
            let payload = match dtype {
                Dtype::F32 => {
                    let mut vals = Vec::with_capacity(len);
                    let mut buf = [0u8; 4];
                    for _ in 0..len {
                        r.read_exact(&mut buf)?;
                        vals.push(f32::from_le_bytes(buf));
                    }
                    Payload::F32(
                        ArrayD::from_shape_vec(IxDyn(&dims), vals)
                            .map_err(|e| ContainerError::Shape(e.to_string()))?,
                    )
                }
                Dtype::F64 => {
                    let mut vals = Vec::with_capacity(len);
                    let mut buf = [0u8; 8];
                    for _ in 0..len {
                        r.read_exact(&mut buf)?;
                        vals.push(f64::from_le_bytes(buf));
                    }
                    Payload::F64(
                        ArrayD::from_shape_vec(IxDyn(&dims), vals)
                            .map_err(|e| ContainerError::Shape(e.to_string()))?,
                    )
                }
            };
            entries.push((name, payload));
        }
        Ok(MatrixContainer { entries })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ContainerError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ContainerError> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

fn read_u16(r: &mut impl Read) -> Result<u16, ContainerError> {
    let mut buf = [0u8; 2];
    r.read_exact(&mut buf)?;
    Ok(u16::from_le_bytes(buf))
}

fn read_u32(r: &mut impl Read) -> Result<u32, ContainerError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn roundtrip_multi_entry() {
        let mut c = MatrixContainer::new();
        c.push("a", Payload::F32(array![[1.0f32, 2.0], [3.0, 4.0]].into_dyn()))
            .unwrap();
        c.push("b", Payload::F64(array![0.5f64, -0.5].into_dyn()))
            .unwrap();
        let mut buf = Vec::new();
        c.write_to(&mut buf).unwrap();
        let back = MatrixContainer::read_from(&buf[..]).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back.get("a"), c.get("a").cloned().as_ref());
        assert_eq!(back.get("b"), c.get("b").cloned().as_ref());
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut c = MatrixContainer::new();
        c.push("x", Payload::F32(array![1.0f32].into_dyn())).unwrap();
        assert!(matches!(
            c.push("x", Payload::F32(array![2.0f32].into_dyn())),
            Err(ContainerError::DuplicateName(_))
        ));
    }

    #[test]
    fn bad_magic_rejected() {
        let bytes = b"NOPE\x01\x00\x00\x00\x00\x00";
        assert!(matches!(
            MatrixContainer::read_from(&bytes[..]),
            Err(ContainerError::Format(_))
        ));
    }
}
