//! The `DFEW` weight file.
//!
//! Little-endian: magic `DFEW`, `u32` version (1), `u32` tensor count, then
//! per tensor a `u16` name length, the UTF-8 name, a `u8` rank, `u32`
//! extents and the `f32` values. Tensors are written in registry order.

use std::collections::HashSet;
use std::path::Path;

use dfeia_core::network::{Model, NetworkConfig};
use dfeia_core::ParamStore;
use thiserror::Error;

use crate::error::{DfeiaError, Result};

pub const MAGIC: [u8; 4] = *b"DFEW";
pub const VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WeightsError {
    #[error("bad magic: expected \"DFEW\", found {0:?}")]
    BadMagic(Vec<u8>),
    #[error("unsupported format version {0} (this build reads version 1)")]
    UnsupportedVersion(u32),
    #[error("unexpected end of file while reading {0}")]
    UnexpectedEof(&'static str),
    #[error("tensor name is not valid UTF-8")]
    InvalidName,
    #[error("unknown parameter name \"{0}\"")]
    UnknownName(String),
    #[error("parameter \"{0}\" appears more than once")]
    DuplicateName(String),
    #[error("shape mismatch for \"{name}\": file has {found:?}, model expects {expected:?}")]
    ShapeMismatch { name: String, found: Vec<usize>, expected: Vec<usize> },
    #[error("missing parameter \"{0}\"")]
    MissingParameter(String),
    #[error("{0} trailing bytes after the last tensor")]
    TrailingBytes(usize),
    #[error("\"{0}\" is too large for the format")]
    TooLarge(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

pub fn encode(store: &ParamStore<f32>) -> Result<Vec<u8>, WeightsError> {
    let mut out = Vec::with_capacity(12 + store.num_scalars() * 4);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let count = u32::try_from(store.len()).map_err(|_| WeightsError::TooLarge("tensor count".into()))?;
    out.extend_from_slice(&count.to_le_bytes());
    for p in store.iter() {
        let too_large = || WeightsError::TooLarge(p.name.clone());
        let len = u16::try_from(p.name.len()).map_err(|_| too_large())?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        let shape = p.value.shape();
        out.push(u8::try_from(shape.len()).map_err(|_| too_large())?);
        for &e in shape {
            out.extend_from_slice(&u32::try_from(e).map_err(|_| too_large())?.to_le_bytes());
        }
        for v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], WeightsError> {
        let end =
            self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or(WeightsError::UnexpectedEof(what))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, WeightsError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Vec<NamedTensor>, WeightsError> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4, "magic").map_err(|_| WeightsError::BadMagic(bytes.to_vec()))?;
    if magic != MAGIC {
        return Err(WeightsError::BadMagic(magic.to_vec()));
    }
    let version = r.u32("format version")?;
    if version != VERSION {
        return Err(WeightsError::UnsupportedVersion(version));
    }
    let count = r.u32("tensor count")?;
    let mut out = Vec::new();
    for _ in 0..count {
        let len = u16::from_le_bytes(r.take(2, "name length")?.try_into().unwrap());
        let name = std::str::from_utf8(r.take(len as usize, "tensor name")?).map_err(|_| WeightsError::InvalidName)?;
        let rank = r.take(1, "tensor rank")?[0];
        let shape = (0..rank).map(|_| r.u32("tensor extents").map(|e| e as usize)).collect::<Result<Vec<_>, _>>()?;
        let numel = shape
            .iter()
            .try_fold(1usize, |a, &e| a.checked_mul(e))
            .ok_or(WeightsError::UnexpectedEof("tensor data"))?;
        let raw = r.take(numel.checked_mul(4).ok_or(WeightsError::UnexpectedEof("tensor data"))?, "tensor data")?;
        let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        out.push(NamedTensor { name: name.to_string(), shape, data });
    }
    if r.pos != bytes.len() {
        return Err(WeightsError::TrailingBytes(bytes.len() - r.pos));
    }
    Ok(out)
}

/// Copies decoded tensors into `store`, which must hold exactly the same
/// names and shapes.
pub fn apply(store: &mut ParamStore<f32>, tensors: Vec<NamedTensor>) -> Result<(), WeightsError> {
    let mut seen = HashSet::new();
    for t in tensors {
        let id = store.id_of(&t.name).ok_or_else(|| WeightsError::UnknownName(t.name.clone()))?;
        if !seen.insert(t.name.clone()) {
            return Err(WeightsError::DuplicateName(t.name));
        }
        let expected = store.value(id).shape().to_vec();
        if expected != t.shape {
            return Err(WeightsError::ShapeMismatch { name: t.name, found: t.shape, expected });
        }
        store.get_mut(id).value.data_mut().copy_from_slice(&t.data);
    }
    if let Some(p) = store.iter().find(|p| !seen.contains(&p.name)) {
        return Err(WeightsError::MissingParameter(p.name.clone()));
    }
    Ok(())
}

pub fn save(model: &Model<f32>, path: &Path) -> Result<()> {
    let bytes = encode(&model.params).map_err(|source| DfeiaError::Weights { path: path.into(), source })?;
    std::fs::write(path, bytes).map_err(DfeiaError::io(path))
}

/// Builds the architecture described by `config` and fills it from `path`.
pub fn load(path: &Path, config: &NetworkConfig) -> Result<Model<f32>> {
    let bytes = std::fs::read(path).map_err(DfeiaError::io(path))?;
    let mut model = Model::build(config.clone(), 0)?;
    let tensors = decode(&bytes).map_err(|source| DfeiaError::Weights { path: path.into(), source })?;
    apply(&mut model.params, tensors).map_err(|source| DfeiaError::Weights { path: path.into(), source })?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> ParamStore<f32> {
        let mut s = ParamStore::new();
        s.register("a.weight", dfeia_core::Tensor::from_fn(&[2, 3], |i| i as f32 * 0.5 - 1.0)).unwrap();
        s.register("a.bias", dfeia_core::Tensor::full(&[2], f32::MIN_POSITIVE)).unwrap();
        s
    }

    #[test]
    fn layout_is_as_documented() {
        let b = encode(&store()).unwrap();
        assert_eq!(&b[..4], b"DFEW");
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), 2);
        assert_eq!(u16::from_le_bytes(b[12..14].try_into().unwrap()), 8);
        assert_eq!(&b[14..22], b"a.weight");
        assert_eq!(b[22], 2);
        assert_eq!(b.len(), 12 + (2 + 8 + 1 + 8 + 24) + (2 + 6 + 1 + 4 + 8));
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let s = store();
        let mut t = store();
        t.iter_mut().for_each(|p| p.value.fill(0.0));
        apply(&mut t, decode(&encode(&s).unwrap()).unwrap()).unwrap();
        assert_eq!(s, t);
    }

    #[test]
    fn distinct_errors() {
        let good = encode(&store()).unwrap();
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(WeightsError::BadMagic(_))));
        let mut bad = good.clone();
        bad[4] = 2;
        assert_eq!(decode(&bad), Err(WeightsError::UnsupportedVersion(2)));
        assert_eq!(decode(&good[..good.len() - 1]), Err(WeightsError::UnexpectedEof("tensor data")));
        let mut bad = good.clone();
        bad.push(0);
        assert_eq!(decode(&bad), Err(WeightsError::TrailingBytes(1)));
    }
}
