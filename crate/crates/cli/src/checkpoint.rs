//! Binary model checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "UMAP"  u32 version
//! u32 field count, then per field: u8 name length, name, u64 value
//! u32 record count, then per record:
//!     u32 name length, name, u32 dim count, u32 dims…, f32 values…
//! u32 CRC-32 of every preceding byte
//! ```
//!
//! Records cover every named tensor of the model, running batch-norm
//! statistics included, in the model's canonical order.

use std::path::Path;

use mapseg::{Rng, UNetConfig, UNetModel};
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"UMAP";
pub const VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CheckpointError {
    #[error("not a checkpoint (bad magic bytes)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("checkpoint truncated")]
    Truncated,
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
}

const CONFIG_FIELDS: [&str; 5] = ["input_channels", "num_classes", "depth", "base_filters", "patch_size"];

fn config_values(c: &UNetConfig) -> [usize; 5] {
    [c.input_channels, c.num_classes, c.depth, c.base_filters, c.patch_size]
}

pub fn encode(model: &UNetModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(CONFIG_FIELDS.len() as u32).to_le_bytes());
    for (name, value) in CONFIG_FIELDS.iter().zip(config_values(model.config())) {
        out.push(name.len() as u8);
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(value as u64).to_le_bytes());
    }
    let params = model.params();
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for p in &params {
        out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        out.extend_from_slice(&(p.dims.len() as u32).to_le_bytes());
        for &d in &p.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in p.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).ok_or(CheckpointError::Truncated)?;
        let s = self.bytes.get(self.pos..end).ok_or(CheckpointError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn name(&mut self, len: usize) -> Result<&'a str, CheckpointError> {
        std::str::from_utf8(self.take(len)?).map_err(|_| CheckpointError::Malformed("name is not UTF-8".into()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<UNetModel, CheckpointError> {
    if bytes.len() < 12 {
        return Err(if bytes.starts_with(MAGIC) || MAGIC.starts_with(bytes) {
            CheckpointError::Truncated
        } else {
            CheckpointError::BadMagic
        });
    }
    if &bytes[..4] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(CheckpointError::Checksum { stored, computed });
    }
    let mut r = Reader { bytes: body, pos: 4 };
    let version = r.u32()?;
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }

    let mut values: [Option<usize>; 5] = [None; 5];
    for _ in 0..r.u32()? {
        let len = r.u8()? as usize;
        let name = r.name(len)?;
        let value = r.u64()?;
        let slot = CONFIG_FIELDS
            .iter()
            .position(|f| *f == name)
            .ok_or_else(|| CheckpointError::Malformed(format!("unknown config field '{name}'")))?;
        if values[slot].replace(value as usize).is_some() {
            return Err(CheckpointError::Malformed(format!("config field '{name}' repeated")));
        }
    }
    let field = |i: usize| values[i].ok_or_else(|| CheckpointError::Malformed(format!("config field '{}' missing", CONFIG_FIELDS[i])));
    let config = UNetConfig {
        input_channels: field(0)?,
        num_classes: field(1)?,
        depth: field(2)?,
        base_filters: field(3)?,
        patch_size: field(4)?,
    };
    let mut model =
        UNetModel::build(config, &mut Rng::new(0)).map_err(|e| CheckpointError::Malformed(e.to_string()))?;

    let mut params = model.params_mut();
    let count = r.u32()? as usize;
    if count != params.len() {
        return Err(CheckpointError::Malformed(format!(
            "{count} tensors stored, the configured network has {}",
            params.len()
        )));
    }
    for p in params.iter_mut() {
        let len = r.u32()? as usize;
        let name = r.name(len)?;
        if name != p.name {
            return Err(CheckpointError::Malformed(format!("expected tensor '{}', found '{name}'", p.name)));
        }
        let ndims = r.u32()? as usize;
        let dims = (0..ndims).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        if dims != p.dims {
            return Err(CheckpointError::Malformed(format!(
                "tensor '{name}' has dims {dims:?}, expected {:?}",
                p.dims
            )));
        }
        let raw = r.take(p.data.len() * 4)?;
        for (v, chunk) in p.data.iter_mut().zip(raw.chunks_exact(4)) {
            *v = f32::from_le_bytes(chunk.try_into().expect("4 bytes"));
        }
    }
    drop(params);
    if r.pos != body.len() {
        return Err(CheckpointError::Malformed(format!("{} trailing bytes", body.len() - r.pos)));
    }
    Ok(model)
}

pub fn save(model: &UNetModel, path: &Path) -> Result<(), mapseg::Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    std::fs::write(path, encode(model)).map_err(|e| io_error(path, e))
}

pub fn load(path: &Path) -> Result<UNetModel, mapseg::Error> {
    let bytes = std::fs::read(path).map_err(|e| io_error(path, e))?;
    decode(&bytes).map_err(|e| mapseg::Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn io_error(path: &Path, source: std::io::Error) -> mapseg::Error {
    mapseg::Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> UNetModel {
        let config = UNetConfig {
            num_classes: 3,
            depth: 2,
            base_filters: 3,
            patch_size: 8,
            ..UNetConfig::default()
        };
        let mut m = UNetModel::build(config, &mut Rng::new(9)).unwrap();
        m.encoders[0].block1.bn.running_mean[1] = 0.25;
        m
    }

    #[test]
    fn round_trip_is_exact() {
        let m = small();
        let bytes = encode(&m);
        let back = decode(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(encode(&back), bytes);
    }

    #[test]
    fn header_layout() {
        let bytes = encode(&small());
        assert_eq!(&bytes[..4], b"UMAP");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), VERSION);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 5);
        let n = bytes.len();
        assert_eq!(u32::from_le_bytes(bytes[n - 4..].try_into().unwrap()), crc32fast::hash(&bytes[..n - 4]));
    }

    #[test]
    fn every_flipped_byte_is_refused() {
        let bytes = encode(&small());
        for i in 0..bytes.len() {
            let mut bad = bytes.clone();
            bad[i] ^= 0x5a;
            assert!(decode(&bad).is_err(), "flip at {i} accepted");
        }
    }

    #[test]
    fn truncation_and_garbage() {
        let bytes = encode(&small());
        for n in [0, 3, 11, 40, bytes.len() - 1] {
            assert!(decode(&bytes[..n]).is_err(), "{n}");
        }
        assert_eq!(decode(b"PNG\x89 not a model at all").unwrap_err(), CheckpointError::BadMagic);
    }

    #[test]
    fn rejects_other_versions_with_valid_crc() {
        let mut bytes = encode(&small());
        bytes[4] = 2;
        let n = bytes.len();
        let crc = crc32fast::hash(&bytes[..n - 4]);
        bytes[n - 4..].copy_from_slice(&crc.to_le_bytes());
        assert_eq!(decode(&bytes).unwrap_err(), CheckpointError::UnsupportedVersion(2));
    }

    #[test]
    fn files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/model.ckpt");
        let m = small();
        save(&m, &path).unwrap();
        assert_eq!(load(&path).unwrap(), m);
        let first = std::fs::read(&path).unwrap();
        save(&load(&path).unwrap(), &path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), first);
        assert!(matches!(load(&dir.path().join("missing")), Err(mapseg::Error::Io { .. })));
    }
}
