//! Versioned binary container for a [`NetworkBundle`].
//!
//! Layout (all integers little-endian):
//!
//! | bytes | content |
//! |-------|---------|
//! | 8 | magic `XDEPTHCK` |
//! | 4 | format version (`u32`) |
//! | 8 | header length `n` (`u64`) |
//! | n | JSON header: network config, training config, step, parameter table |
//! | 8·k | parameter values as `f64` in table order |
//! | 32 | SHA-256 of every preceding byte |

use std::fs;
use std::path::Path;

use crossdepth_autograd::Tensor;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::networks::{NetworkBundle, NetworkConfig};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"XDEPTHCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ParamEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    network: NetworkConfig,
    training: Option<serde_json::Value>,
    step: u64,
    params: Vec<ParamEntry>,
}

/// A loaded checkpoint.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub bundle: NetworkBundle,
    pub step: u64,
    /// Training configuration as saved, if any.
    pub training: Option<serde_json::Value>,
}

/// Serialises a checkpoint to bytes.
pub fn encode_checkpoint<T: Serialize>(bundle: &NetworkBundle, training: Option<&T>, step: u64) -> Result<Vec<u8>> {
    let store = bundle.store();
    let mut offset = 0;
    let params = store
        .iter()
        .map(|(_, name, t)| {
            let e = ParamEntry {
                name: name.to_owned(),
                shape: t.shape().to_vec(),
                offset,
            };
            offset += t.len();
            e
        })
        .collect();
    let training = training
        .map(serde_json::to_value)
        .transpose()
        .map_err(|e| Error::Config(format!("training config is not serialisable: {e}")))?;
    let header = Header {
        network: bundle.config().clone(),
        training,
        step,
        params,
    };
    let header = serde_json::to_vec(&header).expect("header serialises");

    let mut out = Vec::with_capacity(20 + header.len() + offset * 8 + 32);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for (_, _, t) in store.iter() {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    Ok(out)
}

/// Writes a checkpoint, replacing `path` atomically.
pub fn save_checkpoint<T: Serialize>(
    bundle: &NetworkBundle,
    training: Option<&T>,
    step: u64,
    path: &Path,
) -> Result<()> {
    let bytes = encode_checkpoint(bundle, training, step)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension("ckpt.partial");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

fn corrupt(field: &str, msg: impl Into<String>) -> Error {
    Error::CorruptCheckpoint {
        field: field.to_owned(),
        msg: msg.into(),
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, field: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            corrupt(
                field,
                format!("file truncated: need {n} bytes at offset {}, have {}", self.pos, self.bytes.len() - self.pos),
            )
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8, "magic")? != CHECKPOINT_MAGIC {
        return Err(corrupt("magic", "not a checkpoint file"));
    }
    let version = u32::from_le_bytes(r.take(4, "version")?.try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::CheckpointVersion {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let header_len = u64::from_le_bytes(r.take(8, "header_length")?.try_into().unwrap());
    let header_len = usize::try_from(header_len).map_err(|_| corrupt("header_length", "too large"))?;
    let header: Header =
        serde_json::from_slice(r.take(header_len, "header")?).map_err(|e| corrupt("header", e.to_string()))?;

    let total: usize = header.params.iter().map(|p| p.shape.iter().product::<usize>()).sum();
    let data = r.take(total * 8, "parameters")?;
    let body_end = r.pos;
    let checksum = r.take(32, "checksum")?;
    if r.pos != bytes.len() {
        return Err(corrupt("checksum", "trailing bytes after checksum"));
    }
    if Sha256::digest(&bytes[..body_end]).as_slice() != checksum {
        return Err(corrupt("checksum", "SHA-256 mismatch"));
    }

    let mut network = header.network;
    network.pretrained_encoder = None;
    let mut bundle = NetworkBundle::build(&network, 0).map_err(|e| corrupt("network", e.to_string()))?;
    if header.params.len() != bundle.store().len() {
        return Err(corrupt(
            "params",
            format!("{} arrays stored, architecture has {}", header.params.len(), bundle.store().len()),
        ));
    }
    for entry in &header.params {
        let field = format!("params.{}", entry.name);
        let id = bundle
            .store()
            .find(&entry.name)
            .ok_or_else(|| corrupt(&field, "unknown parameter"))?;
        let n: usize = entry.shape.iter().product();
        let raw = data
            .get(entry.offset * 8..(entry.offset + n) * 8)
            .ok_or_else(|| corrupt(&field, "offset out of range"))?;
        let values = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let t = Tensor::new(entry.shape.clone(), values).map_err(|e| corrupt(&field, e.to_string()))?;
        bundle.store_mut().set(id, t).map_err(|e| corrupt(&field, e.to_string()))?;
    }
    Ok(Checkpoint {
        bundle,
        step: header.step,
        training: header.training,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bundle() -> NetworkBundle {
        NetworkBundle::build(&NetworkConfig::default(), 3).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let b = bundle();
        let bytes = encode_checkpoint(&b, Some(&serde_json::json!({"lr": 1e-3})), 42).unwrap();
        let ck = decode_checkpoint(&bytes).unwrap();
        assert_eq!(ck.step, 42);
        assert_eq!(ck.bundle.parameter_digest(None), b.parameter_digest(None));
        assert_eq!(ck.training.unwrap()["lr"], 1e-3);
    }

    #[test]
    fn truncation_names_a_field() {
        let bytes = encode_checkpoint::<()>(&bundle(), None, 0).unwrap();
        for cut in [0, 5, 10, 15, 100, bytes.len() / 2, bytes.len() - 1] {
            match decode_checkpoint(&bytes[..cut]) {
                Err(Error::CorruptCheckpoint { field, .. }) => assert!(!field.is_empty()),
                other => panic!("cut {cut}: {other:?}"),
            }
        }
    }

    #[test]
    fn bit_flip_fails_checksum() {
        let mut bytes = encode_checkpoint::<()>(&bundle(), None, 0).unwrap();
        let i = bytes.len() - 100;
        bytes[i] ^= 1;
        assert!(matches!(
            decode_checkpoint(&bytes),
            Err(Error::CorruptCheckpoint { field, .. }) if field == "checksum"
        ));
    }

    #[test]
    fn version_is_checked() {
        let mut bytes = encode_checkpoint::<()>(&bundle(), None, 0).unwrap();
        bytes[8..12].copy_from_slice(&7u32.to_le_bytes());
        assert!(matches!(
            decode_checkpoint(&bytes),
            Err(Error::CheckpointVersion { found: 7, expected: 1 })
        ));
    }
}
