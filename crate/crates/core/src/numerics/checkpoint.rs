//! Tensor container used by model checkpoints.
//!
//! Layout: magic bytes `BLC1`, a u32 little-endian byte length, that many
//! bytes of UTF-8 JSON (the manifest), then the tensor payload as raw
//! little-endian IEEE-754 float64 arrays. The manifest records name, shape
//! and byte offset (relative to the payload start) for every tensor, plus
//! an arbitrary `extra` value for the caller. Round-trips are bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use super::NumericsError;

pub const MAGIC: &[u8; 4] = b"BLC1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    tensors: Vec<TensorEntry>,
    extra: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    byte_offset: u64,
}

pub fn save(
    path: &Path,
    extra: serde_json::Value,
    tensors: &[(String, &Tensor)],
) -> Result<(), NumericsError> {
    let mut entries = Vec::with_capacity(tensors.len());
    let mut offset = 0u64;
    for (name, t) in tensors {
        entries.push(TensorEntry {
            name: name.clone(),
            shape: t.shape().to_vec(),
            byte_offset: offset,
        });
        offset += (t.len() * 8) as u64;
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        tensors: entries,
        extra,
    };
    let manifest_bytes = serde_json::to_vec(&manifest).map_err(|e| NumericsError::Checkpoint {
        what: format!("manifest encode: {e}"),
    })?;

    let file = File::create(path).map_err(|e| NumericsError::Checkpoint {
        what: format!("create {}: {e}", path.display()),
    })?;
    let mut w = BufWriter::new(file);
    let io_err = |e: std::io::Error| NumericsError::Checkpoint {
        what: format!("write {}: {e}", path.display()),
    };
    w.write_all(MAGIC).map_err(io_err)?;
    w.write_all(&(manifest_bytes.len() as u32).to_le_bytes())
        .map_err(io_err)?;
    w.write_all(&manifest_bytes).map_err(io_err)?;
    for (_, t) in tensors {
        for v in t.data() {
            w.write_all(&v.to_le_bytes()).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)?;
    Ok(())
}

/// Read back the manifest `extra` value and the named tensors, in file order.
pub fn load(path: &Path) -> Result<(serde_json::Value, Vec<(String, Tensor)>), NumericsError> {
    let file = File::open(path).map_err(|e| NumericsError::Checkpoint {
        what: format!("open {}: {e}", path.display()),
    })?;
    let mut r = BufReader::new(file);
    let truncated = |what: &str| NumericsError::CheckpointTruncated {
        what: what.to_string(),
    };

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| truncated("magic"))?;
    if &magic != MAGIC {
        return Err(NumericsError::CheckpointFormat {
            what: format!("bad magic bytes {magic:?}, expected {MAGIC:?}"),
        });
    }
    let mut len_bytes = [0u8; 4];
    r.read_exact(&mut len_bytes)
        .map_err(|_| truncated("manifest length"))?;
    let manifest_len = u32::from_le_bytes(len_bytes) as usize;
    let mut manifest_bytes = vec![0u8; manifest_len];
    r.read_exact(&mut manifest_bytes)
        .map_err(|_| truncated("manifest"))?;
    let manifest: Manifest =
        serde_json::from_slice(&manifest_bytes).map_err(|e| NumericsError::CheckpointFormat {
            what: format!("manifest decode: {e}"),
        })?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(NumericsError::CheckpointFormat {
            what: format!(
                "format version {} unsupported (expected {FORMAT_VERSION})",
                manifest.format_version
            ),
        });
    }

    let mut payload = Vec::new();
    r.read_to_end(&mut payload)
        .map_err(|_| truncated("payload"))?;

    let mut tensors = Vec::with_capacity(manifest.tensors.len());
    for entry in &manifest.tensors {
        let count: usize = entry.shape.iter().product();
        let start = entry.byte_offset as usize;
        let end = start + count * 8;
        if end > payload.len() {
            return Err(truncated(&format!("tensor {}", entry.name)));
        }
        let data: Vec<f64> = payload[start..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let t = Tensor::new(entry.shape.clone(), data)?;
        tensors.push((entry.name.clone(), t));
    }
    Ok((manifest.extra, tensors))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.blc");
        let a = Tensor::new(vec![2, 3], vec![1.5, -2.25, 1e-300, f64::MIN_POSITIVE, 0.0, -0.0])
            .unwrap();
        let b = Tensor::scalar(0.1 + 0.2);
        let extra = serde_json::json!({"kind": "test", "n": 7});
        save(
            &path,
            extra.clone(),
            &[("a".into(), &a), ("b".into(), &b)],
        )
        .unwrap();
        let (extra2, tensors) = load(&path).unwrap();
        assert_eq!(extra, extra2);
        assert_eq!(tensors.len(), 2);
        assert_eq!(tensors[0].0, "a");
        assert_eq!(tensors[0].1.data(), a.data());
        assert_eq!(tensors[0].1.shape(), a.shape());
        assert!(tensors[1].1.item().to_bits() == b.item().to_bits());
    }

    #[test]
    fn corrupted_magic_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.blc");
        let a = Tensor::scalar(1.0);
        save(&path, serde_json::Value::Null, &[("a".into(), &a)]).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load(&path),
            Err(NumericsError::CheckpointFormat { .. })
        ));
    }

    #[test]
    fn truncated_file_is_an_integrity_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.blc");
        let a = Tensor::vector(vec![1.0, 2.0, 3.0]);
        save(&path, serde_json::Value::Null, &[("a".into(), &a)]).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        assert!(matches!(
            load(&path),
            Err(NumericsError::CheckpointTruncated { .. })
        ));
    }
}
