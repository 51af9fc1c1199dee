//! Self-describing JSON model files with an embedded content checksum.
//!
//! ```text
//! {"format_version":1,"checksum":"<sha256 hex>","payload":{...}}
//! ```
//!
//! The checksum covers the compact JSON encoding of `payload` with object
//! keys in sorted order. Floats survive the round trip bit for bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::ensemble::Model;
use crate::error::{Error, Result};
use crate::experiment::ModelSpec;
use crate::rebalance::VariantSpec;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub variant: Option<VariantSpec>,
    pub seed: u64,
    /// Fingerprint of the training dataset, if known.
    pub dataset_fingerprint: Option<String>,
    pub class_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPayload {
    pub kind: String,
    pub hyperparameters: Option<ModelSpec>,
    pub provenance: Provenance,
    pub model: Model,
}

impl ModelPayload {
    pub fn new(model: Model, hyperparameters: Option<ModelSpec>, provenance: Provenance) -> Self {
        Self {
            kind: model.kind_name().to_owned(),
            hyperparameters,
            provenance,
            model,
        }
    }
}

fn checksum(payload: &Value) -> String {
    let canonical = serde_json::to_string(payload).expect("Value always serializes");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

pub fn encode_model(payload: &ModelPayload) -> Result<Vec<u8>> {
    let value = serde_json::to_value(payload).map_err(|e| Error::Corrupt(e.to_string()))?;
    let file = serde_json::json!({
        "format_version": MODEL_FORMAT_VERSION,
        "checksum": checksum(&value),
        "payload": value,
    });
    serde_json::to_vec(&file).map_err(|e| Error::Corrupt(e.to_string()))
}

pub fn decode_model(bytes: &[u8]) -> Result<ModelPayload> {
    let file: Value = serde_json::from_slice(bytes)
        .map_err(|e| Error::Corrupt(format!("truncated or malformed JSON: {e}")))?;
    let version = file
        .get("format_version")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::Corrupt("missing format_version".into()))?;
    if version != u64::from(MODEL_FORMAT_VERSION) {
        return Err(Error::Version {
            found: u32::try_from(version).unwrap_or(u32::MAX),
            expected: MODEL_FORMAT_VERSION,
        });
    }
    let stored = file
        .get("checksum")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Corrupt("missing checksum".into()))?;
    let payload = file
        .get("payload")
        .ok_or_else(|| Error::Corrupt("missing payload".into()))?;
    if checksum(payload) != stored {
        return Err(Error::Corrupt("checksum mismatch".into()));
    }
    ModelPayload::deserialize(payload).map_err(|e| Error::Corrupt(e.to_string()))
}

pub fn save_model(payload: &ModelPayload, path: &Path) -> Result<()> {
    write_atomic(path, &encode_model(payload)?)
}

pub fn load_model(path: &Path) -> Result<ModelPayload> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}

/// Writes to a sibling temp file, then renames over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidParam(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureDataset;
    use crate::tree::{fit_tree, TreeParams};

    fn payload() -> ModelPayload {
        let ds = FeatureDataset::new(
            vec![0.1, 0.7, 1.3, 2.9],
            1,
            vec![0, 0, 1, 1],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let tree = fit_tree(&ds, None, TreeParams::default()).unwrap();
        ModelPayload::new(
            tree.into(),
            None,
            Provenance {
                variant: None,
                seed: 1,
                dataset_fingerprint: None,
                class_names: ds.class_names().to_vec(),
            },
        )
    }

    #[test]
    fn roundtrip_in_memory() {
        let p = payload();
        assert_eq!(decode_model(&encode_model(&p).unwrap()).unwrap(), p);
    }

    #[test]
    fn version_truncation_and_tamper() {
        let bytes = encode_model(&payload()).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        let bumped = text.replace("\"format_version\":1", "\"format_version\":2");
        assert!(matches!(
            decode_model(bumped.as_bytes()),
            Err(Error::Version { found: 2, expected: 1 })
        ));
        assert!(matches!(decode_model(&bytes[..bytes.len() / 2]), Err(Error::Corrupt(_))));
        let tampered = text.replace("\"seed\":1", "\"seed\":2");
        assert_ne!(tampered, text);
        assert!(matches!(decode_model(tampered.as_bytes()), Err(Error::Corrupt(_))));
    }

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        save_model(&payload(), &path).unwrap();
        let entries: Vec<_> = fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(entries.len(), 1);
        assert_eq!(load_model(&path).unwrap(), payload());
    }
}
