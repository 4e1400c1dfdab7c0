//! Parameter archives: a JSON manifest mapping each parameter name to its
//! shape and byte offset, plus one little-endian `f32` blob.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ParamStore, Tensor};
use crate::error::{LagrError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const BLOB_FILE: &str = "params.bin";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub shape: Vec<usize>,
    pub offset: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub params: BTreeMap<String, ManifestEntry>,
    pub blob_bytes: usize,
}

pub fn save_params(dir: &Path, store: &ParamStore) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| LagrError::io(dir, e))?;
    let mut manifest = Manifest::default();
    let mut blob = Vec::with_capacity(store.num_scalars() * 4);
    for (_, p) in store.iter() {
        manifest.params.insert(
            p.name.clone(),
            ManifestEntry {
                shape: p.tensor.shape().to_vec(),
                offset: blob.len(),
            },
        );
        for x in p.tensor.data() {
            blob.extend_from_slice(&x.to_le_bytes());
        }
    }
    manifest.blob_bytes = blob.len();
    let blob_path = dir.join(BLOB_FILE);
    fs::write(&blob_path, &blob).map_err(|e| LagrError::io(&blob_path, e))?;
    let man_path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(&man_path, text).map_err(|e| LagrError::io(&man_path, e))?;
    Ok(())
}

/// Read an archive into a fresh store, in manifest (byte offset) order.
pub fn load_params(dir: &Path) -> Result<ParamStore> {
    let man_path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&man_path).map_err(|e| LagrError::io(&man_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    let blob_path = dir.join(BLOB_FILE);
    let blob = fs::read(&blob_path).map_err(|e| LagrError::io(&blob_path, e))?;
    if blob.len() != manifest.blob_bytes {
        return Err(LagrError::Checkpoint(format!(
            "blob has {} bytes, manifest expects {}",
            blob.len(),
            manifest.blob_bytes
        )));
    }
    let mut entries: Vec<_> = manifest.params.iter().collect();
    entries.sort_by_key(|(_, e)| e.offset);
    let mut store = ParamStore::new();
    for (name, entry) in entries {
        let numel: usize = entry.shape.iter().product();
        let end = entry.offset + numel * 4;
        if end > blob.len() {
            return Err(LagrError::Checkpoint(format!(
                "parameter `{name}` runs past the end of the blob"
            )));
        }
        let data = blob[entry.offset..end]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        store.register(name.clone(), Tensor::new(entry.shape.clone(), data)?)?;
    }
    Ok(store)
}
