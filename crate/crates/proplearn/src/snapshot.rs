//! Model persistence: JSON snapshots carrying the property inventory, its
//! hash, the trained concept list and the model parameters. Loading verifies
//! the inventory hash so predictions can never silently run against the
//! wrong property space.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::PropertyInventory;
use crate::error::{Error, Result};
use crate::experiment::TrainedModel;

pub const FORMAT: &str = "proplearn-model-v1";

#[derive(Debug, Serialize, Deserialize)]
struct SnapshotFile {
    format: String,
    inventory: Vec<String>,
    inventory_sha256: String,
    trained_concepts: Vec<String>,
    model: TrainedModel,
}

/// SHA-256 over the format tag and the newline-joined property list.
pub fn inventory_hash(properties: &[String]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(FORMAT.as_bytes());
    for p in properties {
        hasher.update(b"\n");
        hasher.update(p.as_bytes());
    }
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

pub fn save_model(
    path: impl AsRef<Path>,
    inventory: &PropertyInventory,
    trained_concepts: &[String],
    model: &TrainedModel,
) -> Result<()> {
    let file = SnapshotFile {
        format: FORMAT.to_string(),
        inventory: inventory.as_slice().to_vec(),
        inventory_sha256: inventory_hash(inventory.as_slice()),
        trained_concepts: trained_concepts.to_vec(),
        model: model.clone(),
    };
    fs::write(path, serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

/// A loaded snapshot with rebuilt indexes.
#[derive(Debug)]
pub struct LoadedModel {
    pub inventory: PropertyInventory,
    pub trained_concepts: Vec<String>,
    pub model: TrainedModel,
}

pub fn load_model(path: impl AsRef<Path>) -> Result<LoadedModel> {
    let text = fs::read_to_string(path)?;
    let file: SnapshotFile = serde_json::from_str(&text)?;
    if file.format != FORMAT {
        return Err(Error::Snapshot(format!(
            "unsupported snapshot format `{}`",
            file.format
        )));
    }
    let expected = inventory_hash(&file.inventory);
    if expected != file.inventory_sha256 {
        return Err(Error::Snapshot(
            "inventory hash mismatch: snapshot does not match its property inventory".into(),
        ));
    }
    Ok(LoadedModel {
        inventory: PropertyInventory::new(file.inventory)?,
        trained_concepts: file.trained_concepts,
        model: file.model.restore(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::count::BaselineModel;

    #[test]
    fn hash_is_order_sensitive() {
        let a = inventory_hash(&["p1".to_string(), "p2".to_string()]);
        let b = inventory_hash(&["p2".to_string(), "p1".to_string()]);
        assert_ne!(a, b);
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn tampered_hash_fails_to_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let inventory = PropertyInventory::new(["p1", "p2"]).unwrap();
        let model = TrainedModel::Baseline(BaselineModel::from_probs(vec![0.4, 0.6]));
        save_model(&path, &inventory, &["c1".to_string()], &model).unwrap();

        let text = fs::read_to_string(&path).unwrap();
        let tampered = text.replacen("\"p1\"", "\"px\"", 1);
        fs::write(&path, tampered).unwrap();
        match load_model(&path) {
            Err(Error::Snapshot(msg)) => assert!(msg.contains("hash"), "{msg}"),
            other => panic!("expected hash mismatch, got {other:?}"),
        }
    }

    #[test]
    fn round_trip_preserves_model() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let inventory = PropertyInventory::new(["p1", "p2"]).unwrap();
        let model = TrainedModel::Baseline(BaselineModel::from_probs(vec![0.4, 0.6]));
        save_model(&path, &inventory, &["c1".to_string()], &model).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded.model, model);
        assert_eq!(loaded.inventory, inventory);
        assert_eq!(loaded.trained_concepts, vec!["c1".to_string()]);
    }
}
