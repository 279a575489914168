use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::ClassId;

use super::{load_features, LabeledDataset};

/// Audio front-end parameters the features were computed with. Recorded for
/// provenance only; nothing here reads them.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MfccInfo {
    pub dim: u32,
    pub hop: u32,
}

impl Default for MfccInfo {
    fn default() -> Self {
        Self { dim: 40, hop: 160 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestTask {
    pub id: usize,
    pub classes: Vec<ClassId>,
    pub train: PathBuf,
    pub test: PathBuf,
}

/// Task list; CSV paths are relative to the manifest's directory.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default)]
    pub mfcc: MfccInfo,
    pub tasks: Vec<ManifestTask>,
}

pub fn write_manifest(manifest: &Manifest, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Loads a manifest and every task's `(train, test)` datasets, in task order.
pub fn load_manifest(path: &Path) -> Result<(Manifest, Vec<(LabeledDataset, LabeledDataset)>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
    if manifest.tasks.is_empty() {
        return Err(Error::Manifest("manifest lists no tasks".into()));
    }
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut data = Vec::with_capacity(manifest.tasks.len());
    for task in &manifest.tasks {
        let train = load_features(&base.join(&task.train))?;
        let test = load_features(&base.join(&task.test))?;
        for (set, ds) in [("train", &train), ("test", &test)] {
            if let Some(bad) = ds.labels().iter().find(|l| !task.classes.contains(l)) {
                return Err(Error::Manifest(format!(
                    "task {} {set} file has label {bad} outside its class list",
                    task.id
                )));
            }
        }
        data.push((train, test));
    }
    Ok((manifest, data))
}
