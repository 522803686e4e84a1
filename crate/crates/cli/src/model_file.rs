//! On-disk model persistence.
//!
//! A model file is canonical JSON (sorted keys, shortest round-trip floats)
//! plus one trailing newline, so identical models produce byte-identical,
//! diffable files and reloading is exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use trackrec_core::canon::to_canonical_json;
use trackrec_core::features::SelectionReport;
use trackrec_core::KMeansModel;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed model file: {message}")]
    Malformed { path: String, message: String },
    #[error("{path}: unsupported format_version {found}, expected {MODEL_FORMAT_VERSION}")]
    Version { path: String, found: u32 },
}

impl ModelFileError {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelFileError::Io { .. } => "IoError",
            ModelFileError::Malformed { .. } => "MalformedModelFile",
            ModelFileError::Version { .. } => "UnsupportedVersion",
        }
    }
}

/// A trained model plus its selection report and creation timestamp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub model: KMeansModel,
    pub selection_report: SelectionReport,
    /// UTC creation time, ISO 8601. Excluded from determinism comparisons.
    pub created_at: String,
}

impl ModelFile {
    pub fn new(model: KMeansModel, selection_report: SelectionReport) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            model,
            selection_report,
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }

    /// Serialize to the canonical on-disk byte form.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut bytes = to_canonical_json(self)
            .expect("model file serializes")
            .into_bytes();
        bytes.push(b'\n');
        bytes
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelFileError> {
        fs::write(path, self.to_bytes()).map_err(|e| ModelFileError::Io {
            path: path.display().to_string(),
            source: e,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ModelFileError> {
        let text = fs::read_to_string(path).map_err(|e| ModelFileError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let file: ModelFile =
            serde_json::from_str(&text).map_err(|e| ModelFileError::Malformed {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
        file.validate(path)?;
        Ok(file)
    }

    fn validate(&self, path: &Path) -> Result<(), ModelFileError> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(ModelFileError::Version {
                path: path.display().to_string(),
                found: self.format_version,
            });
        }
        let d = self.model.schema.dim();
        if self.model.centroids.len() != self.model.k
            || self.model.centroids.iter().any(|c| c.len() != d)
        {
            return Err(ModelFileError::Malformed {
                path: path.display().to_string(),
                message: format!(
                    "centroid matrix is not {} x {d} as the schema requires",
                    self.model.k
                ),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use trackrec_core::model::{FeatureSchema, SelectionSummary};

    fn sample() -> ModelFile {
        let schema = FeatureSchema::new(
            vec![("loudness".into(), -7.0, 3.5), ("tempo".into(), 120.0, 25.0)],
            SelectionSummary::default(),
        )
        .unwrap();
        ModelFile::new(
            KMeansModel {
                k: 2,
                centroids: vec![vec![0.1, -0.2], vec![1.5, 0.75]],
                schema,
                inertia: 12.25,
                iterations_run: 7,
                seed: 42,
                converged: true,
            },
            SelectionReport {
                kept: vec!["loudness".into(), "tempo".into()],
                dropped: vec![],
            },
        )
    }

    #[test]
    fn round_trip_is_byte_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let file = sample();
        file.save(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let reloaded = ModelFile::load(&path).unwrap();
        assert_eq!(reloaded, file);
        assert_eq!(reloaded.to_bytes(), bytes);
    }

    #[test]
    fn version_and_shape_validated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let mut file = sample();
        file.format_version = 2;
        file.save(&path).unwrap();
        assert!(matches!(
            ModelFile::load(&path).unwrap_err(),
            ModelFileError::Version { found: 2, .. }
        ));

        let mut file = sample();
        file.model.centroids.pop();
        file.save(&path).unwrap();
        assert!(matches!(
            ModelFile::load(&path).unwrap_err(),
            ModelFileError::Malformed { .. }
        ));
    }
}
