//! Feature selection and scaling: prune zero-variance and sparse features,
//! apply manual drop/keep lists, fit a z-score scaler and build the dense
//! feature matrix.
//!
//! String-valued attributes never enter the feature map (they live in the
//! dedicated record fields), so "numeric features only" holds by
//! construction. Missing values are imputed with the training mean, which
//! is 0 after scaling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::FeatureStats;
use crate::model::{FeatureMatrix, FeatureSchema, SelectionSummary, TrackRecord};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("invalid selection config: {0}")]
    InvalidConfig(String),
    #[error("selection dropped every feature")]
    AllFeaturesDropped,
    #[error("feature {0:?} is degenerate (zero variance or no present values)")]
    DegenerateFeature(String),
}

impl FeatureError {
    pub fn kind(&self) -> &'static str {
        match self {
            FeatureError::InvalidConfig(_) => "InvalidConfig",
            FeatureError::AllFeaturesDropped => "AllFeaturesDropped",
            FeatureError::DegenerateFeature(_) => "DegenerateFeature",
        }
    }
}

/// Thresholds and manual overrides for feature selection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionConfig {
    /// Drop a feature when its variance falls below this value.
    pub variance_epsilon: f64,
    /// Drop a feature when its missing fraction exceeds this value.
    pub max_missing_fraction: f64,
    /// Features to drop regardless of statistics.
    pub manual_drop: Vec<String>,
    /// Features to keep even when an automatic rule would drop them.
    pub manual_keep: Vec<String>,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            variance_epsilon: 1e-12,
            max_missing_fraction: 0.5,
            manual_drop: Vec::new(),
            manual_keep: Vec::new(),
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<(), FeatureError> {
        if self.variance_epsilon < 0.0 || !self.variance_epsilon.is_finite() {
            return Err(FeatureError::InvalidConfig(
                "variance_epsilon must be a nonnegative real".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.max_missing_fraction) {
            return Err(FeatureError::InvalidConfig(
                "max_missing_fraction must lie in [0, 1]".into(),
            ));
        }
        if let Some(name) = self
            .manual_drop
            .iter()
            .find(|d| self.manual_keep.contains(d))
        {
            return Err(FeatureError::InvalidConfig(format!(
                "feature {name:?} appears in both manual_drop and manual_keep"
            )));
        }
        Ok(())
    }
}

/// Why a feature was dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    ZeroVariance,
    Sparse,
    Manual,
    NonNumeric,
}

impl std::fmt::Display for DropReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            DropReason::ZeroVariance => "zero_variance",
            DropReason::Sparse => "sparse",
            DropReason::Manual => "manual",
            DropReason::NonNumeric => "non_numeric",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedFeature {
    pub name: String,
    pub reason: DropReason,
}

/// Outcome of feature selection: kept and dropped names partition the
/// observed feature set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    /// Kept feature names, sorted lexicographically.
    pub kept: Vec<String>,
    /// Dropped features with reasons, sorted by name.
    pub dropped: Vec<DroppedFeature>,
}

impl SelectionReport {
    pub fn summary(&self) -> SelectionSummary {
        let mut s = SelectionSummary {
            kept: self.kept.len(),
            ..SelectionSummary::default()
        };
        for d in &self.dropped {
            match d.reason {
                DropReason::ZeroVariance => s.zero_variance += 1,
                DropReason::Sparse => s.sparse += 1,
                DropReason::Manual => s.manual += 1,
                DropReason::NonNumeric => s.non_numeric += 1,
            }
        }
        s
    }
}

/// Apply the drop rules to per-feature statistics.
///
/// A feature is dropped iff it matches a rule and is not in `manual_keep`.
/// When several rules match, the recorded reason follows the priority
/// manual > zero_variance > sparse.
pub fn select_features(
    stats: &[FeatureStats],
    config: &SelectionConfig,
) -> Result<SelectionReport, FeatureError> {
    config.validate()?;
    if stats.is_empty() {
        return Err(FeatureError::InvalidConfig(
            "no feature statistics supplied".into(),
        ));
    }
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for s in stats {
        let reason = if config.manual_drop.contains(&s.feature_name) {
            Some(DropReason::Manual)
        } else if s.variance < config.variance_epsilon {
            Some(DropReason::ZeroVariance)
        } else if s.missing_fraction() > config.max_missing_fraction {
            Some(DropReason::Sparse)
        } else {
            None
        };
        match reason {
            Some(reason) if !config.manual_keep.contains(&s.feature_name) => {
                dropped.push(DroppedFeature {
                    name: s.feature_name.clone(),
                    reason,
                });
            }
            _ => kept.push(s.feature_name.clone()),
        }
    }
    kept.sort_unstable();
    dropped.sort_by(|a, b| a.name.cmp(&b.name));
    if kept.is_empty() {
        return Err(FeatureError::AllFeaturesDropped);
    }
    Ok(SelectionReport { kept, dropped })
}

/// Fit a z-score scaler over the present values of each kept feature.
///
/// Standard deviations are population values floored at 1e-9; a kept
/// feature with zero variance (or no present values) is an error because
/// selection should have removed it.
pub fn fit_scaler(
    records: &[TrackRecord],
    kept: &[String],
) -> Result<FeatureSchema, FeatureError> {
    if kept.is_empty() {
        return Err(FeatureError::AllFeaturesDropped);
    }
    let mut entries = Vec::with_capacity(kept.len());
    for name in kept {
        let mut count = 0usize;
        let mut mean = 0.0f64;
        let mut m2 = 0.0f64;
        for r in records {
            if let Some(&x) = r.features.get(name) {
                count += 1;
                let delta = x - mean;
                mean += delta / count as f64;
                m2 += delta * (x - mean);
            }
        }
        if count == 0 {
            return Err(FeatureError::DegenerateFeature(name.clone()));
        }
        let variance = m2 / count as f64;
        if variance <= 0.0 {
            return Err(FeatureError::DegenerateFeature(name.clone()));
        }
        let std = variance.sqrt().max(1e-9);
        entries.push((name.clone(), mean, std));
    }
    FeatureSchema::new(entries, SelectionSummary::default())
        .map_err(|e| FeatureError::InvalidConfig(e.to_string()))
}

/// Rows per parallel fill chunk.
const MATRIX_CHUNK: usize = 1024;

/// Build the scaled matrix for `records` under `schema`. Missing values
/// become 0 (the training mean before scaling), so every entry is finite.
pub fn build_matrix(records: &[TrackRecord], schema: &FeatureSchema) -> FeatureMatrix {
    let d = schema.dim();
    let names = schema.feature_names();
    let means = schema.scaler_mean();
    let stds = schema.scaler_std();
    let mut data = vec![0.0f64; records.len() * d];
    data.par_chunks_mut(MATRIX_CHUNK * d)
        .zip(records.par_chunks(MATRIX_CHUNK))
        .for_each(|(out, rows)| {
            for (row_out, record) in out.chunks_mut(d).zip(rows) {
                for (j, name) in names.iter().enumerate() {
                    if let Some(&x) = record.features.get(name) {
                        row_out[j] = (x - means[j]) / stds[j];
                    }
                }
            }
        });
    let row_ids = records.iter().map(|r| r.track_id.clone()).collect();
    FeatureMatrix::new(schema.clone(), data, row_ids).expect("imputation keeps entries finite")
}
