//! Shared data types: track records, feature schemas, matrices, fitted
//! models and cluster indexes.
//!
//! Everything here is immutable after construction and safe to share across
//! threads. Constructors normalize and validate, so a value that exists
//! satisfies its invariants.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canon;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid track_id {0:?}: must be non-empty [A-Za-z0-9_-]+")]
    InvalidTrackId(String),
    #[error("track {0:?} has an empty artist_id")]
    EmptyArtistId(String),
    #[error("track {track_id:?} feature {feature:?} is not finite")]
    NonFiniteFeature { track_id: String, feature: String },
    #[error("invalid segment sequence: {0}")]
    InvalidSegments(String),
    #[error("invalid feature schema: {0}")]
    InvalidSchema(String),
    #[error("invalid feature matrix: {0}")]
    InvalidMatrix(String),
    #[error("duplicate track_id {0:?}")]
    DuplicateTrackId(String),
}

impl ModelError {
    /// Stable variant name, used by the CLI for error reporting.
    pub fn kind(&self) -> &'static str {
        match self {
            ModelError::InvalidTrackId(_) => "InvalidTrackId",
            ModelError::EmptyArtistId(_) => "EmptyArtistId",
            ModelError::NonFiniteFeature { .. } => "NonFiniteFeature",
            ModelError::InvalidSegments(_) => "InvalidSegments",
            ModelError::InvalidSchema(_) => "InvalidSchema",
            ModelError::InvalidMatrix(_) => "InvalidMatrix",
            ModelError::DuplicateTrackId(_) => "DuplicateTrackId",
        }
    }
}

fn valid_track_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

/// Per-segment audio analysis of one track: a sequence of fixed-width
/// timbre vectors with optional per-segment confidence values in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSegments")]
pub struct SegmentSequence {
    timbre: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    confidence: Option<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawSegments {
    timbre: Vec<Vec<f64>>,
    #[serde(default)]
    confidence: Option<Vec<f64>>,
}

impl TryFrom<RawSegments> for SegmentSequence {
    type Error = ModelError;
    fn try_from(raw: RawSegments) -> Result<Self, ModelError> {
        SegmentSequence::new(raw.timbre, raw.confidence)
    }
}

impl SegmentSequence {
    pub fn new(timbre: Vec<Vec<f64>>, confidence: Option<Vec<f64>>) -> Result<Self, ModelError> {
        if let Some(first) = timbre.first() {
            let w = first.len();
            if w == 0 {
                return Err(ModelError::InvalidSegments(
                    "timbre vectors must have width >= 1".into(),
                ));
            }
            for (i, v) in timbre.iter().enumerate() {
                if v.len() != w {
                    return Err(ModelError::InvalidSegments(format!(
                        "timbre vector {i} has width {}, expected {w}",
                        v.len()
                    )));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(ModelError::InvalidSegments(format!(
                        "timbre vector {i} contains a non-finite value"
                    )));
                }
            }
        }
        if let Some(conf) = &confidence {
            if conf.len() != timbre.len() {
                return Err(ModelError::InvalidSegments(format!(
                    "confidence length {} does not match timbre length {}",
                    conf.len(),
                    timbre.len()
                )));
            }
            if conf.iter().any(|c| !c.is_finite() || *c < 0.0 || *c > 1.0) {
                return Err(ModelError::InvalidSegments(
                    "confidence values must lie in [0, 1]".into(),
                ));
            }
        }
        Ok(Self { timbre, confidence })
    }

    pub fn timbre(&self) -> &[Vec<f64>] {
        &self.timbre
    }

    pub fn confidence(&self) -> Option<&[f64]> {
        self.confidence.as_deref()
    }

    /// Number of segments (time steps).
    pub fn len(&self) -> usize {
        self.timbre.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timbre.is_empty()
    }

    /// Width of each timbre vector, or 0 for an empty sequence.
    pub fn width(&self) -> usize {
        self.timbre.first().map_or(0, Vec::len)
    }
}

/// One song: identifiers, artist metadata and the raw numeric feature map.
///
/// `artist_terms` are lowercased and deduplicated at construction;
/// `similar_artists` are deduplicated and never contain the track's own
/// artist. A feature absent from `features` is a missing value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTrackRecord")]
pub struct TrackRecord {
    pub track_id: String,
    pub artist_id: String,
    pub artist_name: String,
    pub title: String,
    pub artist_terms: Vec<String>,
    pub similar_artists: Vec<String>,
    pub features: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub segments: Option<SegmentSequence>,
}

#[derive(Deserialize)]
struct RawTrackRecord {
    track_id: String,
    artist_id: String,
    #[serde(default)]
    artist_name: String,
    #[serde(default)]
    title: String,
    #[serde(default)]
    artist_terms: Vec<String>,
    #[serde(default)]
    similar_artists: Vec<String>,
    #[serde(default)]
    features: BTreeMap<String, f64>,
    #[serde(default)]
    segments: Option<SegmentSequence>,
}

impl TryFrom<RawTrackRecord> for TrackRecord {
    type Error = ModelError;
    fn try_from(raw: RawTrackRecord) -> Result<Self, ModelError> {
        TrackRecord::new(
            raw.track_id,
            raw.artist_id,
            raw.artist_name,
            raw.title,
            raw.artist_terms,
            raw.similar_artists,
            raw.features,
            raw.segments,
        )
    }
}

impl TrackRecord {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        track_id: String,
        artist_id: String,
        artist_name: String,
        title: String,
        artist_terms: Vec<String>,
        similar_artists: Vec<String>,
        features: BTreeMap<String, f64>,
        segments: Option<SegmentSequence>,
    ) -> Result<Self, ModelError> {
        if !valid_track_id(&track_id) {
            return Err(ModelError::InvalidTrackId(track_id));
        }
        if artist_id.is_empty() {
            return Err(ModelError::EmptyArtistId(track_id));
        }
        for (name, value) in &features {
            if !value.is_finite() {
                return Err(ModelError::NonFiniteFeature {
                    track_id,
                    feature: name.clone(),
                });
            }
        }

        // Lowercase, then drop duplicates keeping first occurrence.
        let mut seen = std::collections::HashSet::new();
        let artist_terms: Vec<String> = artist_terms
            .into_iter()
            .map(|t| t.to_lowercase())
            .filter(|t| seen.insert(t.clone()))
            .collect();

        let mut seen = std::collections::HashSet::new();
        let similar_artists: Vec<String> = similar_artists
            .into_iter()
            .filter(|a| *a != artist_id && seen.insert(a.clone()))
            .collect();

        Ok(Self {
            track_id,
            artist_id,
            artist_name,
            title,
            artist_terms,
            similar_artists,
            features,
            segments,
        })
    }
}

/// Counts of features kept and dropped per selection rule; carried inside
/// [`FeatureSchema`] as training provenance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionSummary {
    pub kept: usize,
    pub zero_variance: usize,
    pub sparse: usize,
    pub manual: usize,
    pub non_numeric: usize,
}

/// The ordered list of selected numeric features plus z-score parameters.
///
/// This is the contract between training and inference: a matrix built from
/// a schema has one column per `feature_names` entry, in order. Names are
/// sorted lexicographically so construction is independent of input order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    feature_names: Vec<String>,
    scaler_mean: Vec<f64>,
    scaler_std: Vec<f64>,
    provenance: SelectionSummary,
}

impl FeatureSchema {
    /// Build a schema from (name, mean, std) entries, sorting by name.
    pub fn new(
        mut entries: Vec<(String, f64, f64)>,
        provenance: SelectionSummary,
    ) -> Result<Self, ModelError> {
        if entries.is_empty() {
            return Err(ModelError::InvalidSchema(
                "schema must contain at least one feature".into(),
            ));
        }
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        for pair in entries.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(ModelError::InvalidSchema(format!(
                    "duplicate feature name {:?}",
                    pair[0].0
                )));
            }
        }
        let mut feature_names = Vec::with_capacity(entries.len());
        let mut scaler_mean = Vec::with_capacity(entries.len());
        let mut scaler_std = Vec::with_capacity(entries.len());
        for (name, mean, std) in entries {
            if !mean.is_finite() || !std.is_finite() || std <= 0.0 {
                return Err(ModelError::InvalidSchema(format!(
                    "feature {name:?} has invalid scaler parameters (mean {mean}, std {std})"
                )));
            }
            feature_names.push(name);
            scaler_mean.push(mean);
            scaler_std.push(std);
        }
        Ok(Self {
            feature_names,
            scaler_mean,
            scaler_std,
            provenance,
        })
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn scaler_mean(&self) -> &[f64] {
        &self.scaler_mean
    }

    pub fn scaler_std(&self) -> &[f64] {
        &self.scaler_std
    }

    pub fn provenance(&self) -> SelectionSummary {
        self.provenance
    }

    /// Number of features (the matrix column count).
    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn with_provenance(mut self, provenance: SelectionSummary) -> Self {
        self.provenance = provenance;
        self
    }

    /// True when two schemas describe the same feature space (names and
    /// scaler parameters; provenance is ignored).
    pub fn compatible(&self, other: &FeatureSchema) -> bool {
        self.feature_names == other.feature_names
            && self.scaler_mean == other.scaler_mean
            && self.scaler_std == other.scaler_std
    }
}

/// A dense n x d matrix of scaled feature values, one row per track.
///
/// Rows are stored in dataset order; entries are always finite because
/// missing values are imputed before the matrix is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    schema: FeatureSchema,
    n_rows: usize,
    data: Vec<f64>,
    row_ids: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(
        schema: FeatureSchema,
        data: Vec<f64>,
        row_ids: Vec<String>,
    ) -> Result<Self, ModelError> {
        let d = schema.dim();
        if row_ids.len() * d != data.len() {
            return Err(ModelError::InvalidMatrix(format!(
                "{} values cannot form {} rows of width {d}",
                data.len(),
                row_ids.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(ModelError::InvalidMatrix(
                "matrix entries must be finite".into(),
            ));
        }
        Ok(Self {
            n_rows: row_ids.len(),
            schema,
            data,
            row_ids,
        })
    }

    /// Convenience constructor from per-row vectors.
    pub fn from_rows(
        schema: FeatureSchema,
        rows: Vec<Vec<f64>>,
        row_ids: Vec<String>,
    ) -> Result<Self, ModelError> {
        let d = schema.dim();
        if rows.iter().any(|r| r.len() != d) {
            return Err(ModelError::InvalidMatrix(format!(
                "every row must have width {d}"
            )));
        }
        let data = rows.into_iter().flatten().collect();
        Self::new(schema, data, row_ids)
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn dim(&self) -> usize {
        self.schema.dim()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.schema.dim();
        &self.data[i * d..(i + 1) * d]
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }
}

/// A fitted k-means model: centroids in scaled feature space plus the
/// schema and training provenance needed to reuse it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    pub schema: FeatureSchema,
    pub inertia: f64,
    pub iterations_run: usize,
    pub seed: u64,
    pub converged: bool,
}

impl KMeansModel {
    pub fn centroid(&self, c: usize) -> &[f64] {
        &self.centroids[c]
    }

    /// Content hash over the canonical serialized form; two models with
    /// identical contents hash identically across processes and runs.
    pub fn content_hash(&self) -> String {
        let json = canon::to_canonical_json(self).expect("model serializes");
        format!("{:016x}", canon::fnv1a64(json.as_bytes()))
    }
}

/// Inverted cluster -> tracks map built over one dataset for a specific
/// model, identified by the model's content hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterIndex {
    pub model_id: String,
    pub assignments: BTreeMap<String, usize>,
    /// Member track ids per cluster, in dataset row order.
    pub members: Vec<Vec<String>>,
}

impl ClusterIndex {
    pub fn n_clusters(&self) -> usize {
        self.members.len()
    }

    pub fn cluster_of(&self, track_id: &str) -> Option<usize> {
        self.assignments.get(track_id).copied()
    }
}

/// An in-memory dataset with by-id lookup; preserves input order.
#[derive(Debug, Clone)]
pub struct TrackStore {
    records: Vec<TrackRecord>,
    by_id: HashMap<String, usize>,
}

impl TrackStore {
    pub fn new(records: Vec<TrackRecord>) -> Result<Self, ModelError> {
        let mut by_id = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if by_id.insert(r.track_id.clone(), i).is_some() {
                return Err(ModelError::DuplicateTrackId(r.track_id.clone()));
            }
        }
        Ok(Self { records, by_id })
    }

    pub fn get(&self, track_id: &str) -> Option<&TrackRecord> {
        self.by_id.get(track_id).map(|&i| &self.records[i])
    }

    pub fn records(&self) -> &[TrackRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canon::to_canonical_json;

    fn record(track: &str, artist: &str) -> TrackRecord {
        TrackRecord::new(
            track.into(),
            artist.into(),
            String::new(),
            String::new(),
            vec![],
            vec![],
            BTreeMap::new(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn terms_are_lowercased_and_deduplicated() {
        let r = TrackRecord::new(
            "T1".into(),
            "A1".into(),
            "a".into(),
            "t".into(),
            vec!["Rock".into(), "rock".into(), "Pop Rock".into()],
            vec![],
            BTreeMap::new(),
            None,
        )
        .unwrap();
        assert_eq!(r.artist_terms, vec!["rock", "pop rock"]);
    }

    #[test]
    fn similar_artists_drop_self_and_duplicates() {
        let r = TrackRecord::new(
            "T1".into(),
            "A1".into(),
            String::new(),
            String::new(),
            vec![],
            vec!["A2".into(), "A1".into(), "A2".into(), "A3".into()],
            BTreeMap::new(),
            None,
        )
        .unwrap();
        assert_eq!(r.similar_artists, vec!["A2", "A3"]);
    }

    #[test]
    fn track_id_charset_is_enforced() {
        for bad in ["", "has space", "semi;colon", "tab\t"] {
            let err = TrackRecord::new(
                bad.into(),
                "A1".into(),
                String::new(),
                String::new(),
                vec![],
                vec![],
                BTreeMap::new(),
                None,
            )
            .unwrap_err();
            assert!(matches!(err, ModelError::InvalidTrackId(_)), "{bad:?}");
        }
    }

    #[test]
    fn non_finite_feature_rejected() {
        let mut features = BTreeMap::new();
        features.insert("loudness".to_string(), f64::NAN);
        let err = TrackRecord::new(
            "T1".into(),
            "A1".into(),
            String::new(),
            String::new(),
            vec![],
            vec![],
            features,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::NonFiniteFeature { .. }));
    }

    #[test]
    fn segment_width_mismatch_rejected() {
        let err = SegmentSequence::new(vec![vec![1.0, 2.0], vec![3.0]], None).unwrap_err();
        assert!(matches!(err, ModelError::InvalidSegments(_)));
    }

    #[test]
    fn segment_confidence_validated() {
        let err =
            SegmentSequence::new(vec![vec![1.0], vec![2.0]], Some(vec![0.5])).unwrap_err();
        assert!(matches!(err, ModelError::InvalidSegments(_)));
        let err =
            SegmentSequence::new(vec![vec![1.0]], Some(vec![1.5])).unwrap_err();
        assert!(matches!(err, ModelError::InvalidSegments(_)));
        // Empty sequence is allowed.
        let seq = SegmentSequence::new(vec![], None).unwrap();
        assert_eq!(seq.len(), 0);
        assert_eq!(seq.width(), 0);
    }

    #[test]
    fn schema_construction_is_order_independent() {
        let fwd = FeatureSchema::new(
            vec![
                ("tempo".into(), 120.0, 30.0),
                ("loudness".into(), -7.0, 3.0),
            ],
            SelectionSummary::default(),
        )
        .unwrap();
        let rev = FeatureSchema::new(
            vec![
                ("loudness".into(), -7.0, 3.0),
                ("tempo".into(), 120.0, 30.0),
            ],
            SelectionSummary::default(),
        )
        .unwrap();
        assert_eq!(fwd, rev);
        assert_eq!(fwd.feature_names(), ["loudness", "tempo"]);
    }

    #[test]
    fn schema_rejects_duplicates_and_bad_std() {
        assert!(FeatureSchema::new(
            vec![("a".into(), 0.0, 1.0), ("a".into(), 0.0, 1.0)],
            SelectionSummary::default(),
        )
        .is_err());
        assert!(FeatureSchema::new(
            vec![("a".into(), 0.0, 0.0)],
            SelectionSummary::default()
        )
        .is_err());
        assert!(FeatureSchema::new(vec![], SelectionSummary::default()).is_err());
    }

    #[test]
    fn store_rejects_duplicate_ids() {
        let err = TrackStore::new(vec![record("T1", "A1"), record("T1", "A2")]).unwrap_err();
        assert!(matches!(err, ModelError::DuplicateTrackId(id) if id == "T1"));
    }

    #[test]
    fn model_content_hash_tracks_content() {
        let schema = FeatureSchema::new(
            vec![("x".into(), 0.0, 1.0)],
            SelectionSummary::default(),
        )
        .unwrap();
        let model = KMeansModel {
            k: 1,
            centroids: vec![vec![0.5]],
            schema,
            inertia: 1.0,
            iterations_run: 3,
            seed: 7,
            converged: true,
        };
        let mut other = model.clone();
        assert_eq!(model.content_hash(), other.content_hash());
        other.centroids[0][0] = 0.25;
        assert_ne!(model.content_hash(), other.content_hash());
    }

    #[test]
    fn matrix_and_index_round_trip_byte_identical() {
        let schema = FeatureSchema::new(
            vec![("x".into(), 0.25, 2.0), ("y".into(), -1.5, 0.5)],
            SelectionSummary {
                kept: 2,
                sparse: 1,
                ..SelectionSummary::default()
            },
        )
        .unwrap();
        let matrix = FeatureMatrix::from_rows(
            schema.clone(),
            vec![vec![0.1, -0.9], vec![1.3, 2.7]],
            vec!["T1".into(), "T2".into()],
        )
        .unwrap();
        let json = to_canonical_json(&matrix).unwrap();
        let back: FeatureMatrix = serde_json::from_str(&json).unwrap();
        assert_eq!(to_canonical_json(&back).unwrap(), json);

        let index = ClusterIndex {
            model_id: "00ff00ff00ff00ff".into(),
            assignments: [("T1".to_string(), 0), ("T2".to_string(), 1)]
                .into_iter()
                .collect(),
            members: vec![vec!["T1".into()], vec!["T2".into()]],
        };
        let json = to_canonical_json(&index).unwrap();
        let back: ClusterIndex = serde_json::from_str(&json).unwrap();
        assert_eq!(to_canonical_json(&back).unwrap(), json);
        assert_eq!(back, index);
    }

    #[test]
    fn canonical_round_trip_is_byte_identical() {
        let mut features = BTreeMap::new();
        features.insert("loudness".to_string(), -7.25);
        features.insert("tempo".to_string(), 120.0);
        let rec = TrackRecord::new(
            "TR0001".into(),
            "AR0001".into(),
            "Some Artist".into(),
            "Some Song".into(),
            vec!["indie rock".into()],
            vec!["AR0002".into()],
            features,
            Some(SegmentSequence::new(vec![vec![0.1, -0.2], vec![0.3, 0.4]], Some(vec![0.9, 1.0])).unwrap()),
        )
        .unwrap();
        let json = to_canonical_json(&rec).unwrap();
        let back: TrackRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(to_canonical_json(&back).unwrap(), json);
        assert_eq!(back, rec);
    }
}
