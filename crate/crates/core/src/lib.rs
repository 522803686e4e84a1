//! Content-based track recommendation on song datasets with audio features.
//!
//! The pipeline: ingest track records ([`ingest`]), select and scale numeric
//! features ([`features`]), cluster with k-means ([`clustering`]), pick the
//! cluster count via silhouette sweeps and staged search ([`evaluation`]),
//! and answer recommendation queries by counting similar artists inside the
//! input tracks' clusters ([`recommend`]). [`datagen`] produces synthetic
//! datasets with planted clusters so every stage is testable at desk scale.

pub mod canon;
pub mod clustering;
pub mod datagen;
pub mod evaluation;
pub mod features;
pub mod ingest;
pub mod model;
pub mod recommend;
pub mod seed;

pub use model::{
    ClusterIndex, FeatureMatrix, FeatureSchema, KMeansModel, ModelError, SegmentSequence,
    SelectionSummary, TrackRecord, TrackStore,
};
