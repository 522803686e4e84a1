//! Shared fixtures for the benchmark targets.

use trackrec_core::datagen::{generate, GenConfig};
use trackrec_core::features::{build_matrix, fit_scaler, select_features, SelectionConfig};
use trackrec_core::ingest::compute_stats;
use trackrec_core::FeatureMatrix;

/// Planted-cluster matrix run through the standard selection/scaling
/// pipeline.
pub fn planted_matrix(n_tracks: usize, n_features: usize, g: usize, seed: u64) -> FeatureMatrix {
    let (records, _) = generate(&GenConfig {
        n_tracks,
        n_artists: (n_tracks / 20).max(g),
        n_clusters_true: g,
        n_features,
        seed,
        ..GenConfig::default()
    })
    .expect("valid bench config");
    let stats = compute_stats(&records).expect("non-empty dataset");
    let report = select_features(&stats, &SelectionConfig::default()).expect("features survive");
    let schema = fit_scaler(&records, &report.kept).expect("scaler fits");
    build_matrix(&records, &schema)
}
