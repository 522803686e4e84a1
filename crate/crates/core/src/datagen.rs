//! Synthetic dataset generation with planted structure.
//!
//! Tracks are drawn from isotropic Gaussian clusters (unit within-cluster
//! standard deviation, centroids spaced `separation` apart), every artist
//! belongs to exactly one planted cluster, genre vocabularies are disjoint
//! across clusters, and similar-artist edges point predominantly inside the
//! artist's own cluster. With those guarantees the whole pipeline is
//! verifiable at desk scale: k-means must recover the planted labels,
//! silhouette sweeps must peak at the planted cluster count, and
//! recommendations must beat a random-baseline genre overlap.
//!
//! Generation is single-threaded and fully deterministic given the seed.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::TrackRecord;

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generator config: {0}")]
    Config(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl GenError {
    pub fn kind(&self) -> &'static str {
        match self {
            GenError::Config(_) => "ConfigError",
            GenError::Io { .. } => "IoError",
        }
    }
}

/// Generator parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenConfig {
    pub n_tracks: usize,
    pub n_artists: usize,
    /// Planted cluster count.
    pub n_clusters_true: usize,
    pub n_features: usize,
    /// Ratio of inter-centroid distance to the (unit) within-cluster
    /// standard deviation.
    pub separation: f64,
    /// Constant decoy features carrying no cluster signal; selection should
    /// drop them as zero-variance.
    pub noise_features: usize,
    /// Distinct genre terms per planted cluster.
    pub genre_vocab_per_cluster: usize,
    /// Probability that any single feature value is absent.
    pub missing_rate: f64,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            n_tracks: 1000,
            n_artists: 50,
            n_clusters_true: 4,
            n_features: 54,
            separation: 8.0,
            noise_features: 0,
            genre_vocab_per_cluster: 4,
            missing_rate: 0.0,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        if self.n_tracks == 0 {
            return Err(GenError::Config("n_tracks must be >= 1".into()));
        }
        if self.n_artists == 0 || self.n_artists > self.n_tracks {
            return Err(GenError::Config(
                "n_artists must be >= 1 and <= n_tracks".into(),
            ));
        }
        if self.n_clusters_true == 0 || self.n_clusters_true > self.n_artists {
            return Err(GenError::Config(
                "n_clusters_true must be >= 1 and <= n_artists".into(),
            ));
        }
        if self.n_features == 0 {
            return Err(GenError::Config("n_features must be >= 1".into()));
        }
        if !self.separation.is_finite() || self.separation <= 0.0 {
            return Err(GenError::Config("separation must be > 0".into()));
        }
        if self.noise_features > self.n_features {
            return Err(GenError::Config(
                "noise_features must be <= n_features".into(),
            ));
        }
        if self.genre_vocab_per_cluster == 0 {
            return Err(GenError::Config(
                "genre_vocab_per_cluster must be >= 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return Err(GenError::Config("missing_rate must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Planted label per track and per artist.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub track_labels: Vec<TruthRecord>,
    pub artist_labels: BTreeMap<String, usize>,
}

/// One sidecar line: which cluster a track was planted in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub track_id: String,
    pub planted_label: usize,
}

fn feature_name(i: usize) -> String {
    format!("feat_{i:03}")
}

fn noise_name(i: usize) -> String {
    format!("noise_{i:03}")
}

/// Centroid coordinate for planted cluster `label` in informative feature
/// `j`: clusters sit on scaled axis vectors, so any two centroids are at
/// least `separation` apart.
fn centroid_component(label: usize, j: usize, informative: usize, separation: f64) -> f64 {
    if informative == 0 {
        return 0.0;
    }
    let axis = label % informative;
    let ring = (label / informative + 1) as f64;
    if j == axis {
        separation * ring
    } else {
        0.0
    }
}

/// Generate a synthetic dataset plus its ground truth.
pub fn generate(config: &GenConfig) -> Result<(Vec<TrackRecord>, GroundTruth), GenError> {
    config.validate()?;
    let g = config.n_clusters_true;
    let informative = config.n_features - config.noise_features;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");

    // Artists round-robin over clusters, so every cluster owns at least one
    // artist and sizes stay balanced.
    let artist_ids: Vec<String> = (0..config.n_artists).map(|a| format!("AR{a:06}")).collect();
    let artist_cluster: Vec<usize> = (0..config.n_artists).map(|a| a % g).collect();
    let mut cluster_artists: Vec<Vec<usize>> = vec![Vec::new(); g];
    for (a, &c) in artist_cluster.iter().enumerate() {
        cluster_artists[c].push(a);
    }

    // Disjoint genre vocabulary per cluster.
    let vocab: Vec<Vec<String>> = (0..g)
        .map(|c| {
            (0..config.genre_vocab_per_cluster)
                .map(|t| format!("style_{c:02}_{t:02}"))
                .collect()
        })
        .collect();

    let mut records = Vec::with_capacity(config.n_tracks);
    let mut track_labels = Vec::with_capacity(config.n_tracks);
    for i in 0..config.n_tracks {
        let artist = i % config.n_artists;
        let label = artist_cluster[artist];
        let track_id = format!("TR{i:08}");

        let mut features = BTreeMap::new();
        for j in 0..informative {
            let value = centroid_component(label, j, informative, config.separation)
                + normal.sample(&mut rng);
            let missing = config.missing_rate > 0.0 && rng.random::<f64>() < config.missing_rate;
            if !missing {
                features.insert(feature_name(j), value);
            }
        }
        for j in 0..config.noise_features {
            let missing = config.missing_rate > 0.0 && rng.random::<f64>() < config.missing_rate;
            if !missing {
                features.insert(noise_name(j), 0.0);
            }
        }

        let cluster_vocab = &vocab[label];
        let term_count = rng.random_range(1..=cluster_vocab.len());
        let terms: Vec<String> = rand::seq::index::sample(&mut rng, cluster_vocab.len(), term_count)
            .into_iter()
            .map(|t| cluster_vocab[t].clone())
            .collect();

        // Similar-artist edges: ~90% intra-cluster, 10% uniform.
        let mut similar = Vec::new();
        if config.n_artists > 1 {
            let edge_count = rng.random_range(2..=5).min(config.n_artists - 1);
            let peers = &cluster_artists[label];
            for _ in 0..edge_count {
                let intra = rng.random::<f64>() < 0.9 && peers.len() > 1;
                let pick = if intra {
                    loop {
                        let p = peers[rng.random_range(0..peers.len())];
                        if p != artist {
                            break p;
                        }
                    }
                } else {
                    loop {
                        let p = rng.random_range(0..config.n_artists);
                        if p != artist {
                            break p;
                        }
                    }
                };
                similar.push(artist_ids[pick].clone());
            }
        }

        let record = TrackRecord::new(
            track_id.clone(),
            artist_ids[artist].clone(),
            format!("Artist {artist}"),
            format!("Track {i}"),
            terms,
            similar,
            features,
            None,
        )
        .expect("generated records satisfy the invariants");
        records.push(record);
        track_labels.push(TruthRecord {
            track_id,
            planted_label: label,
        });
    }

    let artist_labels = artist_ids
        .iter()
        .cloned()
        .zip(artist_cluster.iter().copied())
        .collect();
    Ok((
        records,
        GroundTruth {
            track_labels,
            artist_labels,
        },
    ))
}

/// Write the ground-truth sidecar JSONL (`track_id`, `planted_label` per
/// line).
pub fn write_truth(path: &Path, truth: &GroundTruth) -> Result<(), GenError> {
    let file = File::create(path).map_err(|e| GenError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut out = BufWriter::new(file);
    for row in &truth.track_labels {
        let line = serde_json::to_string(row).expect("truth row serializes");
        writeln!(out, "{line}").map_err(|e| GenError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
    }
    out.flush().map_err(|e| GenError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Read a ground-truth sidecar back.
pub fn load_truth(path: &Path) -> Result<Vec<TruthRecord>, GenError> {
    let file = File::open(path).map_err(|e| GenError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut rows = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| GenError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let row: TruthRecord = serde_json::from_str(&line)
            .map_err(|e| GenError::Config(format!("malformed truth line: {e}")))?;
        rows.push(row);
    }
    Ok(rows)
}
