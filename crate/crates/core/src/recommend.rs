//! Recommendation queries: map input tracks to clusters, count similar
//! artists across those clusters' members, keep the top-n artists, and
//! return their tracks.
//!
//! Everything is a pure read-only query over an immutable model, index and
//! track store; ordering is fully deterministic (lexicographic tie-breaks
//! on ids after every primary sort key).

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ClusterIndex, KMeansModel, TrackStore};

#[derive(Debug, Error)]
pub enum RecommendError {
    #[error("unknown track {0:?}")]
    UnknownTrack(String),
    #[error("unknown cluster {0}")]
    UnknownCluster(usize),
    #[error("cluster index was built for a different model")]
    IndexMismatch,
    #[error("no input tracks supplied")]
    EmptyInput,
}

impl RecommendError {
    pub fn kind(&self) -> &'static str {
        match self {
            RecommendError::UnknownTrack(_) => "UnknownTrack",
            RecommendError::UnknownCluster(_) => "UnknownCluster",
            RecommendError::IndexMismatch => "IndexMismatch",
            RecommendError::EmptyInput => "EmptyInput",
        }
    }
}

/// Recommendation query parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecommendConfig {
    /// How many of the most frequently occurring similar artists to keep.
    pub top_n_artists: usize,
    pub max_songs: usize,
    /// Drop tracks by the input tracks' own artists from the candidate
    /// pool.
    pub exclude_input_artists: bool,
}

impl Default for RecommendConfig {
    fn default() -> Self {
        Self {
            top_n_artists: 5,
            max_songs: 10,
            exclude_input_artists: false,
        }
    }
}

/// One recommended track.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub track_id: String,
    pub artist_id: String,
    pub title: String,
    pub artist_name: String,
    pub source_cluster: usize,
    /// Similar-artist count that promoted this track's artist.
    pub artist_support: usize,
    /// Jaccard overlap between this track's genre terms and the union of
    /// the input tracks' terms.
    pub genre_overlap: f64,
}

/// Count, over every track in the given clusters' member lists, how often
/// each artist id appears in a `similar_artists` list.
pub fn count_similar_artists(
    index: &ClusterIndex,
    store: &TrackStore,
    clusters: &BTreeSet<usize>,
) -> Result<BTreeMap<String, usize>, RecommendError> {
    let mut counts = BTreeMap::new();
    for &c in clusters {
        let members = index
            .members
            .get(c)
            .ok_or(RecommendError::UnknownCluster(c))?;
        for track_id in members {
            let record = store
                .get(track_id)
                .ok_or_else(|| RecommendError::UnknownTrack(track_id.clone()))?;
            for artist in &record.similar_artists {
                *counts.entry(artist.clone()).or_insert(0) += 1;
            }
        }
    }
    Ok(counts)
}

/// The n most frequently occurring artists, sorted by count descending
/// with lexicographic ties; fewer than n are returned when the map is
/// smaller.
pub fn top_n_artists(counts: &BTreeMap<String, usize>, n: usize) -> Vec<String> {
    let mut ranked: Vec<(&String, &usize)> = counts.iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
    ranked.into_iter().take(n).map(|(a, _)| a.clone()).collect()
}

/// Jaccard overlap of two term sets; two empty sets score 0.
pub fn genre_overlap(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// Recommend tracks for a set of input track ids.
///
/// The candidate pool is the union of the input tracks' clusters minus the
/// inputs themselves (and minus the input artists' tracks when configured).
/// Candidates whose artist lands in the top-n similar-artist list are kept,
/// ordered by (artist rank, track id) and truncated to `max_songs`. An
/// empty result is a valid answer.
pub fn recommend(
    model: &KMeansModel,
    index: &ClusterIndex,
    store: &TrackStore,
    input_track_ids: &[String],
    config: &RecommendConfig,
) -> Result<Vec<Recommendation>, RecommendError> {
    if input_track_ids.is_empty() {
        return Err(RecommendError::EmptyInput);
    }
    if index.model_id != model.content_hash() {
        return Err(RecommendError::IndexMismatch);
    }

    let mut clusters = BTreeSet::new();
    let mut input_ids = HashSet::new();
    let mut input_artists = HashSet::new();
    let mut input_terms = BTreeSet::new();
    for id in input_track_ids {
        let cluster = index
            .cluster_of(id)
            .ok_or_else(|| RecommendError::UnknownTrack(id.clone()))?;
        let record = store
            .get(id)
            .ok_or_else(|| RecommendError::UnknownTrack(id.clone()))?;
        clusters.insert(cluster);
        input_ids.insert(id.as_str());
        input_artists.insert(record.artist_id.clone());
        input_terms.extend(record.artist_terms.iter().cloned());
    }

    let counts = count_similar_artists(index, store, &clusters)?;
    let chosen = top_n_artists(&counts, config.top_n_artists);
    let rank: BTreeMap<&str, usize> = chosen
        .iter()
        .enumerate()
        .map(|(r, a)| (a.as_str(), r))
        .collect();

    let mut picks: Vec<(usize, Recommendation)> = Vec::new();
    for &c in &clusters {
        for track_id in &index.members[c] {
            if input_ids.contains(track_id.as_str()) {
                continue;
            }
            let record = store
                .get(track_id)
                .ok_or_else(|| RecommendError::UnknownTrack(track_id.clone()))?;
            if config.exclude_input_artists && input_artists.contains(&record.artist_id) {
                continue;
            }
            let Some(&artist_rank) = rank.get(record.artist_id.as_str()) else {
                continue;
            };
            let terms: BTreeSet<String> = record.artist_terms.iter().cloned().collect();
            picks.push((
                artist_rank,
                Recommendation {
                    track_id: record.track_id.clone(),
                    artist_id: record.artist_id.clone(),
                    title: record.title.clone(),
                    artist_name: record.artist_name.clone(),
                    source_cluster: c,
                    artist_support: counts[&record.artist_id],
                    genre_overlap: genre_overlap(&terms, &input_terms),
                },
            ));
        }
    }
    picks.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.track_id.cmp(&b.1.track_id)));
    Ok(picks
        .into_iter()
        .take(config.max_songs)
        .map(|(_, rec)| rec)
        .collect())
}
