//! K-means fitting and cluster assignment.
//!
//! Lloyd's algorithm with k-means++ seeding is the default; a mini-batch
//! variant with per-centroid learning rates is available for large inputs.
//! Fits are deterministic given (config, matrix): every random draw flows
//! from the config seed, and the data-parallel assignment step accumulates
//! per-chunk partial sums that are reduced in ascending chunk order, so the
//! result is bit-identical for any worker count.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ClusterIndex, FeatureMatrix, KMeansModel};
use crate::seed::derive_seed;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("cannot fit {k} clusters to {n} rows")]
    TooFewPoints { n: usize, k: usize },
    #[error("invalid fit config: {0}")]
    InvalidConfig(String),
    #[error("matrix schema does not match the model schema")]
    SchemaMismatch,
}

impl ClusterError {
    pub fn kind(&self) -> &'static str {
        match self {
            ClusterError::TooFewPoints { .. } => "TooFewPoints",
            ClusterError::InvalidConfig(_) => "InvalidConfig",
            ClusterError::SchemaMismatch => "SchemaMismatch",
        }
    }
}

/// Fit algorithm variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Lloyd,
    MiniBatch,
}

/// K-means fit parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitConfig {
    pub k: usize,
    pub max_iterations: usize,
    /// Relative centroid-shift threshold for convergence.
    pub tolerance: f64,
    pub seed: u64,
    /// Independent restarts; the fit with the lowest inertia wins.
    pub n_init: usize,
    pub variant: Variant,
    /// Mini-batch size (clamped to the dataset size).
    pub batch_size: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            k: 8,
            max_iterations: 100,
            tolerance: 1e-4,
            seed: 0,
            n_init: 4,
            variant: Variant::Lloyd,
            batch_size: 1024,
        }
    }
}

impl FitConfig {
    pub fn with_k(k: usize) -> Self {
        Self {
            k,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ClusterError> {
        if self.k == 0 {
            return Err(ClusterError::InvalidConfig("k must be >= 1".into()));
        }
        if self.max_iterations == 0 {
            return Err(ClusterError::InvalidConfig(
                "max_iterations must be >= 1".into(),
            ));
        }
        if !self.tolerance.is_finite() || self.tolerance < 0.0 {
            return Err(ClusterError::InvalidConfig(
                "tolerance must be a nonnegative real".into(),
            ));
        }
        if self.n_init == 0 {
            return Err(ClusterError::InvalidConfig("n_init must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(ClusterError::InvalidConfig(
                "batch_size must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// One Lloyd iteration record: the inertia observed at the assignment step
/// and the centroid shift produced by the following update step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub inertia: f64,
    pub max_shift: f64,
}

/// Iteration trace of the winning restart. Empty for mini-batch fits,
/// whose per-iteration objective is not tracked.
pub type FitTrace = Vec<TraceRow>;

/// Rows per parallel chunk in assignment and prediction steps; fixed so the
/// reduction order (and the floating-point result) is worker-independent.
const ASSIGN_CHUNK: usize = 2048;

#[inline]
fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut sum = 0.0;
    for (x, y) in a.iter().zip(b) {
        let diff = x - y;
        sum += diff * diff;
    }
    sum
}

/// Nearest centroid by squared Euclidean distance; ties resolve to the
/// lowest cluster index.
#[inline]
fn nearest(row: &[f64], centroids: &[f64], d: usize, k: usize) -> (usize, f64) {
    let mut best = 0;
    let mut best_d2 = f64::INFINITY;
    for c in 0..k {
        let d2 = squared_distance(row, &centroids[c * d..(c + 1) * d]);
        if d2 < best_d2 {
            best_d2 = d2;
            best = c;
        }
    }
    (best, best_d2)
}

struct AssignResult {
    assignments: Vec<usize>,
    /// Squared distance of each row to its assigned centroid.
    d2: Vec<f64>,
    inertia: f64,
    sums: Vec<f64>,
    counts: Vec<usize>,
}

/// Data-parallel assignment step with deterministic chunked reduction.
fn assign_step(data: &[f64], d: usize, centroids: &[f64], k: usize) -> AssignResult {
    struct Partial {
        assignments: Vec<usize>,
        d2: Vec<f64>,
        inertia: f64,
        sums: Vec<f64>,
        counts: Vec<usize>,
    }
    let partials: Vec<Partial> = data
        .par_chunks(ASSIGN_CHUNK * d)
        .map(|rows| {
            let mut p = Partial {
                assignments: Vec::with_capacity(rows.len() / d),
                d2: Vec::with_capacity(rows.len() / d),
                inertia: 0.0,
                sums: vec![0.0; k * d],
                counts: vec![0; k],
            };
            for row in rows.chunks_exact(d) {
                let (c, d2) = nearest(row, centroids, d, k);
                p.assignments.push(c);
                p.d2.push(d2);
                p.inertia += d2;
                p.counts[c] += 1;
                for (s, x) in p.sums[c * d..(c + 1) * d].iter_mut().zip(row) {
                    *s += x;
                }
            }
            p
        })
        .collect();

    let n = data.len() / d;
    let mut out = AssignResult {
        assignments: Vec::with_capacity(n),
        d2: Vec::with_capacity(n),
        inertia: 0.0,
        sums: vec![0.0; k * d],
        counts: vec![0; k],
    };
    for p in partials {
        out.assignments.extend(p.assignments);
        out.d2.extend(p.d2);
        out.inertia += p.inertia;
        for (s, x) in out.sums.iter_mut().zip(&p.sums) {
            *s += x;
        }
        for (c, x) in out.counts.iter_mut().zip(&p.counts) {
            *c += x;
        }
    }
    out
}

/// Seeded k-means++ initialization: the first centroid is uniform, each
/// further one is drawn with probability proportional to the squared
/// distance from the nearest chosen centroid.
fn kmeans_plus_plus(data: &[f64], d: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = data.len() / d;
    let mut centroids = Vec::with_capacity(k * d);
    let mut chosen = Vec::with_capacity(k);
    let first = rng.random_range(0..n);
    centroids.extend_from_slice(&data[first * d..(first + 1) * d]);
    chosen.push(first);

    let mut d2: Vec<f64> = data
        .par_chunks(d)
        .map(|row| squared_distance(row, &centroids[0..d]))
        .collect();

    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let u = rng.random::<f64>() * total;
            let mut cum = 0.0;
            let mut idx = n - 1;
            for (i, w) in d2.iter().enumerate() {
                cum += w;
                if cum > u {
                    idx = i;
                    break;
                }
            }
            idx
        } else {
            // Every remaining row coincides with a chosen centroid; fall
            // back to the lowest unchosen index.
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        let start = centroids.len();
        centroids.extend_from_slice(&data[idx * d..(idx + 1) * d]);
        chosen.push(idx);
        let new_centroid = centroids[start..start + d].to_vec();
        d2.par_iter_mut()
            .zip(data.par_chunks(d))
            .for_each(|(best, row)| {
                let nd = squared_distance(row, &new_centroid);
                if nd < *best {
                    *best = nd;
                }
            });
    }
    centroids
}

/// Relative shift between centroid generations:
/// `max_c ||new_c - old_c|| / (||old_c|| + 1e-12)`.
fn max_relative_shift(old: &[f64], new: &[f64], d: usize, k: usize) -> f64 {
    let mut max_shift = 0.0f64;
    for c in 0..k {
        let o = &old[c * d..(c + 1) * d];
        let n = &new[c * d..(c + 1) * d];
        let shift = squared_distance(o, n).sqrt();
        let norm = o.iter().map(|x| x * x).sum::<f64>().sqrt();
        max_shift = max_shift.max(shift / (norm + 1e-12));
    }
    max_shift
}

/// Give every empty cluster the row currently farthest from its assigned
/// centroid (ties resolve to the lowest row index). Deterministic, and
/// each repair consumes its row so two empty clusters never pick the same
/// one.
fn repair_empty_clusters(
    centroids: &mut [f64],
    counts: &[usize],
    data: &[f64],
    d: usize,
    d2: &mut [f64],
) {
    for c in 0..counts.len() {
        if counts[c] > 0 {
            continue;
        }
        let mut far = 0;
        let mut far_d2 = f64::NEG_INFINITY;
        for (i, &dist) in d2.iter().enumerate() {
            if dist > far_d2 {
                far_d2 = dist;
                far = i;
            }
        }
        centroids[c * d..(c + 1) * d].copy_from_slice(&data[far * d..(far + 1) * d]);
        d2[far] = f64::NEG_INFINITY;
    }
}

struct FitOutcome {
    centroids: Vec<f64>,
    iterations_run: usize,
    converged: bool,
    trace: FitTrace,
}

fn lloyd(data: &[f64], d: usize, init: Vec<f64>, config: &FitConfig) -> FitOutcome {
    let k = config.k;
    let mut centroids = init;
    let mut trace: FitTrace = Vec::new();
    let mut converged = false;
    let mut iterations_run = 0;

    for iteration in 1..=config.max_iterations {
        let mut step = assign_step(data, d, &centroids, k);
        let mut new_centroids = centroids.clone();
        for c in 0..k {
            if step.counts[c] > 0 {
                let inv = 1.0 / step.counts[c] as f64;
                for (out, s) in new_centroids[c * d..(c + 1) * d]
                    .iter_mut()
                    .zip(&step.sums[c * d..(c + 1) * d])
                {
                    *out = s * inv;
                }
            }
        }
        repair_empty_clusters(&mut new_centroids, &step.counts, data, d, &mut step.d2);
        let max_shift = max_relative_shift(&centroids, &new_centroids, d, k);

        if let Some(prev) = trace.last() {
            debug_assert!(
                step.inertia <= prev.inertia + 1e-9 * prev.inertia.abs().max(1.0),
                "inertia increased: {} -> {}",
                prev.inertia,
                step.inertia
            );
        }
        trace.push(TraceRow {
            iteration,
            inertia: step.inertia,
            max_shift,
        });
        centroids = new_centroids;
        iterations_run = iteration;
        if max_shift < config.tolerance {
            converged = true;
            break;
        }
    }

    FitOutcome {
        centroids,
        iterations_run,
        converged,
        trace,
    }
}

/// Sculley-style mini-batch k-means: per-centroid counts give a 1/count
/// learning rate, so updates shrink as a centroid accumulates evidence.
fn mini_batch(
    data: &[f64],
    d: usize,
    init: Vec<f64>,
    config: &FitConfig,
    rng: &mut ChaCha8Rng,
) -> FitOutcome {
    let k = config.k;
    let n = data.len() / d;
    let batch_size = config.batch_size.min(n);
    let mut centroids = init;
    let mut counts = vec![0usize; k];
    let mut converged = false;
    let mut iterations_run = 0;

    for iteration in 1..=config.max_iterations {
        let mut batch = rand::seq::index::sample(rng, n, batch_size).into_vec();
        batch.sort_unstable();
        let assigned: Vec<usize> = batch
            .iter()
            .map(|&i| nearest(&data[i * d..(i + 1) * d], &centroids, d, k).0)
            .collect();
        let old = centroids.clone();
        for (&i, &c) in batch.iter().zip(&assigned) {
            counts[c] += 1;
            let eta = 1.0 / counts[c] as f64;
            let row = &data[i * d..(i + 1) * d];
            for (ctr, x) in centroids[c * d..(c + 1) * d].iter_mut().zip(row) {
                *ctr += eta * (x - *ctr);
            }
        }
        iterations_run = iteration;
        if max_relative_shift(&old, &centroids, d, k) < config.tolerance {
            converged = true;
            break;
        }
    }

    FitOutcome {
        centroids,
        iterations_run,
        converged,
        trace: Vec::new(),
    }
}

/// Fit k-means and return the winning model together with its iteration
/// trace.
///
/// Runs `n_init` independent restarts (seeds derived from the config seed)
/// and keeps the one with the lowest final inertia; among equal inertias
/// the lowest restart index wins. The model's inertia is computed with a
/// final assignment pass against the returned centroids.
pub fn kmeans_fit_traced(
    matrix: &FeatureMatrix,
    config: &FitConfig,
) -> Result<(KMeansModel, FitTrace), ClusterError> {
    config.validate()?;
    let n = matrix.n_rows();
    let d = matrix.dim();
    let k = config.k;
    if n < k {
        return Err(ClusterError::TooFewPoints { n, k });
    }
    let data = matrix.values();

    let mut best: Option<(f64, KMeansModel, FitTrace)> = None;
    for restart in 0..config.n_init {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, restart as u64));
        let init = kmeans_plus_plus(data, d, k, &mut rng);
        let outcome = match config.variant {
            Variant::Lloyd => lloyd(data, d, init, config),
            Variant::MiniBatch => mini_batch(data, d, init, config, &mut rng),
        };
        let final_pass = assign_step(data, d, &outcome.centroids, k);
        let model = KMeansModel {
            k,
            centroids: outcome
                .centroids
                .chunks_exact(d)
                .map(<[f64]>::to_vec)
                .collect(),
            schema: matrix.schema().clone(),
            inertia: final_pass.inertia,
            iterations_run: outcome.iterations_run,
            seed: config.seed,
            converged: outcome.converged,
        };
        let better = match &best {
            None => true,
            Some((best_inertia, _, _)) => model.inertia < *best_inertia,
        };
        if better {
            best = Some((model.inertia, model, outcome.trace));
        }
    }
    let (_, model, trace) = best.expect("n_init >= 1");
    Ok((model, trace))
}

/// Fit k-means; see [`kmeans_fit_traced`].
pub fn kmeans_fit(matrix: &FeatureMatrix, config: &FitConfig) -> Result<KMeansModel, ClusterError> {
    kmeans_fit_traced(matrix, config).map(|(model, _)| model)
}

/// Assign each row to its nearest centroid; ties resolve to the lowest
/// cluster index.
pub fn kmeans_predict(
    model: &KMeansModel,
    rows: &FeatureMatrix,
) -> Result<Vec<usize>, ClusterError> {
    if !model.schema.compatible(rows.schema()) {
        return Err(ClusterError::SchemaMismatch);
    }
    let d = rows.dim();
    let k = model.k;
    let centroids: Vec<f64> = model.centroids.iter().flatten().copied().collect();
    Ok(rows
        .values()
        .par_chunks(ASSIGN_CHUNK * d)
        .flat_map_iter(|chunk| {
            let centroids = &centroids;
            chunk
                .chunks_exact(d)
                .map(move |row| nearest(row, centroids, d, k).0)
        })
        .collect())
}

/// Build the cluster -> tracks index for a dataset under a model. Member
/// lists preserve matrix row order.
pub fn build_index(
    model: &KMeansModel,
    matrix: &FeatureMatrix,
) -> Result<ClusterIndex, ClusterError> {
    let assignments = kmeans_predict(model, matrix)?;
    let mut members = vec![Vec::new(); model.k];
    let mut map = std::collections::BTreeMap::new();
    for (i, &c) in assignments.iter().enumerate() {
        let id = &matrix.row_ids()[i];
        members[c].push(id.clone());
        map.insert(id.clone(), c);
    }
    Ok(ClusterIndex {
        model_id: model.content_hash(),
        assignments: map,
        members,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FeatureSchema, SelectionSummary};

    fn matrix_1d(values: &[f64]) -> FeatureMatrix {
        let schema = FeatureSchema::new(
            vec![("x".into(), 0.0, 1.0)],
            SelectionSummary::default(),
        )
        .unwrap();
        let ids = (0..values.len()).map(|i| format!("T{i}")).collect();
        FeatureMatrix::new(schema, values.to_vec(), ids).unwrap()
    }

    fn matrix_2d(rows: &[[f64; 2]]) -> FeatureMatrix {
        let schema = FeatureSchema::new(
            vec![("x".into(), 0.0, 1.0), ("y".into(), 0.0, 1.0)],
            SelectionSummary::default(),
        )
        .unwrap();
        let ids = (0..rows.len()).map(|i| format!("T{i}")).collect();
        FeatureMatrix::from_rows(schema, rows.iter().map(|r| r.to_vec()).collect(), ids).unwrap()
    }

    /// Exhaustive k-means oracle: enumerate every labeling of the rows and
    /// return the minimum possible inertia.
    fn exhaustive_best_inertia(data: &[f64], d: usize, k: usize) -> f64 {
        let n = data.len() / d;
        let mut labels = vec![0usize; n];
        let mut best = f64::INFINITY;
        loop {
            let mut sums = vec![0.0f64; k * d];
            let mut counts = vec![0usize; k];
            for (i, &c) in labels.iter().enumerate() {
                counts[c] += 1;
                for j in 0..d {
                    sums[c * d + j] += data[i * d + j];
                }
            }
            let mut cost = 0.0;
            for (i, &c) in labels.iter().enumerate() {
                for j in 0..d {
                    let mean = sums[c * d + j] / counts[c] as f64;
                    let diff = data[i * d + j] - mean;
                    cost += diff * diff;
                }
            }
            best = best.min(cost);

            // Next labeling in base-k counting order.
            let mut pos = 0;
            loop {
                if pos == n {
                    return best;
                }
                labels[pos] += 1;
                if labels[pos] < k {
                    break;
                }
                labels[pos] = 0;
                pos += 1;
            }
        }
    }

    #[test]
    fn two_blob_1d_reaches_global_optimum() {
        let points = [0.0, 1.0, 9.0, 10.0];
        // Oracle: enumerate all 2-labelings of 4 points.
        let optimum = exhaustive_best_inertia(&points, 1, 2);
        assert!((optimum - 1.0).abs() < 1e-12);

        let matrix = matrix_1d(&points);
        let (model, trace) = kmeans_fit_traced(&matrix, &FitConfig::with_k(2)).unwrap();
        assert!((model.inertia - optimum).abs() < 1e-9);
        let mut centers: Vec<f64> = model.centroids.iter().map(|c| c[0]).collect();
        centers.sort_by(f64::total_cmp);
        assert!((centers[0] - 0.5).abs() < 1e-9);
        assert!((centers[1] - 9.5).abs() < 1e-9);
        assert!(model.converged);
        assert!(!trace.is_empty());
    }

    #[test]
    fn k_equals_n_gives_zero_inertia() {
        let points = [1.0, 4.0, -2.0, 7.5, 0.25];
        let matrix = matrix_1d(&points);
        let model = kmeans_fit(&matrix, &FitConfig::with_k(5)).unwrap();
        assert!(model.inertia.abs() < 1e-12);
        let mut centers: Vec<f64> = model.centroids.iter().map(|c| c[0]).collect();
        centers.sort_by(f64::total_cmp);
        let mut expected = points.to_vec();
        expected.sort_by(f64::total_cmp);
        assert_eq!(centers, expected);
    }

    #[test]
    fn k_equals_one_is_the_column_mean() {
        let rows = [[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        let matrix = matrix_2d(&rows);
        let model = kmeans_fit(&matrix, &FitConfig::with_k(1)).unwrap();
        assert!((model.centroids[0][0] - 3.0).abs() < 1e-12);
        assert!((model.centroids[0][1] - 4.0).abs() < 1e-12);
        let expected: f64 = rows
            .iter()
            .map(|r| (r[0] - 3.0).powi(2) + (r[1] - 4.0).powi(2))
            .sum();
        assert!((model.inertia - expected).abs() < 1e-9);
    }

    #[test]
    fn too_few_points_rejected() {
        let matrix = matrix_1d(&[1.0, 2.0]);
        assert!(matches!(
            kmeans_fit(&matrix, &FitConfig::with_k(3)).unwrap_err(),
            ClusterError::TooFewPoints { n: 2, k: 3 }
        ));
    }

    #[test]
    fn invalid_config_rejected() {
        let matrix = matrix_1d(&[1.0, 2.0]);
        for config in [
            FitConfig::with_k(0),
            FitConfig {
                n_init: 0,
                ..FitConfig::with_k(1)
            },
            FitConfig {
                tolerance: f64::NAN,
                ..FitConfig::with_k(1)
            },
        ] {
            assert!(matches!(
                kmeans_fit(&matrix, &config).unwrap_err(),
                ClusterError::InvalidConfig(_)
            ));
        }
    }

    #[test]
    fn predict_matches_brute_force_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows: Vec<[f64; 2]> = (0..100)
            .map(|_| [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)])
            .collect();
        let matrix = matrix_2d(&rows);
        let model = kmeans_fit(&matrix, &FitConfig::with_k(4)).unwrap();
        let predicted = kmeans_predict(&model, &matrix).unwrap();

        // Independent O(n * k * d) scan.
        for (i, row) in rows.iter().enumerate() {
            let mut best = 0;
            let mut best_d2 = f64::INFINITY;
            for (c, ctr) in model.centroids.iter().enumerate() {
                let d2 = (row[0] - ctr[0]).powi(2) + (row[1] - ctr[1]).powi(2);
                if d2 < best_d2 {
                    best_d2 = d2;
                    best = c;
                }
            }
            assert_eq!(predicted[i], best, "row {i}");
        }
    }

    #[test]
    fn predict_tie_breaks_to_lowest_cluster() {
        let matrix = matrix_1d(&[0.0, 2.0, 4.0]);
        let model = KMeansModel {
            k: 3,
            centroids: vec![vec![0.0], vec![4.0], vec![2.0]],
            schema: matrix.schema().clone(),
            inertia: 0.0,
            iterations_run: 0,
            seed: 0,
            converged: true,
        };
        // Row 2.0 is the centroid of cluster 2 (distance 0), row 0 ties
        // nothing; a row at 2.0 would be equidistant from clusters 0 and 1
        // if centroid 2 were absent.
        let assignments = kmeans_predict(&model, &matrix).unwrap();
        assert_eq!(assignments, vec![0, 2, 1]);

        let two_centroids = KMeansModel {
            k: 2,
            centroids: vec![vec![0.0], vec![4.0]],
            ..model
        };
        let assignments = kmeans_predict(&two_centroids, &matrix).unwrap();
        // 2.0 is equidistant from both; the lowest index wins.
        assert_eq!(assignments[1], 0);
    }

    #[test]
    fn schema_mismatch_detected() {
        let matrix = matrix_1d(&[0.0, 1.0]);
        let other = FeatureSchema::new(
            vec![("y".into(), 0.0, 1.0)],
            SelectionSummary::default(),
        )
        .unwrap();
        let model = KMeansModel {
            k: 1,
            centroids: vec![vec![0.0]],
            schema: other,
            inertia: 0.0,
            iterations_run: 0,
            seed: 0,
            converged: true,
        };
        assert!(matches!(
            kmeans_predict(&model, &matrix).unwrap_err(),
            ClusterError::SchemaMismatch
        ));
    }

    #[test]
    fn index_partitions_all_rows() {
        let points = [0.0, 0.5, 9.0, 9.5, 0.25];
        let matrix = matrix_1d(&points);
        let model = kmeans_fit(&matrix, &FitConfig::with_k(2)).unwrap();
        let index = build_index(&model, &matrix).unwrap();
        assert_eq!(index.members.iter().map(Vec::len).sum::<usize>(), 5);
        assert_eq!(index.assignments.len(), 5);
        // Member order follows row order within each cluster.
        for member_list in &index.members {
            let positions: Vec<usize> = member_list
                .iter()
                .map(|id| matrix.row_ids().iter().position(|r| r == id).unwrap())
                .collect();
            assert!(positions.windows(2).all(|w| w[0] < w[1]));
        }
        // Rebuild is identical.
        let again = build_index(&model, &matrix).unwrap();
        assert_eq!(again, index);
    }

    #[test]
    fn index_with_all_rows_in_one_cluster() {
        let matrix = matrix_1d(&[1.0, 1.1, 0.9]);
        let model = KMeansModel {
            k: 2,
            centroids: vec![vec![1.0], vec![100.0]],
            schema: matrix.schema().clone(),
            inertia: 0.0,
            iterations_run: 0,
            seed: 0,
            converged: true,
        };
        let index = build_index(&model, &matrix).unwrap();
        assert_eq!(index.members[0], vec!["T0", "T1", "T2"]);
        assert!(index.members[1].is_empty());
    }

    #[test]
    fn empty_cluster_is_repaired() {
        // Initial centroid 2 at 100 captures nothing; repair must hand it
        // the farthest point (row 0, the lowest index among the 0.25 ties).
        let points = [0.0, 1.0, 10.0, 11.0];
        let config = FitConfig::with_k(3);
        let outcome = lloyd(&points, 1, vec![0.5, 10.5, 100.0], &config);
        assert!((outcome.centroids[2] - 1.0).abs() < 1e-9 || outcome.centroids[2].abs() < 1e-9);

        // Every cluster ends non-empty.
        let matrix = matrix_1d(&points);
        let model = KMeansModel {
            k: 3,
            centroids: outcome.centroids.iter().map(|&c| vec![c]).collect(),
            schema: matrix.schema().clone(),
            inertia: 0.0,
            iterations_run: outcome.iterations_run,
            seed: 0,
            converged: outcome.converged,
        };
        let assignments = kmeans_predict(&model, &matrix).unwrap();
        for c in 0..3 {
            assert!(assignments.contains(&c), "cluster {c} is orphaned");
        }
        // The final partition is {0}/{1}/{10,11} or {0,1} split further;
        // either way inertia is 0.5.
        let final_inertia = assign_step(&points, 1, &outcome.centroids, 3).inertia;
        assert!((final_inertia - 0.5).abs() < 1e-9);
    }

    #[test]
    fn trace_is_monotone_on_random_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<[f64; 2]> = (0..300)
            .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let matrix = matrix_2d(&rows);
        for k in [2, 3, 5, 8] {
            let (_, trace) = kmeans_fit_traced(&matrix, &FitConfig::with_k(k)).unwrap();
            for pair in trace.windows(2) {
                assert!(
                    pair[1].inertia <= pair[0].inertia + 1e-9 * pair[0].inertia.max(1.0),
                    "k={k}: {} -> {}",
                    pair[0].inertia,
                    pair[1].inertia
                );
            }
        }
    }

    #[test]
    fn fitted_centroids_are_distinct_and_inertia_finite() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let rows: Vec<[f64; 2]> = (0..240)
            .map(|i| {
                let center = (i % 3) as f64 * 6.0;
                [
                    center + rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                ]
            })
            .collect();
        let matrix = matrix_2d(&rows);
        for k in [2usize, 3, 5] {
            let model = kmeans_fit(&matrix, &FitConfig::with_k(k)).unwrap();
            assert!(model.inertia.is_finite() && model.inertia >= 0.0);
            for a in 0..k {
                for b in (a + 1)..k {
                    assert_ne!(
                        model.centroids[a], model.centroids[b],
                        "k={k}: centroids {a} and {b} coincide"
                    );
                }
            }
        }
    }

    #[test]
    fn fits_are_deterministic_and_worker_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rows: Vec<[f64; 2]> = (0..500)
            .map(|_| [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)])
            .collect();
        let matrix = matrix_2d(&rows);
        let config = FitConfig::with_k(4);

        let fit_in_pool = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| kmeans_fit(&matrix, &config).unwrap())
        };
        let single = fit_in_pool(1);
        let multi = fit_in_pool(4);
        assert_eq!(single.inertia.to_bits(), multi.inertia.to_bits());
        for (a, b) in single.centroids.iter().zip(&multi.centroids) {
            for (x, y) in a.iter().zip(b) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn small_instances_reach_exhaustive_optimum() {
        // Scaled-down version of the global-optimum recovery check; the
        // acceptance suite runs the full 100-instance budget.
        let mut hits = 0;
        let total = 20;
        for seed in 0..total {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(4..=8);
            let k = rng.random_range(2..=3);
            let data: Vec<f64> = (0..n).map(|_| rng.random_range(-4.0..4.0)).collect();
            let optimum = exhaustive_best_inertia(&data, 1, k);
            let matrix = matrix_1d(&data);
            let config = FitConfig {
                n_init: 16,
                ..FitConfig::with_k(k)
            };
            let model = kmeans_fit(&matrix, &config).unwrap();
            if (model.inertia - optimum).abs() <= 1e-9 * optimum.max(1.0) {
                hits += 1;
            }
        }
        assert!(hits as f64 >= 0.95 * total as f64, "{hits}/{total}");
    }

    #[test]
    fn mini_batch_is_deterministic_and_close_to_lloyd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // Two well-separated blobs.
        let rows: Vec<[f64; 2]> = (0..400)
            .map(|i| {
                let center = if i % 2 == 0 { 0.0 } else { 16.0 };
                [
                    center + rng.random_range(-1.0..1.0),
                    center + rng.random_range(-1.0..1.0),
                ]
            })
            .collect();
        let matrix = matrix_2d(&rows);
        let lloyd_model = kmeans_fit(&matrix, &FitConfig::with_k(2)).unwrap();
        let mb_config = FitConfig {
            variant: Variant::MiniBatch,
            batch_size: 64,
            ..FitConfig::with_k(2)
        };
        let mb_model = kmeans_fit(&matrix, &mb_config).unwrap();
        let again = kmeans_fit(&matrix, &mb_config).unwrap();
        assert_eq!(mb_model.inertia.to_bits(), again.inertia.to_bits());
        assert!(
            mb_model.inertia <= lloyd_model.inertia * 1.10,
            "mini-batch inertia {} vs lloyd {}",
            mb_model.inertia,
            lloyd_model.inertia
        );
    }
}
