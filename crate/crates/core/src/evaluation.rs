//! Model evaluation: silhouette scoring, silhouette-vs-k sweeps, and the
//! staged grid/random search over growing data fractions.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::{kmeans_fit_traced, kmeans_predict, ClusterError, FitConfig};
use crate::features::{build_matrix, fit_scaler, select_features, FeatureError, SelectionConfig};
use crate::ingest::{compute_stats, IngestError};
use crate::model::{FeatureMatrix, TrackRecord};
use crate::seed::derive_seed;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("silhouette requires at least 2 distinct clusters")]
    SingleCluster,
    #[error("silhouette requires at least 2 rows")]
    TooFewPoints,
    #[error("invalid evaluation input: {0}")]
    Input(String),
    #[error("invalid search plan: {0}")]
    Plan(String),
    #[error("fit failed for k={k}: {source}")]
    Fit {
        k: usize,
        #[source]
        source: ClusterError,
    },
    #[error("scoring failed for k={k}: {message}")]
    Score { k: usize, message: String },
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Stats(#[from] IngestError),
}

impl EvalError {
    pub fn kind(&self) -> &'static str {
        match self {
            EvalError::SingleCluster => "SingleCluster",
            EvalError::TooFewPoints => "TooFewPoints",
            EvalError::Input(_) => "InvalidInput",
            EvalError::Plan(_) => "PlanError",
            EvalError::Fit { .. } => "FitError",
            EvalError::Score { .. } => "ScoreError",
            EvalError::Feature(e) => e.kind(),
            EvalError::Stats(e) => e.kind(),
        }
    }
}

/// One evaluated candidate k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub k: usize,
    pub silhouette: f64,
    pub inertia: f64,
    /// Rows used for the silhouette score.
    pub sample_size: usize,
    pub wall_time_ms: u64,
    /// Seed the fit for this k was derived with.
    pub seed: u64,
}

/// Mean silhouette over the evaluated rows.
///
/// `s(i) = (b(i) - a(i)) / max(a(i), b(i))` with `a(i)` the mean distance
/// to the point's own cluster (excluding itself) and `b(i)` the smallest
/// mean distance to another cluster; singletons score 0. When
/// `sample_size` is below the row count, the evaluated rows are a seeded
/// uniform sample without replacement, but distances are always computed
/// against the full matrix, so sampled scores are unbiased per point.
/// `sample_size >= n` (or `None`) evaluates every row and equals the
/// definitional full score exactly.
pub fn silhouette_score(
    matrix: &FeatureMatrix,
    assignments: &[usize],
    sample_size: Option<usize>,
    seed: u64,
) -> Result<f64, EvalError> {
    let n = matrix.n_rows();
    if assignments.len() != n {
        return Err(EvalError::Input(format!(
            "{} assignments for {n} rows",
            assignments.len()
        )));
    }
    if n < 2 {
        return Err(EvalError::TooFewPoints);
    }
    let cluster_count = assignments.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; cluster_count];
    for &c in assignments {
        sizes[c] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(EvalError::SingleCluster);
    }

    let evaluated: Vec<usize> = match sample_size {
        Some(m) if m < n => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut idx = rand::seq::index::sample(&mut rng, n, m).into_vec();
            idx.sort_unstable();
            idx
        }
        _ => (0..n).collect(),
    };

    let d = matrix.dim();
    let data = matrix.values();
    let scores: Vec<f64> = evaluated
        .par_iter()
        .map(|&i| {
            let row_i = &data[i * d..(i + 1) * d];
            let mut sums = vec![0.0f64; cluster_count];
            for (j, row_j) in data.chunks_exact(d).enumerate() {
                let mut d2 = 0.0;
                for (x, y) in row_i.iter().zip(row_j) {
                    let diff = x - y;
                    d2 += diff * diff;
                }
                sums[assignments[j]] += d2.sqrt();
            }
            let own = assignments[i];
            if sizes[own] <= 1 {
                return 0.0;
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let mut b = f64::INFINITY;
            for c in 0..cluster_count {
                if c != own && sizes[c] > 0 {
                    b = b.min(sums[c] / sizes[c] as f64);
                }
            }
            let denom = a.max(b);
            if denom == 0.0 {
                0.0
            } else {
                (b - a) / denom
            }
        })
        .collect();

    Ok(scores.iter().sum::<f64>() / evaluated.len() as f64)
}

/// Fit and score one candidate k with seeds derived from `base_seed`.
fn evaluate_k(
    matrix: &FeatureMatrix,
    k: usize,
    base: &FitConfig,
    base_seed: u64,
    sample_size: Option<usize>,
) -> Result<EvalReport, EvalError> {
    let start = Instant::now();
    let fit_seed = derive_seed(base_seed, k as u64);
    let config = FitConfig {
        k,
        seed: fit_seed,
        ..base.clone()
    };
    let (model, _) = kmeans_fit_traced(matrix, &config).map_err(|e| EvalError::Fit { k, source: e })?;
    let assignments =
        kmeans_predict(&model, matrix).map_err(|e| EvalError::Fit { k, source: e })?;
    let silhouette = silhouette_score(matrix, &assignments, sample_size, derive_seed(fit_seed, 1))
        .map_err(|e| EvalError::Score {
            k,
            message: e.to_string(),
        })?;
    let evaluated = sample_size.map_or(matrix.n_rows(), |m| m.min(matrix.n_rows()));
    Ok(EvalReport {
        k,
        silhouette,
        inertia: model.inertia,
        sample_size: evaluated,
        wall_time_ms: start.elapsed().as_millis() as u64,
        seed: fit_seed,
    })
}

/// Fit and score every candidate k, returning reports in input order.
/// Per-k seeds derive from the base config seed and k, so the sweep is
/// reproducible independent of evaluation order.
pub fn sweep_k(
    matrix: &FeatureMatrix,
    k_values: &[usize],
    fit_base: &FitConfig,
    sample_size: Option<usize>,
) -> Result<Vec<EvalReport>, EvalError> {
    if k_values.is_empty() {
        return Err(EvalError::Input("no k values supplied".into()));
    }
    for &k in k_values {
        if k < 2 {
            return Err(EvalError::Input(format!("k={k} is below 2")));
        }
        if k > matrix.n_rows() {
            return Err(EvalError::Fit {
                k,
                source: ClusterError::TooFewPoints {
                    n: matrix.n_rows(),
                    k,
                },
            });
        }
    }
    k_values
        .iter()
        .map(|&k| evaluate_k(matrix, k, fit_base, fit_base.seed, sample_size))
        .collect()
}

/// Candidate-k source for one search stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum CandidateSet {
    /// Explicit candidate list.
    List(Vec<usize>),
    /// Inclusive range of candidates.
    Range { lo: usize, hi: usize },
}

impl CandidateSet {
    fn materialize(&self) -> Vec<usize> {
        match self {
            CandidateSet::List(ks) => {
                let set: BTreeSet<usize> = ks.iter().copied().collect();
                set.into_iter().collect()
            }
            CandidateSet::Range { lo, hi } => (*lo..=*hi).collect(),
        }
    }

    fn contains(&self, k: usize) -> bool {
        match self {
            CandidateSet::List(ks) => ks.contains(&k),
            CandidateSet::Range { lo, hi } => (*lo..=*hi).contains(&k),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Grid,
    Random,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strategy::Grid => "grid",
            Strategy::Random => "random",
        })
    }
}

/// One stage of a staged search: which data fraction to subsample, how to
/// pick candidates, and the stage's own seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchStage {
    pub fraction: f64,
    pub strategy: Strategy,
    pub candidates: CandidateSet,
    /// Number of candidates a random stage draws (ignored by grid stages).
    pub budget: Option<usize>,
    pub seed: u64,
}

/// A staged search plan: strictly growing fractions ending at the full
/// dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchPlan {
    pub stages: Vec<SearchStage>,
}

impl SearchPlan {
    /// The protocol mirrored by the CLI defaults: grid on 10%, grid on
    /// 25%, random on the full dataset, all over the same candidate range.
    pub fn staged_default(lo: usize, hi: usize, budget: Option<usize>, seed: u64) -> SearchPlan {
        let stage = |t: usize, fraction: f64, strategy: Strategy| SearchStage {
            fraction,
            strategy,
            candidates: CandidateSet::Range { lo, hi },
            budget,
            seed: derive_seed(seed, t as u64),
        };
        SearchPlan {
            stages: vec![
                stage(0, 0.10, Strategy::Grid),
                stage(1, 0.25, Strategy::Grid),
                stage(2, 1.0, Strategy::Random),
            ],
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.stages.is_empty() {
            return Err(EvalError::Plan("plan has no stages".into()));
        }
        let mut prev = 0.0f64;
        for (t, stage) in self.stages.iter().enumerate() {
            if !stage.fraction.is_finite() || stage.fraction <= 0.0 || stage.fraction > 1.0 {
                return Err(EvalError::Plan(format!(
                    "stage {t}: fraction {} outside (0, 1]",
                    stage.fraction
                )));
            }
            if stage.fraction <= prev {
                return Err(EvalError::Plan(format!(
                    "stage {t}: fractions must be strictly increasing"
                )));
            }
            prev = stage.fraction;
            let ks = stage.candidates.materialize();
            if ks.is_empty() {
                return Err(EvalError::Plan(format!("stage {t}: no candidates")));
            }
            if ks.iter().any(|&k| k < 2) {
                return Err(EvalError::Plan(format!(
                    "stage {t}: candidate k below 2"
                )));
            }
            if let CandidateSet::Range { lo, hi } = stage.candidates {
                if lo > hi {
                    return Err(EvalError::Plan(format!("stage {t}: empty range")));
                }
            }
            if stage.strategy == Strategy::Random && stage.budget.is_none() {
                return Err(EvalError::Plan(format!(
                    "stage {t}: random strategy requires a budget"
                )));
            }
            if stage.budget == Some(0) {
                return Err(EvalError::Plan(format!("stage {t}: budget must be >= 1")));
            }
        }
        if (self.stages.last().unwrap().fraction - 1.0).abs() > f64::EPSILON {
            return Err(EvalError::Plan("final stage fraction must be 1.0".into()));
        }
        Ok(())
    }
}

/// Per-stage results of a staged search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageReport {
    pub stage: usize,
    pub fraction: f64,
    pub strategy: Strategy,
    pub reports: Vec<EvalReport>,
}

/// Run the staged search protocol and return the winning k plus per-stage
/// reports.
///
/// Stage t re-runs feature selection and scaling on a seeded uniform
/// subsample of its configured fraction of the records, then evaluates its
/// candidate pool. The first stage's pool comes from its own candidate
/// spec (a grid list/range, or a seeded `budget`-sized random draw from
/// the range). Each later stage starts from the top half (by silhouette)
/// of the previous stage's candidates, filtered to its own candidate spec;
/// a later random stage subsamples that pool down to its budget. The final
/// stage's argmax silhouette wins, with ties broken toward the smaller k.
pub fn staged_search(
    records: &[TrackRecord],
    plan: &SearchPlan,
    selection: &SelectionConfig,
    fit_base: &FitConfig,
) -> Result<(usize, Vec<StageReport>), EvalError> {
    plan.validate()?;
    let n = records.len();
    let mut survivors: Option<Vec<usize>> = None;
    let mut stage_reports = Vec::with_capacity(plan.stages.len());

    for (t, stage) in plan.stages.iter().enumerate() {
        let subset: Vec<TrackRecord> = if (stage.fraction - 1.0).abs() <= f64::EPSILON {
            records.to_vec()
        } else {
            let m = ((stage.fraction * n as f64).ceil() as usize).clamp(1, n);
            let mut rng = ChaCha8Rng::seed_from_u64(stage.seed);
            let mut idx = rand::seq::index::sample(&mut rng, n, m).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| records[i].clone()).collect()
        };

        let stats = compute_stats(&subset)?;
        let report = select_features(&stats, selection)?;
        let schema = fit_scaler(&subset, &report.kept)?.with_provenance(report.summary());
        let matrix = build_matrix(&subset, &schema);

        let mut pool: Vec<usize> = match &survivors {
            None => match stage.strategy {
                Strategy::Grid => stage.candidates.materialize(),
                Strategy::Random => {
                    let all = stage.candidates.materialize();
                    draw_pool(&all, stage.budget.unwrap(), stage.seed)
                }
            },
            Some(prev) => {
                let filtered: Vec<usize> = prev
                    .iter()
                    .copied()
                    .filter(|&k| stage.candidates.contains(k))
                    .collect();
                if filtered.is_empty() {
                    return Err(EvalError::Plan(format!(
                        "stage {t}: no surviving candidate matches the stage's candidate set"
                    )));
                }
                match stage.strategy {
                    Strategy::Grid => filtered,
                    Strategy::Random => draw_pool(&filtered, stage.budget.unwrap(), stage.seed),
                }
            }
        };
        pool.sort_unstable();

        let stage_base_seed = derive_seed(fit_base.seed, t as u64);
        let reports: Vec<EvalReport> = pool
            .iter()
            .map(|&k| evaluate_k(&matrix, k, fit_base, stage_base_seed, None))
            .collect::<Result<_, _>>()?;

        // Keep the top half by silhouette (ties toward smaller k, which
        // reports are already ordered by).
        let keep = pool.len().div_ceil(2);
        let mut ranked: Vec<&EvalReport> = reports.iter().collect();
        ranked.sort_by(|a, b| b.silhouette.total_cmp(&a.silhouette).then(a.k.cmp(&b.k)));
        survivors = Some(ranked.iter().take(keep).map(|r| r.k).collect());

        stage_reports.push(StageReport {
            stage: t,
            fraction: stage.fraction,
            strategy: stage.strategy,
            reports,
        });
    }

    let last = stage_reports.last().expect("plan has stages");
    let best = last
        .reports
        .iter()
        .max_by(|a, b| a.silhouette.total_cmp(&b.silhouette).then(b.k.cmp(&a.k)))
        .expect("final stage evaluated at least one candidate");
    Ok((best.k, stage_reports))
}

/// Seeded draw of `budget` candidates without replacement.
fn draw_pool(from: &[usize], budget: usize, seed: u64) -> Vec<usize> {
    if budget >= from.len() {
        return from.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x7001));
    rand::seq::index::sample(&mut rng, from.len(), budget)
        .into_iter()
        .map(|i| from[i])
        .collect()
}
