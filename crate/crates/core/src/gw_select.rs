//! Unsupervised criterion: Gromov-Wasserstein distance from a feature-subset
//! view of the data to the full data matrix.
//!
//! Rows (optionally subsampled) are treated as a metric measure space under
//! Euclidean distances and uniform weights, once using only the columns of
//! the candidate set and once using all columns. A small GW distance means
//! the subset preserves the metric structure of the full data. The
//! reciprocal of the distance between `T \ {f}` and `T` quantifies how
//! redundant feature `f` is inside `T`.
//!
//! Subsampling is applied after a canonical (lexicographic) row ordering, so
//! results do not depend on the row order of the input file.

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::Dataset;
use crate::distmat::FeatureSet;
use crate::error::{Error, Result};
use crate::ot::{self, GwConfig};
use crate::rng;

/// Outcome of one GW criterion evaluation.
#[derive(Debug, Clone)]
pub struct GwCriterionResult {
    /// Unregularized GW objective between the two views.
    pub gwd: f64,
    pub feature_set: FeatureSet,
    /// Rows actually used after subsampling.
    pub n_used: usize,
    pub config: GwConfig,
    /// False when any scaling subproblem or the outer loop hit its
    /// iteration cap.
    pub converged: bool,
}

impl GwCriterionResult {
    /// JSON-lines record: one line per candidate.
    pub fn record(&self) -> GwRecord<'_> {
        GwRecord {
            feature_set: &self.feature_set,
            gwd: self.gwd,
            n_used: self.n_used,
            converged: self.converged,
            config_hash: config_digest(&self.config),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct GwRecord<'a> {
    pub feature_set: &'a FeatureSet,
    pub gwd: f64,
    pub n_used: usize,
    pub converged: bool,
    pub config_hash: String,
}

/// Stable hex digest of a GW configuration (FNV-1a over its canonical JSON).
pub fn config_digest(cfg: &GwConfig) -> String {
    let json = serde_json::to_string(cfg).expect("config serializes");
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in json.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}

/// Row indices sorted lexicographically by their full feature vector, so the
/// seeded subsample is a function of the data values rather than file order.
fn canonical_row_order(ds: &Dataset) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..ds.n()).collect();
    idx.sort_unstable_by(|&a, &b| {
        for j in 0..ds.d() {
            let ord = ds.x()[[a, j]].total_cmp(&ds.x()[[b, j]]);
            if ord != std::cmp::Ordering::Equal {
                return ord;
            }
        }
        std::cmp::Ordering::Equal
    });
    idx
}

/// The shared seeded row subsample used for both views of a comparison (and
/// across all candidates of a ranking call).
fn shared_rows(ds: &Dataset, cap: usize, seed: u64) -> Vec<usize> {
    let canonical = canonical_row_order(ds);
    let mut stream = rng::stream(seed, rng::SALT_GW_ROWS, 0);
    let positions = rng::sample_without_replacement(&mut stream, canonical.len(), cap);
    positions.into_iter().map(|p| canonical[p]).collect()
}

fn submatrix(ds: &Dataset, rows: &[usize], columns: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((rows.len(), columns.len()));
    for (r, &row) in rows.iter().enumerate() {
        for (c, &col) in columns.iter().enumerate() {
            out[[r, c]] = ds.x()[[row, col]];
        }
    }
    out
}

fn uniform_weights(n: usize) -> Array1<f64> {
    Array1::from_elem(n, 1.0 / n as f64)
}

fn check_cap(cap: usize) -> Result<()> {
    if cap < 2 {
        return Err(Error::InvalidArgument("gw row cap must be >= 2".into()));
    }
    Ok(())
}

/// GW distance between the data restricted to `t` and the full data matrix,
/// on one shared row subsample. Deterministic given `cfg.seed`.
pub fn gw_to_full(
    ds: &Dataset,
    t: &FeatureSet,
    cfg: &GwConfig,
    cap: usize,
) -> Result<GwCriterionResult> {
    check_cap(cap)?;
    t.check_against(ds.d())?;
    let rows = shared_rows(ds, cap, cfg.seed);
    let all: Vec<usize> = (0..ds.d()).collect();
    gw_between_views(ds, &rows, t.indices(), &all, t.clone(), cfg)
}

/// Redundancy of `f` inside `t`: `1 / max(D(X_{t minus f}, X_t), floor)`.
/// Larger is more redundant; exact duplicates saturate at `1/floor`.
pub fn feature_redundancy_gw(
    ds: &Dataset,
    t: &FeatureSet,
    f: usize,
    cfg: &GwConfig,
    cap: usize,
    floor: f64,
) -> Result<f64> {
    if !(floor > 0.0) {
        return Err(Error::InvalidArgument("redundancy floor must be positive".into()));
    }
    if !t.contains(f) {
        return Err(Error::FeatureMembership {
            index: f,
            problem: "is not in",
        });
    }
    check_cap(cap)?;
    t.check_against(ds.d())?;
    let reduced = t.without(f)?; // also rejects |t| == 1
    let rows = shared_rows(ds, cap, cfg.seed);
    let reduced_cols = reduced.indices().to_vec();
    let result = gw_between_views(ds, &rows, &reduced_cols, t.indices(), reduced, cfg)?;
    Ok(1.0 / result.gwd.max(floor))
}

/// Evaluate `gw_to_full` for every candidate on one shared row subsample and
/// return the results in ascending `gwd` order (ties keep input order).
pub fn gw_ranking(
    ds: &Dataset,
    candidates: &[FeatureSet],
    cfg: &GwConfig,
    cap: usize,
) -> Result<Vec<GwCriterionResult>> {
    if candidates.is_empty() {
        return Err(Error::EmptyInput("candidate list"));
    }
    for c in candidates {
        c.check_against(ds.d())?;
    }
    check_cap(cap)?;
    let rows = shared_rows(ds, cap, cfg.seed);
    let all: Vec<usize> = (0..ds.d()).collect();
    let full_view = submatrix(ds, &rows, &all);
    let dy = ot::pairwise_distances(&full_view)?;
    let weights = uniform_weights(rows.len());

    let mut results: Vec<GwCriterionResult> = candidates
        .par_iter()
        .map(|t| {
            let sub = submatrix(ds, &rows, t.indices());
            let dx = ot::pairwise_distances(&sub)?;
            let sol = ot::entropic_gw(&dx, &dy, &weights, &weights, cfg)?;
            Ok(GwCriterionResult {
                gwd: sol.value,
                feature_set: t.clone(),
                n_used: rows.len(),
                config: cfg.clone(),
                converged: sol.converged,
            })
        })
        .collect::<Result<_>>()?;
    // Stable sort: tie groups keep candidate order.
    results.sort_by(|a, b| a.gwd.total_cmp(&b.gwd));
    Ok(results)
}

fn gw_between_views(
    ds: &Dataset,
    rows: &[usize],
    cols_a: &[usize],
    cols_b: &[usize],
    reported_set: FeatureSet,
    cfg: &GwConfig,
) -> Result<GwCriterionResult> {
    let va = submatrix(ds, rows, cols_a);
    let vb = submatrix(ds, rows, cols_b);
    let dx = ot::pairwise_distances(&va)?;
    let dy = ot::pairwise_distances(&vb)?;
    let weights = uniform_weights(rows.len());
    let sol = ot::entropic_gw(&dx, &dy, &weights, &weights, cfg)?;
    Ok(GwCriterionResult {
        gwd: sol.value,
        feature_set: reported_set,
        n_used: rows.len(),
        config: cfg.clone(),
        converged: sol.converged,
    })
}
