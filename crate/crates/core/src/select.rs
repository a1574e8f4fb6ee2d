//! Selection strategies over the supervised and unsupervised criteria:
//! single-feature disparity ranking, greedy forward selection, naive random
//! search, and the incremental two-stage relevance-minus-redundancy score.
//!
//! Ties are always broken toward the lowest feature index, and random search
//! draws all trials from one sequential stream, so every strategy is fully
//! deterministic given its seed.

use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::Dataset;
use crate::distmat::{
    self, class_distance_matrix, frobenius_utility, matrix_similarity, single_feature_matrix,
    ClassDistanceMatrix, DistmatConfig, FeatureSet,
};
use crate::error::{Error, Result};
use crate::gw_select;
use crate::ot::GwConfig;
use crate::rng;

/// Which score drives the search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// Maximize the squared Frobenius norm of the class distance matrix.
    FrobeniusSupervised,
    /// Minimize the GW distance between the subset view and the full data.
    GwUnsupervised,
    /// Incremental `relevance - lambda * redundancy` score.
    TwoStage,
}

/// How the search explores subsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Rank features by standalone utility and take the top `m`.
    Rank,
    /// Grow the set one feature at a time, best augmented criterion first.
    Greedy,
    /// Sample `n_trials` subsets of size `m` and keep the best.
    RandomSearch,
}

/// Full parameterization of a selection run.
#[derive(Debug, Clone, Serialize)]
pub struct SelectionConfig {
    pub criterion: Criterion,
    /// Target subset size.
    pub m: usize,
    pub strategy: Strategy,
    /// Trial count for random search.
    pub n_trials: usize,
    /// Redundancy weight of the two-stage score.
    pub lambda: f64,
    pub seed: u64,
    pub distmat: DistmatConfig,
    pub gw: GwConfig,
    /// Row cap of GW criterion evaluations.
    pub gw_cap: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            criterion: Criterion::FrobeniusSupervised,
            m: 10,
            strategy: Strategy::Rank,
            n_trials: 1000,
            lambda: 1.0,
            seed: 0,
            distmat: DistmatConfig::default(),
            gw: GwConfig::default(),
            gw_cap: 300,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self, d: usize) -> Result<()> {
        if self.m < 1 {
            return Err(Error::InvalidArgument("subset size m must be >= 1".into()));
        }
        if self.m > d {
            return Err(Error::InvalidArgument(format!(
                "subset size m = {} exceeds feature count d = {d}",
                self.m
            )));
        }
        if self.strategy == Strategy::RandomSearch && self.n_trials < 1 {
            return Err(Error::InvalidArgument(
                "random search needs n_trials >= 1".into(),
            ));
        }
        if self.strategy == Strategy::RandomSearch && self.criterion == Criterion::TwoStage {
            return Err(Error::InvalidArgument(
                "the two-stage score is incremental; use rank or greedy".into(),
            ));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidArgument("lambda must be >= 0".into()));
        }
        Ok(())
    }
}

/// One evaluated step or trial: the subset under consideration and its score.
#[derive(Debug, Clone, Serialize)]
pub struct TraceEntry {
    pub features: Vec<usize>,
    pub score: f64,
}

/// Outcome of a selection run.
#[derive(Debug, Clone, Serialize)]
pub struct SelectionResult {
    pub chosen: FeatureSet,
    /// Per-step (greedy, two-stage) or per-trial (random search) scores.
    pub score_trace: Vec<TraceEntry>,
    pub criterion: Criterion,
    pub strategy: Strategy,
    /// Wall-clock duration of the run; excluded from report payload
    /// comparisons.
    #[serde(skip)]
    pub wall_time: std::time::Duration,
}

/// Run the configured strategy.
pub fn run_selection(ds: &Dataset, cfg: &SelectionConfig) -> Result<SelectionResult> {
    cfg.validate(ds.d())?;
    match (cfg.criterion, cfg.strategy) {
        (Criterion::TwoStage, _) => two_stage_select(ds, cfg),
        (_, Strategy::Rank) => rank_select(ds, cfg),
        (_, Strategy::Greedy) => greedy_forward(ds, cfg),
        (_, Strategy::RandomSearch) => random_search(ds, cfg),
    }
}

/// Features ordered by descending standalone disparity utility (squared
/// Frobenius norm of the single-feature class distance matrix), ties broken
/// by ascending index.
pub fn rank_by_disparity(ds: &Dataset) -> Result<Vec<(usize, f64)>> {
    let matrices = single_feature_matrices(ds)?;
    let mut scored: Vec<(usize, f64)> = matrices
        .iter()
        .enumerate()
        .map(|(j, m)| (j, frobenius_utility(m)))
        .collect();
    sort_descending(&mut scored);
    Ok(scored)
}

/// All single-feature matrices, computed in parallel, indexed by feature.
pub(crate) fn single_feature_matrices(ds: &Dataset) -> Result<Vec<ClassDistanceMatrix>> {
    (0..ds.d())
        .into_par_iter()
        .map(|j| single_feature_matrix(ds, j))
        .collect()
}

fn sort_descending(scored: &mut [(usize, f64)]) {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
}

fn rank_select(ds: &Dataset, cfg: &SelectionConfig) -> Result<SelectionResult> {
    let started = std::time::Instant::now();
    let (trace, chosen_indices) = match cfg.criterion {
        Criterion::FrobeniusSupervised => {
            let ranked = rank_by_disparity(ds)?;
            let trace: Vec<TraceEntry> = ranked
                .iter()
                .map(|&(j, score)| TraceEntry {
                    features: vec![j],
                    score,
                })
                .collect();
            let chosen = ranked[..cfg.m].iter().map(|&(j, _)| j).collect();
            (trace, chosen)
        }
        Criterion::GwUnsupervised => {
            // Standalone utility of a feature: how close its one-column view
            // stays to the full data. Ascending gwd is descending utility.
            let candidates: Vec<FeatureSet> = (0..ds.d())
                .map(|j| FeatureSet::single(j, ds.d()))
                .collect::<Result<_>>()?;
            let ranked = gw_select::gw_ranking(ds, &candidates, &cfg.gw, cfg.gw_cap)?;
            let trace: Vec<TraceEntry> = ranked
                .iter()
                .map(|r| TraceEntry {
                    features: r.feature_set.indices().to_vec(),
                    score: r.gwd,
                })
                .collect();
            let chosen = ranked[..cfg.m]
                .iter()
                .map(|r| r.feature_set.indices()[0])
                .collect();
            (trace, chosen)
        }
        Criterion::TwoStage => unreachable!("dispatched in run_selection"),
    };
    Ok(SelectionResult {
        chosen: FeatureSet::new(chosen_indices, ds.d())?,
        score_trace: trace,
        criterion: cfg.criterion,
        strategy: Strategy::Rank,
        wall_time: started.elapsed(),
    })
}

/// Greedy forward selection: start empty, repeatedly add the feature whose
/// augmented set scores best (max utility or min gwd), ties to the lowest
/// index. The trace records each step's augmented-set score, so prefixes of
/// the result are the greedy selections for every smaller size.
pub fn greedy_forward(ds: &Dataset, cfg: &SelectionConfig) -> Result<SelectionResult> {
    cfg.validate(ds.d())?;
    let started = std::time::Instant::now();
    let mut current: Vec<usize> = Vec::new();
    let mut trace = Vec::new();
    for _ in 0..cfg.m {
        let candidates: Vec<usize> =
            (0..ds.d()).filter(|j| !current.contains(j)).collect();
        let scored: Vec<(usize, f64)> = candidates
            .par_iter()
            .map(|&j| {
                let mut augmented = current.clone();
                augmented.push(j);
                augmented.sort_unstable();
                let set = FeatureSet::new(augmented, ds.d())?;
                let score = match cfg.criterion {
                    Criterion::FrobeniusSupervised => {
                        frobenius_utility(&class_distance_matrix(ds, &set, &cfg.distmat)?)
                    }
                    Criterion::GwUnsupervised => {
                        gw_select::gw_to_full(ds, &set, &cfg.gw, cfg.gw_cap)?.gwd
                    }
                    Criterion::TwoStage => unreachable!("dispatched in run_selection"),
                };
                Ok((j, score))
            })
            .collect::<Result<_>>()?;
        let maximize = cfg.criterion == Criterion::FrobeniusSupervised;
        let (best_feature, best_score) = pick_best(&scored, maximize);
        current.push(best_feature);
        let mut snapshot = current.clone();
        snapshot.sort_unstable();
        trace.push(TraceEntry {
            features: snapshot,
            score: best_score,
        });
    }
    current.sort_unstable();
    Ok(SelectionResult {
        chosen: FeatureSet::new(current, ds.d())?,
        score_trace: trace,
        criterion: cfg.criterion,
        strategy: Strategy::Greedy,
        wall_time: started.elapsed(),
    })
}

fn pick_best(scored: &[(usize, f64)], maximize: bool) -> (usize, f64) {
    let mut best = scored[0];
    for &(j, s) in &scored[1..] {
        let improves = if maximize { s > best.1 } else { s < best.1 };
        if improves || (s == best.1 && j < best.0) {
            best = (j, s);
        }
    }
    best
}

/// Naive random search: sample `n_trials` size-`m` subsets uniformly (one
/// sequential seeded stream), score each, keep the best. Repeated subsets
/// are scored once and replayed from a cache; the trace still holds one
/// entry per trial.
pub fn random_search(ds: &Dataset, cfg: &SelectionConfig) -> Result<SelectionResult> {
    cfg.validate(ds.d())?;
    let started = std::time::Instant::now();
    let mut stream = rng::stream(cfg.seed, rng::SALT_RANDOM_SEARCH, 0);
    let mut cache: std::collections::HashMap<Vec<usize>, f64> = std::collections::HashMap::new();
    let maximize = cfg.criterion == Criterion::FrobeniusSupervised;
    let mut trace = Vec::with_capacity(cfg.n_trials);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..cfg.n_trials {
        let indices = rng::sample_without_replacement(&mut stream, ds.d(), cfg.m);
        let score = match cache.get(&indices) {
            Some(&s) => s,
            None => {
                let set = FeatureSet::new(indices.clone(), ds.d())?;
                let s = match cfg.criterion {
                    Criterion::FrobeniusSupervised => {
                        frobenius_utility(&class_distance_matrix(ds, &set, &cfg.distmat)?)
                    }
                    Criterion::GwUnsupervised => {
                        gw_select::gw_to_full(ds, &set, &cfg.gw, cfg.gw_cap)?.gwd
                    }
                    Criterion::TwoStage => unreachable!("rejected by validate"),
                };
                cache.insert(indices.clone(), s);
                s
            }
        };
        trace.push(TraceEntry {
            features: indices.clone(),
            score,
        });
        let improves = match &best {
            None => true,
            Some((_, b)) => {
                if maximize {
                    score > *b
                } else {
                    score < *b
                }
            }
        };
        if improves {
            best = Some((indices, score));
        }
    }
    let (chosen, _) = best.expect("n_trials >= 1");
    Ok(SelectionResult {
        chosen: FeatureSet::new(chosen, ds.d())?,
        score_trace: trace,
        criterion: cfg.criterion,
        strategy: Strategy::RandomSearch,
        wall_time: started.elapsed(),
    })
}

/// Incremental two-stage selection: at each step add the feature maximizing
/// `relevance(f) - lambda * redundancy(f, selected)`, where relevance is the
/// standalone disparity utility and redundancy the scaled distance-matrix
/// similarity to the most similar selected feature (0 for the empty set, so
/// the first pick is pure relevance).
pub fn two_stage_select(ds: &Dataset, cfg: &SelectionConfig) -> Result<SelectionResult> {
    cfg.validate(ds.d())?;
    let started = std::time::Instant::now();
    let matrices = single_feature_matrices(ds)?;
    let utilities: Vec<f64> = matrices.iter().map(frobenius_utility).collect();

    let mut chosen: Vec<usize> = Vec::new();
    let mut trace = Vec::new();
    for _ in 0..cfg.m {
        let mut best: Option<(usize, f64)> = None;
        for f in 0..ds.d() {
            if chosen.contains(&f) {
                continue;
            }
            let mut redundancy = 0.0f64;
            for &g in &chosen {
                // A zero-disparity matrix on either side has no direction to
                // compare; it contributes no redundancy.
                match matrix_similarity(&matrices[f], &matrices[g], true) {
                    Ok(s) => redundancy = redundancy.max(s),
                    Err(Error::DegenerateMatrix(_)) => {}
                    Err(e) => return Err(e),
                }
            }
            let score = utilities[f] - cfg.lambda * redundancy;
            let improves = match best {
                None => true,
                Some((bj, bs)) => score > bs || (score == bs && f < bj),
            };
            if improves {
                best = Some((f, score));
            }
        }
        let (f, score) = best.expect("m <= d leaves a candidate");
        chosen.push(f);
        trace.push(TraceEntry {
            features: vec![f],
            score,
        });
    }
    Ok(SelectionResult {
        chosen: FeatureSet::new(chosen, ds.d())?,
        score_trace: trace,
        criterion: Criterion::TwoStage,
        strategy: cfg.strategy,
        wall_time: started.elapsed(),
    })
}

/// Expose the distmat aggregation flag on the two-stage path for callers
/// that want mean instead of max redundancy.
pub fn redundancy_of(
    ds: &Dataset,
    f: usize,
    t: &FeatureSet,
    scaled: bool,
) -> Result<f64> {
    distmat::redundancy_to_set(ds, f, t, scaled)
}
