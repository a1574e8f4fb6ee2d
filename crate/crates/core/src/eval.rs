//! Downstream evaluation harness: a self-contained k-NN classifier,
//! accuracy-versus-subset-size curves over repeated splits, a variance-ratio
//! ranking baseline, and the table pairing GW distances with downstream
//! accuracy.

use serde::Serialize;

use crate::dataset::{partition_by_class, train_test_split, Dataset, SplitSpec};
use crate::distmat::FeatureSet;
use crate::error::{Error, Result};
use crate::gw_select;
use crate::ot::GwConfig;
use crate::rng;
use crate::select::{self, Criterion, SelectionConfig, Strategy};

/// Top-1 accuracy of a k-nearest-neighbor vote on the columns of `t`.
///
/// Distance ties are broken toward the lower train row index; vote ties
/// toward the earlier class in the class table. `k` must be odd so binary
/// votes cannot tie.
pub fn knn_accuracy(train: &Dataset, test: &Dataset, t: &FeatureSet, k: usize) -> Result<f64> {
    let train_labels = train.labels().ok_or(Error::MissingLabels)?;
    let test_labels = test.labels().ok_or(Error::MissingLabels)?;
    if train.class_names() != test.class_names() {
        return Err(Error::ClassOrderMismatch);
    }
    if k == 0 || k % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "k must be odd and positive, got {k}"
        )));
    }
    if k > train.n() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the {} training rows",
            train.n()
        )));
    }
    t.check_against(train.d().min(test.d()))?;

    let n_classes = train.class_names().len();
    let mut correct = 0usize;
    let mut scratch: Vec<(f64, usize)> = Vec::with_capacity(train.n());
    for i in 0..test.n() {
        scratch.clear();
        for r in 0..train.n() {
            let mut dist = 0.0;
            for &col in t.indices() {
                let diff = test.x()[[i, col]] - train.x()[[r, col]];
                dist += diff * diff;
            }
            scratch.push((dist, r));
        }
        scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut votes = vec![0usize; n_classes];
        for &(_, r) in scratch.iter().take(k) {
            votes[train_labels[r]] += 1;
        }
        let winner = votes
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(class, _)| class)
            .expect("at least one class");
        if winner == test_labels[i] {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.n() as f64)
}

/// A named selection method evaluated by the harness.
#[derive(Debug, Clone, Serialize)]
pub struct MethodSpec {
    pub name: String,
    pub method: EvalMethod,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMethod {
    /// One of the selection strategies of [`crate::select`].
    Selection(SelectionConfig),
    /// The variance-ratio ranking baseline.
    VarianceBaseline,
}

/// Harness parameters for [`accuracy_curve`].
#[derive(Debug, Clone, Serialize)]
pub struct CurveConfig {
    /// Subset sizes, strictly increasing.
    pub sizes: Vec<usize>,
    pub n_repeats: usize,
    /// Neighbor count of the k-NN probe.
    pub k: usize,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for CurveConfig {
    fn default() -> Self {
        Self {
            sizes: vec![10, 20, 30, 40, 50],
            n_repeats: 10,
            k: 5,
            train_fraction: 0.7,
            seed: 0,
        }
    }
}

/// Accuracies per method, size, and repeat, plus the per-repeat split seeds.
#[derive(Debug, Clone, Serialize)]
pub struct AccuracyCurve {
    pub sizes: Vec<usize>,
    pub methods: Vec<String>,
    /// `accuracies[method][size][repeat]`.
    pub accuracies: Vec<Vec<Vec<f64>>>,
    pub n_repeats: usize,
    pub seeds: Vec<u64>,
}

impl AccuracyCurve {
    /// Long-format CSV: `method,size,repeat,accuracy`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("method,size,repeat,accuracy\n");
        for (mi, method) in self.methods.iter().enumerate() {
            for (si, &size) in self.sizes.iter().enumerate() {
                for (rep, acc) in self.accuracies[mi][si].iter().enumerate() {
                    out.push_str(&format!("{method},{size},{rep},{acc}\n"));
                }
            }
        }
        out
    }

    /// Per-(method, size) mean and standard deviation over repeats.
    pub fn summary(&self) -> Vec<CurveSummaryRow> {
        let mut rows = Vec::new();
        for (mi, method) in self.methods.iter().enumerate() {
            for (si, &size) in self.sizes.iter().enumerate() {
                let values = &self.accuracies[mi][si];
                let n = values.len() as f64;
                let mean = values.iter().sum::<f64>() / n;
                let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                rows.push(CurveSummaryRow {
                    method: method.clone(),
                    size,
                    mean,
                    std: var.sqrt(),
                });
            }
        }
        rows
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveSummaryRow {
    pub method: String,
    pub size: usize,
    pub mean: f64,
    pub std: f64,
}

/// Accuracy of each method at each subset size over `n_repeats` shared
/// stratified splits: one split per repeat, identical for every method, with
/// selection run on the training side only.
pub fn accuracy_curve(
    ds: &Dataset,
    methods: &[MethodSpec],
    cfg: &CurveConfig,
) -> Result<AccuracyCurve> {
    if methods.is_empty() {
        return Err(Error::EmptyInput("method list"));
    }
    if cfg.sizes.is_empty() {
        return Err(Error::EmptyInput("size list"));
    }
    if !cfg.sizes.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidArgument(
            "sizes must be strictly increasing".into(),
        ));
    }
    let max_size = *cfg.sizes.last().expect("non-empty");
    if max_size > ds.d() {
        return Err(Error::InvalidArgument(format!(
            "largest size {max_size} exceeds feature count {}",
            ds.d()
        )));
    }
    if cfg.n_repeats < 1 {
        return Err(Error::InvalidArgument("n_repeats must be >= 1".into()));
    }

    let mut accuracies =
        vec![vec![Vec::with_capacity(cfg.n_repeats); cfg.sizes.len()]; methods.len()];
    let mut seeds = Vec::with_capacity(cfg.n_repeats);
    for repeat in 0..cfg.n_repeats {
        let split_seed = rng::mix(cfg.seed, rng::SALT_REPEAT, repeat as u64);
        seeds.push(split_seed);
        let (train, test) = train_test_split(
            ds,
            &SplitSpec {
                train_fraction: cfg.train_fraction,
                seed: split_seed,
                stratified: true,
            },
        )?;
        for (mi, spec) in methods.iter().enumerate() {
            let subsets = select_for_sizes(&train, &spec.method, &cfg.sizes, split_seed)?;
            for (si, subset) in subsets.iter().enumerate() {
                let acc = knn_accuracy(&train, &test, subset, cfg.k)?;
                accuracies[mi][si].push(acc);
            }
        }
    }
    Ok(AccuracyCurve {
        sizes: cfg.sizes.clone(),
        methods: methods.iter().map(|m| m.name.clone()).collect(),
        accuracies,
        n_repeats: cfg.n_repeats,
        seeds,
    })
}

/// One feature set per requested size. Ranking and incremental methods run
/// once at the largest size and reuse prefixes; random search reruns per
/// size. The method seed is re-mixed per repeat so repeats sample fresh
/// randomness while staying reproducible.
fn select_for_sizes(
    train: &Dataset,
    method: &EvalMethod,
    sizes: &[usize],
    repeat_seed: u64,
) -> Result<Vec<FeatureSet>> {
    let max_size = *sizes.last().expect("non-empty");
    match method {
        EvalMethod::VarianceBaseline => {
            let ranked = variance_ratio_baseline(train)?;
            prefixes_of(&ranked, sizes, train.d())
        }
        EvalMethod::Selection(cfg) => {
            let mut cfg = cfg.clone();
            cfg.seed = rng::mix(cfg.seed, rng::SALT_REPEAT, repeat_seed);
            cfg.gw.seed = rng::mix(cfg.gw.seed, rng::SALT_REPEAT, repeat_seed);
            cfg.distmat.seed = rng::mix(cfg.distmat.seed, rng::SALT_REPEAT, repeat_seed);
            match cfg.strategy {
                Strategy::RandomSearch => sizes
                    .iter()
                    .map(|&m| {
                        let sized = SelectionConfig { m, ..cfg.clone() };
                        Ok(select::run_selection(train, &sized)?.chosen)
                    })
                    .collect(),
                Strategy::Rank | Strategy::Greedy => {
                    let sized = SelectionConfig {
                        m: max_size,
                        ..cfg.clone()
                    };
                    let result = select::run_selection(train, &sized)?;
                    let order: Vec<usize> = match (cfg.criterion, cfg.strategy) {
                        // Rank traces list every feature in rank order;
                        // greedy/two-stage traces grow one feature per step.
                        (Criterion::TwoStage, _) | (_, Strategy::Greedy) => result
                            .score_trace
                            .iter()
                            .scan(Vec::new(), |seen: &mut Vec<usize>, entry| {
                                let new = entry
                                    .features
                                    .iter()
                                    .copied()
                                    .find(|f| !seen.contains(f))
                                    .expect("each step adds one feature");
                                seen.push(new);
                                Some(new)
                            })
                            .collect(),
                        _ => result
                            .score_trace
                            .iter()
                            .map(|e| e.features[0])
                            .collect(),
                    };
                    let ranked: Vec<(usize, f64)> =
                        order.into_iter().map(|j| (j, 0.0)).collect();
                    prefixes_of(&ranked, sizes, train.d())
                }
            }
        }
    }
}

fn prefixes_of(
    ranked: &[(usize, f64)],
    sizes: &[usize],
    d: usize,
) -> Result<Vec<FeatureSet>> {
    sizes
        .iter()
        .map(|&m| {
            let indices: Vec<usize> = ranked[..m].iter().map(|&(j, _)| j).collect();
            FeatureSet::new(indices, d)
        })
        .collect()
}

/// Variance-ratio ranking: between-class variance of the class means over
/// the mean within-class variance (guarded by 1e-12), descending. A simple
/// stand-in for similarity-preserving filter scores.
pub fn variance_ratio_baseline(ds: &Dataset) -> Result<Vec<(usize, f64)>> {
    let partition = partition_by_class(ds)?;
    let k = partition.n_classes();
    let mut scored: Vec<(usize, f64)> = Vec::with_capacity(ds.d());
    for j in 0..ds.d() {
        let mut class_means = Vec::with_capacity(k);
        let mut within = 0.0;
        for rows in partition.iter() {
            let vals: Vec<f64> = rows.iter().map(|&r| ds.x()[[r, j]]).collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            class_means.push(mean);
            within += var;
        }
        within /= k as f64;
        let grand = class_means.iter().sum::<f64>() / k as f64;
        let between = class_means
            .iter()
            .map(|m| (m - grand) * (m - grand))
            .sum::<f64>()
            / k as f64;
        scored.push((j, between / (within + 1e-12)));
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(scored)
}

/// One row of the GWD-versus-accuracy consistency table.
#[derive(Debug, Clone, Serialize)]
pub struct GwdAccuracyRow {
    pub feature_set: FeatureSet,
    pub gwd: f64,
    pub accuracy: f64,
    pub reciprocal_gwd: f64,
}

/// Paired GW distances and k-NN accuracies for a list of subsets, plus the
/// Spearman rank correlation between `1/gwd` and accuracy.
#[derive(Debug, Clone, Serialize)]
pub struct GwdAccuracyTable {
    pub rows: Vec<GwdAccuracyRow>,
    /// `None` when fewer than two rows or when either side has constant
    /// ranks, where the correlation is undefined.
    pub spearman: Option<f64>,
}

impl GwdAccuracyTable {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("features,gwd,accuracy,reciprocal_gwd\n");
        for row in &self.rows {
            let features = row
                .feature_set
                .indices()
                .iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join(" ");
            out.push_str(&format!(
                "{features},{},{},{}\n",
                row.gwd, row.accuracy, row.reciprocal_gwd
            ));
        }
        out
    }
}

/// Evaluate the unsupervised criterion against downstream accuracy: one
/// shared stratified split, one shared GW row subsample on the training
/// side, the given subsets scored by both.
pub fn gwd_accuracy_table(
    ds: &Dataset,
    subsets: &[FeatureSet],
    cfg: &GwConfig,
    cap: usize,
    k: usize,
    floor: f64,
    seed: u64,
) -> Result<GwdAccuracyTable> {
    if subsets.is_empty() {
        return Err(Error::EmptyInput("subset list"));
    }
    if !(floor > 0.0) {
        return Err(Error::InvalidArgument("gwd floor must be positive".into()));
    }
    let (train, test) = train_test_split(
        ds,
        &SplitSpec {
            train_fraction: 0.7,
            seed: rng::mix(seed, rng::SALT_REPEAT, 0),
            stratified: true,
        },
    )?;
    let gw_cfg = GwConfig {
        seed,
        ..cfg.clone()
    };
    // gw_to_full subsamples after a canonical row ordering, so every call on
    // the same training set and seed shares one row subsample.
    let mut rows = Vec::with_capacity(subsets.len());
    for subset in subsets {
        let result = gw_select::gw_to_full(&train, subset, &gw_cfg, cap)?;
        let accuracy = knn_accuracy(&train, &test, subset, k)?;
        rows.push(GwdAccuracyRow {
            feature_set: result.feature_set,
            gwd: result.gwd,
            accuracy,
            reciprocal_gwd: 1.0 / result.gwd.max(floor),
        });
    }
    let spearman = spearman_correlation(
        &rows.iter().map(|r| r.reciprocal_gwd).collect::<Vec<_>>(),
        &rows.iter().map(|r| r.accuracy).collect::<Vec<_>>(),
    );
    Ok(GwdAccuracyTable { rows, spearman })
}

/// Spearman rank correlation with average ranks for ties; `None` when either
/// side has zero rank variance or fewer than two observations.
pub fn spearman_correlation(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    let n = ra.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let num: f64 = ra
        .iter()
        .zip(&rb)
        .map(|(x, y)| (x - mean) * (y - mean))
        .sum();
    let va: f64 = ra.iter().map(|x| (x - mean) * (x - mean)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mean) * (y - mean)).sum();
    if va == 0.0 || vb == 0.0 {
        return None;
    }
    Some(num / (va.sqrt() * vb.sqrt()))
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; n];
    let mut pos = 0;
    while pos < n {
        let mut end = pos;
        while end + 1 < n && values[order[end + 1]] == values[order[pos]] {
            end += 1;
        }
        let avg = (pos + end) as f64 / 2.0 + 1.0;
        for &item in &order[pos..=end] {
            ranks[item] = avg;
        }
        pos = end + 1;
    }
    ranks
}
