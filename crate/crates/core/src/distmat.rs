//! Supervised criterion: distance matrices between class-conditional
//! empirical distributions.
//!
//! For a feature set `T` and classes `c_1..c_K`, the class distance matrix
//! holds the 1-Wasserstein distance between every pair of class-conditional
//! distributions of the data restricted to `T`. Its squared Frobenius norm is
//! the disparity utility of `T`; element-wise similarity between the matrices
//! of two features measures how interchangeable they are for classification,
//! which is the supervised redundancy signal.

use ndarray::Array2;
use serde::Serialize;

use crate::dataset::{partition_by_class, Dataset};
use crate::error::{Error, Result};
use crate::ot;
use crate::rng;

/// Ordered set of distinct feature (column) indices. Non-empty by
/// construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct FeatureSet {
    indices: Vec<usize>,
}

impl FeatureSet {
    /// Builds a set, rejecting empty input, repeated indices, and indices
    /// outside `0..d`.
    pub fn new(indices: Vec<usize>, d: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptyInput("feature set"));
        }
        let mut seen = vec![false; d];
        for &i in &indices {
            if i >= d {
                return Err(Error::InvalidFeatureIndex { index: i, d });
            }
            if seen[i] {
                return Err(Error::InvalidArgument(format!(
                    "feature index {i} repeated in feature set"
                )));
            }
            seen[i] = true;
        }
        Ok(Self { indices })
    }

    pub fn single(index: usize, d: usize) -> Result<Self> {
        Self::new(vec![index], d)
    }

    /// All features of a `d`-column dataset, in index order.
    pub fn full(d: usize) -> Self {
        Self {
            indices: (0..d).collect(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        false // non-empty by construction
    }

    pub fn contains(&self, feature: usize) -> bool {
        self.indices.contains(&feature)
    }

    /// The set with `feature` appended.
    pub fn with(&self, feature: usize, d: usize) -> Result<Self> {
        let mut indices = self.indices.clone();
        indices.push(feature);
        Self::new(indices, d)
    }

    /// The set with `feature` removed; errors if absent or if the removal
    /// would empty the set.
    pub fn without(&self, feature: usize) -> Result<Self> {
        if !self.contains(feature) {
            return Err(Error::FeatureMembership {
                index: feature,
                problem: "is not in",
            });
        }
        if self.len() == 1 {
            return Err(Error::EmptyInput("feature set after removal"));
        }
        Ok(Self {
            indices: self
                .indices
                .iter()
                .copied()
                .filter(|&i| i != feature)
                .collect(),
        })
    }

    pub(crate) fn check_against(&self, d: usize) -> Result<()> {
        match self.indices.iter().find(|&&i| i >= d) {
            Some(&i) => Err(Error::InvalidFeatureIndex { index: i, d }),
            None => Ok(()),
        }
    }
}

/// Which W1 backend evaluates multi-column feature sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMode {
    /// Exact transportation LP, with seeded subsampling above `cap` points.
    Exact,
    /// Sliced approximation over random projections.
    Sliced,
}

/// Solver settings recorded with every distance matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistmatConfig {
    pub mode: DistanceMode,
    /// Per-cloud point cap of the exact LP path.
    pub cap: usize,
    /// Projection count of the sliced path.
    pub n_projections: usize,
    pub seed: u64,
    /// Standardize columns (dataset-wide mean/std) before multi-column
    /// distances so no single column dominates the Euclidean metric.
    /// Single-column matrices are always computed on raw values.
    pub standardize: bool,
}

impl Default for DistmatConfig {
    fn default() -> Self {
        Self {
            mode: DistanceMode::Exact,
            cap: 256,
            n_projections: 64,
            seed: 0,
            standardize: true,
        }
    }
}

/// K x K matrix of W1 distances between class-conditional distributions for
/// one feature set: symmetric, nonnegative, zero diagonal.
#[derive(Debug, Clone)]
pub struct ClassDistanceMatrix {
    d: Array2<f64>,
    class_names: Vec<String>,
    feature_set: FeatureSet,
    ot_config: DistmatConfig,
}

impl ClassDistanceMatrix {
    pub fn matrix(&self) -> &Array2<f64> {
        &self.d
    }

    pub fn n_classes(&self) -> usize {
        self.d.nrows()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn feature_set(&self) -> &FeatureSet {
        &self.feature_set
    }

    pub fn config(&self) -> &DistmatConfig {
        &self.ot_config
    }

    /// Flattened strict upper triangle in row-major pair order.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let k = self.n_classes();
        let mut out = Vec::with_capacity(k * (k - 1) / 2);
        for i in 0..k {
            for j in (i + 1)..k {
                out.push(self.d[[i, j]]);
            }
        }
        out
    }

    /// CSV rendering with class names on both axes.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("class");
        for name in &self.class_names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (i, name) in self.class_names.iter().enumerate() {
            out.push_str(name);
            for j in 0..self.n_classes() {
                out.push(',');
                out.push_str(&format!("{}", self.d[[i, j]]));
            }
            out.push('\n');
        }
        out
    }

    /// JSON-serializable view carrying the feature set and solver settings.
    pub fn record(&self) -> DistanceMatrixRecord<'_> {
        DistanceMatrixRecord {
            class_names: &self.class_names,
            feature_set: &self.feature_set,
            ot_config: &self.ot_config,
            entries: (0..self.n_classes())
                .map(|i| self.d.row(i).to_vec())
                .collect(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct DistanceMatrixRecord<'a> {
    pub class_names: &'a [String],
    pub feature_set: &'a FeatureSet,
    pub ot_config: &'a DistmatConfig,
    pub entries: Vec<Vec<f64>>,
}

/// Distance matrix of the class-conditional distributions of `ds` restricted
/// to the columns of `t`.
///
/// Single-column sets use the exact 1D W1 on raw values; multi-column sets
/// use the exact LP (`mode = Exact`, subsampled above `cap`) or the sliced
/// approximation, optionally after dataset-wide standardization of the
/// selected columns. Deterministic for a fixed `cfg.seed`.
pub fn class_distance_matrix(
    ds: &Dataset,
    t: &FeatureSet,
    cfg: &DistmatConfig,
) -> Result<ClassDistanceMatrix> {
    t.check_against(ds.d())?;
    let partition = partition_by_class(ds)?;
    let k = partition.n_classes();

    let mut d = Array2::zeros((k, k));
    if t.len() == 1 {
        let col = t.indices()[0];
        let values: Vec<Vec<f64>> = partition
            .iter()
            .map(|rows| rows.iter().map(|&r| ds.x()[[r, col]]).collect())
            .collect();
        for i in 0..k {
            for j in (i + 1)..k {
                let w = ot::wasserstein1_1d(&values[i], &values[j])?;
                d[[i, j]] = w;
                d[[j, i]] = w;
            }
        }
    } else {
        let scales = column_scales(ds, t, cfg.standardize);
        let clouds: Vec<ot::WeightedPointCloud> = partition
            .iter()
            .map(|rows| {
                let mut pts = Array2::zeros((rows.len(), t.len()));
                for (r, &row) in rows.iter().enumerate() {
                    for (c, &col) in t.indices().iter().enumerate() {
                        pts[[r, c]] = ds.x()[[row, col]] * scales[c];
                    }
                }
                ot::WeightedPointCloud::uniform(pts)
            })
            .collect::<Result<_>>()?;
        for i in 0..k {
            for j in (i + 1)..k {
                let pair_seed = rng::mix(cfg.seed, rng::SALT_CLASS_PAIR, (i * k + j) as u64);
                let w = match cfg.mode {
                    DistanceMode::Exact => {
                        ot::wasserstein1_nd(&clouds[i], &clouds[j], cfg.cap, pair_seed)?
                    }
                    DistanceMode::Sliced => ot::sliced_wasserstein1(
                        &clouds[i],
                        &clouds[j],
                        cfg.n_projections,
                        pair_seed,
                    )?,
                };
                d[[i, j]] = w;
                d[[j, i]] = w;
            }
        }
    }

    Ok(ClassDistanceMatrix {
        d,
        class_names: ds.class_names().to_vec(),
        feature_set: t.clone(),
        ot_config: cfg.clone(),
    })
}

/// Per-selected-column multipliers: `1/std` when standardizing (mean shifts
/// cancel in W1, so only the scale matters), all ones otherwise.
fn column_scales(ds: &Dataset, t: &FeatureSet, standardize: bool) -> Vec<f64> {
    if !standardize {
        return vec![1.0; t.len()];
    }
    let stats = ds.column_stats();
    t.indices()
        .iter()
        .map(|&j| {
            let (_, std) = stats[j];
            if std > 0.0 {
                1.0 / std
            } else {
                1.0
            }
        })
        .collect()
}

/// Distance matrix of a single feature. Exact 1D W1 on raw values.
pub fn single_feature_matrix(ds: &Dataset, feature: usize) -> Result<ClassDistanceMatrix> {
    let t = FeatureSet::single(feature, ds.d())?;
    class_distance_matrix(ds, &t, &DistmatConfig::default())
}

/// Squared Frobenius norm of the distance matrix: the disparity utility.
pub fn frobenius_utility(m: &ClassDistanceMatrix) -> f64 {
    m.matrix().iter().map(|v| v * v).sum()
}

/// Divide every entry by the mean off-diagonal entry, so the off-diagonal
/// mean of the result is exactly 1. Errors on an all-zero matrix.
pub fn mean_scale(m: &ClassDistanceMatrix) -> Result<ClassDistanceMatrix> {
    let mean = ot::mean_offdiagonal(m.matrix());
    if mean <= 0.0 {
        return Err(Error::DegenerateMatrix(
            "mean scaling of an all-zero distance matrix".into(),
        ));
    }
    let mut out = m.clone();
    out.d.mapv_inplace(|v| v / mean);
    Ok(out)
}

/// Cosine similarity of the flattened strict upper triangles, after
/// [`mean_scale`] on both matrices when `scaled` is set. 1 for proportional
/// matrices, symmetric in its arguments.
pub fn matrix_similarity(
    ma: &ClassDistanceMatrix,
    mb: &ClassDistanceMatrix,
    scaled: bool,
) -> Result<f64> {
    if ma.class_names != mb.class_names {
        return Err(Error::ClassOrderMismatch);
    }
    let (ua, ub) = if scaled {
        (
            mean_scale(ma)?.upper_triangle(),
            mean_scale(mb)?.upper_triangle(),
        )
    } else {
        (ma.upper_triangle(), mb.upper_triangle())
    };
    let na: f64 = ua.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb: f64 = ub.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::DegenerateMatrix(
            "similarity of an all-zero upper triangle".into(),
        ));
    }
    let dot: f64 = ua.iter().zip(&ub).map(|(a, b)| a * b).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Entry-wise relative change `(after - before) / before` on off-diagonals;
/// diagonal zero. Errors, naming the class pair, if `before` has a zero
/// off-diagonal entry.
pub fn relative_change_matrix(
    before: &ClassDistanceMatrix,
    after: &ClassDistanceMatrix,
) -> Result<Array2<f64>> {
    if before.class_names != after.class_names {
        return Err(Error::ClassOrderMismatch);
    }
    let k = before.n_classes();
    let mut out = Array2::zeros((k, k));
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            let b = before.d[[i, j]];
            if b <= 0.0 {
                return Err(Error::ZeroBaseline {
                    a: before.class_names[i].clone(),
                    b: before.class_names[j].clone(),
                });
            }
            out[[i, j]] = (after.d[[i, j]] - b) / b;
        }
    }
    Ok(out)
}

/// How per-member similarities aggregate into a set-level redundancy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RedundancyAggregation {
    /// Similarity to the most similar member (default).
    Max,
    /// Mean similarity over members.
    Mean,
}

/// Redundancy of feature `f` against the set `t`: the aggregated
/// distance-matrix similarity between `f` and the members of `t`. Higher
/// means more redundant.
pub fn redundancy_to_set(
    ds: &Dataset,
    f: usize,
    t: &FeatureSet,
    scaled: bool,
) -> Result<f64> {
    redundancy_to_set_with(ds, f, t, scaled, RedundancyAggregation::Max)
}

pub fn redundancy_to_set_with(
    ds: &Dataset,
    f: usize,
    t: &FeatureSet,
    scaled: bool,
    aggregation: RedundancyAggregation,
) -> Result<f64> {
    if t.contains(f) {
        return Err(Error::FeatureMembership {
            index: f,
            problem: "is already in",
        });
    }
    let mf = single_feature_matrix(ds, f)?;
    let mut total = 0.0;
    let mut best = f64::NEG_INFINITY;
    for &g in t.indices() {
        let mg = single_feature_matrix(ds, g)?;
        let s = matrix_similarity(&mf, &mg, scaled)?;
        total += s;
        best = best.max(s);
    }
    Ok(match aggregation {
        RedundancyAggregation::Max => best,
        RedundancyAggregation::Mean => total / t.len() as f64,
    })
}
