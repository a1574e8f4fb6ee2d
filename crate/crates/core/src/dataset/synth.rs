//! Synthetic column generation: noise features matched to the low-order
//! statistics of real columns, affine duplicates, and the planted-relevance
//! family used as ground truth in tests and demos.

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use super::Dataset;
use crate::distmat::FeatureSet;
use crate::error::{Error, Result};
use crate::rng;

/// Append `count` noise columns. Each new column is i.i.d. Gaussian with the
/// mean and standard deviation of a seeded randomly chosen existing column,
/// named `noise_0`, `noise_1`, ... Original columns and labels are untouched.
pub fn synth_noise_features(ds: &Dataset, count: usize, seed: u64) -> Result<Dataset> {
    if count < 1 {
        return Err(Error::InvalidArgument("noise column count must be >= 1".into()));
    }
    let stats = ds.column_stats();
    let offset = ds
        .feature_names()
        .iter()
        .filter(|n| n.starts_with("noise_"))
        .count();

    let n = ds.n();
    let mut x = ds.x().clone();
    let mut names = ds.feature_names().to_vec();
    for k in 0..count {
        let mut stream = rng::stream(seed, rng::SALT_NOISE_COLUMNS, k as u64);
        let template = stream.gen_range(0..ds.d());
        let (mean, std) = stats[template];
        let column: Vec<f64> = (0..n)
            .map(|_| {
                let z: f64 = stream.sample(StandardNormal);
                mean + std * z
            })
            .collect();
        x.push_column(ndarray::ArrayView1::from(&column))
            .expect("column length matches row count");
        names.push(format!("noise_{}", offset + k));
    }
    Dataset::from_encoded(
        x,
        ds.labels().map(<[usize]>::to_vec),
        ds.class_names().to_vec(),
        names,
    )
}

/// Append `scale * column + offset` for each source column, names suffixed
/// `_dup`.
pub fn duplicate_features(
    ds: &Dataset,
    source: &FeatureSet,
    scale: f64,
    offset: f64,
) -> Result<Dataset> {
    if scale == 0.0 || !scale.is_finite() || !offset.is_finite() {
        return Err(Error::InvalidArgument(
            "duplicate scale must be finite and nonzero, offset finite".into(),
        ));
    }
    source.check_against(ds.d())?;
    let mut x = ds.x().clone();
    let mut names = ds.feature_names().to_vec();
    for &j in source.indices() {
        let column: Vec<f64> = ds.column(j).iter().map(|v| scale * v + offset).collect();
        x.push_column(ndarray::ArrayView1::from(&column))
            .expect("column length matches row count");
        names.push(format!("{}_dup", ds.feature_names()[j]));
    }
    Dataset::from_encoded(
        x,
        ds.labels().map(<[usize]>::to_vec),
        ds.class_names().to_vec(),
        names,
    )
}

/// Generator parameters for the planted-relevance synthetic family:
/// `classes` Gaussian classes whose means differ by `delta` along each of
/// `relevant` columns, plus `noise` standard-normal columns carrying no class
/// information.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedConfig {
    pub n: usize,
    pub classes: usize,
    pub delta: f64,
    pub relevant: usize,
    pub noise: usize,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            n: 500,
            classes: 2,
            delta: 3.0,
            relevant: 1,
            noise: 9,
            seed: 0,
        }
    }
}

/// Draw a planted-relevance dataset. Labels cycle through the classes
/// (`row i` belongs to class `i mod K`), relevant column `rel_j` has class-`c`
/// mean `c * delta` and unit variance, noise columns are standard normal.
pub fn planted_dataset(cfg: &PlantedConfig) -> Result<Dataset> {
    if cfg.n < 2 * cfg.classes || cfg.classes < 2 {
        return Err(Error::InvalidArgument(format!(
            "planted family needs >= 2 classes and >= 2 rows per class (n = {}, classes = {})",
            cfg.n, cfg.classes
        )));
    }
    if cfg.relevant + cfg.noise == 0 {
        return Err(Error::InvalidArgument(
            "planted family needs at least one column".into(),
        ));
    }
    if !cfg.delta.is_finite() || cfg.delta < 0.0 {
        return Err(Error::InvalidArgument("delta must be finite and >= 0".into()));
    }
    let d = cfg.relevant + cfg.noise;
    let mut x = Array2::zeros((cfg.n, d));
    let mut names = Vec::with_capacity(d);
    for j in 0..d {
        let mut stream = rng::stream(cfg.seed, rng::SALT_PLANTED, j as u64);
        let relevant = j < cfg.relevant;
        names.push(if relevant {
            format!("rel_{j}")
        } else {
            format!("noise_{}", j - cfg.relevant)
        });
        for i in 0..cfg.n {
            let z: f64 = stream.sample(StandardNormal);
            let class = i % cfg.classes;
            x[[i, j]] = if relevant {
                cfg.delta * class as f64 + z
            } else {
                z
            };
        }
    }
    let labels: Vec<String> = (0..cfg.n).map(|i| format!("c{}", i % cfg.classes)).collect();
    Dataset::with_labels(x, &labels, Some(names))
}
