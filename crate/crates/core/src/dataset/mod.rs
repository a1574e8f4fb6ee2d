//! Data model and ingestion: numeric sample matrices with optional class
//! labels, CSV loading, outlier filtering, seeded splits, and synthetic
//! column generation.

mod io;
mod synth;

pub use io::{load_csv, save_csv, LabelColumn};
pub use synth::{duplicate_features, planted_dataset, synth_noise_features, PlantedConfig};

use ndarray::{Array2, ArrayView1, Axis};

use crate::error::{Error, Result};
use crate::rng;

/// An immutable numeric dataset: `n x d` matrix, optional dense-coded class
/// labels, and names for features and classes.
///
/// Class names are kept in first-appearance order, so everything derived
/// from them (distance-matrix row order, report layout) is reproducible.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: Array2<f64>,
    labels: Option<Vec<usize>>,
    feature_names: Vec<String>,
    class_names: Vec<String>,
}

impl Dataset {
    /// Unlabeled dataset. Feature names default to `f0..f{d-1}`.
    pub fn new(x: Array2<f64>, feature_names: Option<Vec<String>>) -> Result<Self> {
        Self::build(x, None, Vec::new(), feature_names)
    }

    /// Labeled dataset; `labels` are arbitrary strings, one per row, encoded
    /// against class names in first-appearance order.
    pub fn with_labels(
        x: Array2<f64>,
        labels: &[String],
        feature_names: Option<Vec<String>>,
    ) -> Result<Self> {
        if labels.len() != x.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{} rows but {} labels",
                x.nrows(),
                labels.len()
            )));
        }
        let mut class_names: Vec<String> = Vec::new();
        let mut codes = Vec::with_capacity(labels.len());
        for label in labels {
            let code = match class_names.iter().position(|c| c == label) {
                Some(k) => k,
                None => {
                    class_names.push(label.clone());
                    class_names.len() - 1
                }
            };
            codes.push(code);
        }
        Self::build(x, Some(codes), class_names, feature_names)
    }

    /// Assembles a dataset from already-encoded parts, preserving a class
    /// table that may include classes absent from `labels` (as happens in
    /// split halves).
    pub(crate) fn from_encoded(
        x: Array2<f64>,
        labels: Option<Vec<usize>>,
        class_names: Vec<String>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        Self::build(x, labels, class_names, Some(feature_names))
    }

    fn build(
        x: Array2<f64>,
        labels: Option<Vec<usize>>,
        class_names: Vec<String>,
        feature_names: Option<Vec<String>>,
    ) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::EmptyInput("dataset matrix"));
        }
        if let Some((r, c)) = x.indexed_iter().find(|(_, v)| !v.is_finite()).map(|(i, _)| i) {
            return Err(Error::NonFinite(format!("dataset cell ({r}, {c})")));
        }
        if let Some(codes) = &labels {
            if codes.len() != x.nrows() {
                return Err(Error::DimensionMismatch(format!(
                    "{} rows but {} labels",
                    x.nrows(),
                    codes.len()
                )));
            }
            if let Some(&bad) = codes.iter().find(|&&c| c >= class_names.len()) {
                return Err(Error::InvalidArgument(format!(
                    "label code {bad} outside class table of size {}",
                    class_names.len()
                )));
            }
        }
        let feature_names = match feature_names {
            Some(names) => {
                if names.len() != x.ncols() {
                    return Err(Error::DimensionMismatch(format!(
                        "{} columns but {} feature names",
                        x.ncols(),
                        names.len()
                    )));
                }
                names
            }
            None => (0..x.ncols()).map(|j| format!("f{j}")).collect(),
        };
        Ok(Self {
            x,
            labels,
            feature_names,
            class_names,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.x.column(j)
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn is_labeled(&self) -> bool {
        self.labels.is_some()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    /// New dataset holding the given rows (in the given order).
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.n()) {
            return Err(Error::InvalidArgument(format!(
                "row index {bad} out of range (n = {})",
                self.n()
            )));
        }
        let x = self.x.select(Axis(0), rows);
        let labels = self
            .labels
            .as_ref()
            .map(|codes| rows.iter().map(|&r| codes[r]).collect());
        Self::from_encoded(
            x,
            labels,
            self.class_names.clone(),
            self.feature_names.clone(),
        )
    }

    /// Per-column mean and population standard deviation.
    pub fn column_stats(&self) -> Vec<(f64, f64)> {
        (0..self.d())
            .map(|j| {
                let col = self.x.column(j);
                let n = col.len() as f64;
                let mean = col.sum() / n;
                let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                (mean, var.sqrt())
            })
            .collect()
    }
}

/// Row indices of each class, ordered by the dataset's class table; lists
/// are ascending and disjoint and cover every labeled row.
#[derive(Debug, Clone)]
pub struct ClassPartition {
    per_class: Vec<Vec<usize>>,
}

impl ClassPartition {
    pub fn n_classes(&self) -> usize {
        self.per_class.len()
    }

    pub fn class_rows(&self, k: usize) -> &[usize] {
        &self.per_class[k]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vec<usize>> {
        self.per_class.iter()
    }
}

/// Split the labeled rows by class. Requires at least two classes and no
/// empty class.
pub fn partition_by_class(ds: &Dataset) -> Result<ClassPartition> {
    let labels = ds.labels().ok_or(Error::MissingLabels)?;
    let k = ds.class_names().len();
    if k < 2 {
        return Err(Error::TooFewClasses(k));
    }
    let mut per_class = vec![Vec::new(); k];
    for (row, &code) in labels.iter().enumerate() {
        per_class[code].push(row);
    }
    for (c, rows) in per_class.iter().enumerate() {
        if rows.is_empty() {
            return Err(Error::EmptyClass(ds.class_names()[c].clone()));
        }
    }
    Ok(ClassPartition { per_class })
}

/// Remove every row containing a cell further than `threshold` column
/// standard deviations from its column mean. Statistics come from the input
/// dataset in a single application; zero-variance columns never trigger.
///
/// Returns the filtered dataset and the removed row indices in ascending
/// order.
pub fn zscore_filter(ds: &Dataset, threshold: f64) -> Result<(Dataset, Vec<usize>)> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidArgument(
            "z-score threshold must be positive".into(),
        ));
    }
    let stats = ds.column_stats();
    let mut keep = Vec::new();
    let mut removed = Vec::new();
    for i in 0..ds.n() {
        let outlier = (0..ds.d()).any(|j| {
            let (mean, std) = stats[j];
            std > 0.0 && (ds.x()[[i, j]] - mean).abs() > threshold * std
        });
        if outlier {
            removed.push(i);
        } else {
            keep.push(i);
        }
    }
    if keep.is_empty() {
        return Err(Error::AllRowsRemoved(ds.n()));
    }
    Ok((ds.select_rows(&keep)?, removed))
}

/// Parameters of a seeded train/test split.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    /// Fraction of rows assigned to the training side, strictly in (0, 1).
    pub train_fraction: f64,
    pub seed: u64,
    /// Preserve class proportions to within one sample per class.
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.7,
            seed: 0,
            stratified: true,
        }
    }
}

/// Seeded deterministic train/test split. Train and test rows are disjoint
/// and cover the dataset; both sides keep the parent's class table.
pub fn train_test_split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train_fraction must lie strictly in (0, 1), got {}",
            spec.train_fraction
        )));
    }
    let (mut train_rows, mut test_rows) = if spec.stratified {
        let partition = partition_by_class(ds)?;
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (class, rows) in partition.iter().enumerate() {
            if rows.len() < 2 {
                return Err(Error::InvalidArgument(format!(
                    "stratified split needs >= 2 rows per class, class {:?} has {}",
                    ds.class_names()[class],
                    rows.len()
                )));
            }
            let mut shuffled = rows.clone();
            shuffle(&mut shuffled, spec.seed, 1 + class as u64);
            let take = rounded_count(rows.len(), spec.train_fraction).clamp(1, rows.len() - 1);
            train.extend_from_slice(&shuffled[..take]);
            test.extend_from_slice(&shuffled[take..]);
        }
        (train, test)
    } else {
        let mut shuffled: Vec<usize> = (0..ds.n()).collect();
        shuffle(&mut shuffled, spec.seed, 0);
        let take = rounded_count(ds.n(), spec.train_fraction);
        if take == 0 || take == ds.n() {
            return Err(Error::DegenerateSplit {
                train: take,
                test: ds.n() - take,
            });
        }
        (shuffled[..take].to_vec(), shuffled[take..].to_vec())
    };
    train_rows.sort_unstable();
    test_rows.sort_unstable();
    if train_rows.is_empty() || test_rows.is_empty() {
        return Err(Error::DegenerateSplit {
            train: train_rows.len(),
            test: test_rows.len(),
        });
    }
    Ok((ds.select_rows(&train_rows)?, ds.select_rows(&test_rows)?))
}

fn rounded_count(n: usize, fraction: f64) -> usize {
    ((n as f64) * fraction).round() as usize
}

fn shuffle(rows: &mut [usize], seed: u64, salt_index: u64) {
    use rand::Rng;
    let mut rng = rng::stream(seed, rng::SALT_SPLIT, salt_index);
    for i in (1..rows.len()).rev() {
        let j = rng.gen_range(0..=i);
        rows.swap(i, j);
    }
}
