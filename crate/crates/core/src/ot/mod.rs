//! Optimal-transport kernels.
//!
//! Exact 1-Wasserstein distances between empirical measures (closed form in
//! 1D, a transportation-simplex LP in general dimension), a sliced
//! approximation for large point clouds, and an entropic Gromov-Wasserstein
//! solver for comparing metric spaces of different dimension.
//!
//! All solvers are pure functions of their arguments and seeds; none spawn
//! threads. Callers that want parallelism run independent invocations
//! concurrently.

mod emd;
mod gw;

pub use emd::{emd_exact, EmdSolution};
pub use gw::{entropic_gw, gw_objective, GwConfig, GwSolution};
pub(crate) use gw::mean_offdiagonal;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::rng;

/// A weighted point cloud: `n` points in `d` dimensions with a probability
/// weight per point.
#[derive(Debug, Clone)]
pub struct WeightedPointCloud {
    points: Array2<f64>,
    weights: Array1<f64>,
}

impl WeightedPointCloud {
    /// Builds a cloud, checking that weights are nonnegative and sum to 1
    /// within 1e-12.
    pub fn new(points: Array2<f64>, weights: Array1<f64>) -> Result<Self> {
        if points.nrows() == 0 {
            return Err(Error::EmptyInput("point cloud"));
        }
        if weights.len() != points.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{} points but {} weights",
                points.nrows(),
                weights.len()
            )));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("point cloud coordinates".into()));
        }
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::NegativeEntry {
                    which: "cloud weights",
                    row: i,
                    col: 0,
                });
            }
        }
        let sum: f64 = weights.sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::NotAProbability {
                which: "cloud",
                sum,
            });
        }
        Ok(Self { points, weights })
    }

    /// Builds a cloud with uniform weights `1/n`.
    pub fn uniform(points: Array2<f64>) -> Result<Self> {
        let n = points.nrows();
        if n == 0 {
            return Err(Error::EmptyInput("point cloud"));
        }
        let w = Array1::from_elem(n, 1.0 / n as f64);
        Self::new(points, w)
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        false // n >= 1 by construction
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn weights(&self) -> &Array1<f64> {
        &self.weights
    }

    /// Seeded uniform subsample without replacement down to `cap` points,
    /// weights renormalized. Returns a borrowed clone when `n <= cap`.
    fn subsampled(&self, cap: usize, seed: u64, salt: u64) -> Self {
        if self.len() <= cap {
            return self.clone();
        }
        let mut rng = rng::stream(seed, salt, 0);
        let keep = rng::sample_without_replacement(&mut rng, self.len(), cap);
        let points = self.points.select(ndarray::Axis(0), &keep);
        let mut weights = self.weights.select(ndarray::Axis(0), &keep);
        let total: f64 = weights.sum();
        if total > 0.0 {
            weights.mapv_inplace(|w| w / total);
        } else {
            weights.fill(1.0 / keep.len() as f64);
        }
        Self { points, weights }
    }
}

/// A transport plan between two discrete measures: the coupling matrix plus
/// the marginals it was solved against.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    pub coupling: Array2<f64>,
    pub row_marginal: Array1<f64>,
    pub col_marginal: Array1<f64>,
}

impl TransportPlan {
    /// The independent coupling `mu ⊗ nu`.
    pub fn independent(mu: &Array1<f64>, nu: &Array1<f64>) -> Self {
        let mut coupling = Array2::zeros((mu.len(), nu.len()));
        for i in 0..mu.len() {
            for j in 0..nu.len() {
                coupling[[i, j]] = mu[i] * nu[j];
            }
        }
        Self {
            coupling,
            row_marginal: mu.clone(),
            col_marginal: nu.clone(),
        }
    }

    /// Checks nonnegativity and that row/column sums match the stored
    /// marginals within 1e-8.
    pub fn validate(&self) -> Result<()> {
        let (na, nb) = self.coupling.dim();
        if na != self.row_marginal.len() || nb != self.col_marginal.len() {
            return Err(Error::DimensionMismatch(format!(
                "coupling {}x{} vs marginals {} and {}",
                na,
                nb,
                self.row_marginal.len(),
                self.col_marginal.len()
            )));
        }
        for ((i, j), &v) in self.coupling.indexed_iter() {
            if v < -1e-12 {
                return Err(Error::NegativeEntry {
                    which: "coupling",
                    row: i,
                    col: j,
                });
            }
        }
        for (i, &m) in self.row_marginal.iter().enumerate() {
            let s: f64 = self.coupling.row(i).sum();
            if (s - m).abs() > 1e-8 {
                return Err(Error::InvalidArgument(format!(
                    "row {i} sums to {s}, marginal is {m}"
                )));
            }
        }
        for (j, &m) in self.col_marginal.iter().enumerate() {
            let s: f64 = self.coupling.column(j).sum();
            if (s - m).abs() > 1e-8 {
                return Err(Error::InvalidArgument(format!(
                    "column {j} sums to {s}, marginal is {m}"
                )));
            }
        }
        Ok(())
    }
}

fn check_samples(name: &'static str, xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::EmptyInput(name));
    }
    if xs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(name.into()));
    }
    Ok(())
}

/// Exact 1-Wasserstein distance between two 1D empirical measures with
/// uniform weights.
///
/// Computed as the integral of the absolute difference of the two quantile
/// functions over the merged breakpoint grid, which is exact for unequal
/// sample counts. Symmetric, and zero exactly when the sorted multisets
/// coincide after weight alignment.
pub fn wasserstein1_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    check_samples("first sample list", a)?;
    check_samples("second sample list", b)?;
    let wa = vec![1.0 / a.len() as f64; a.len()];
    let wb = vec![1.0 / b.len() as f64; b.len()];
    Ok(wasserstein1_1d_weighted(a, &wa, b, &wb))
}

/// Exact weighted 1D W1. Inputs need not be sorted; weights must be
/// nonnegative and sum to 1 (callers validate).
pub(crate) fn wasserstein1_1d_weighted(
    a: &[f64],
    wa: &[f64],
    b: &[f64],
    wb: &[f64],
) -> f64 {
    let mut ia: Vec<usize> = (0..a.len()).collect();
    ia.sort_unstable_by(|&p, &q| a[p].total_cmp(&a[q]));
    let mut ib: Vec<usize> = (0..b.len()).collect();
    ib.sort_unstable_by(|&p, &q| b[p].total_cmp(&b[q]));

    // Walk the merged grid of cumulative-probability breakpoints; on each
    // segment both quantile functions are constant.
    let mut total = 0.0;
    let mut t = 0.0;
    let (mut ka, mut kb) = (0usize, 0usize);
    let (mut ca, mut cb) = (wa[ia[0]], wb[ib[0]]);
    loop {
        let qa = a[ia[ka]];
        let qb = b[ib[kb]];
        let tn = if ka + 1 == ia.len() && kb + 1 == ib.len() {
            1.0
        } else {
            ca.min(cb).min(1.0)
        };
        if tn > t {
            total += (tn - t) * (qa - qb).abs();
            t = tn;
        }
        let advance_a = ca <= cb && ka + 1 < ia.len();
        let advance_b = cb <= ca && kb + 1 < ib.len();
        if !advance_a && !advance_b {
            break;
        }
        if advance_a {
            ka += 1;
            ca += wa[ia[ka]];
        }
        if advance_b {
            kb += 1;
            cb += wb[ib[kb]];
        }
    }
    total
}

/// Exact multi-dimensional W1 between weighted point clouds under the
/// Euclidean ground metric.
///
/// Clouds larger than `cap` are first subsampled without replacement
/// (seeded, uniform) and the exact transportation LP is solved on the
/// subsample. Deterministic for a fixed seed.
pub fn wasserstein1_nd(
    a: &WeightedPointCloud,
    b: &WeightedPointCloud,
    cap: usize,
    seed: u64,
) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "cloud dims {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    if cap < 1 {
        return Err(Error::InvalidArgument("cap must be >= 1".into()));
    }
    let sa = a.subsampled(cap, seed, rng::SALT_SUBSAMPLE_A);
    let sb = b.subsampled(cap, seed, rng::SALT_SUBSAMPLE_B);
    let cost = euclidean_cost(sa.points(), sb.points());
    let sol = emd_exact(&cost, sa.weights(), sb.weights())?;
    Ok(sol.value)
}

/// Sliced 1-Wasserstein approximation: the average of exact 1D W1 distances
/// over seeded random unit directions.
pub fn sliced_wasserstein1(
    a: &WeightedPointCloud,
    b: &WeightedPointCloud,
    n_projections: usize,
    seed: u64,
) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "cloud dims {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    if n_projections < 1 {
        return Err(Error::InvalidArgument(
            "n_projections must be >= 1".into(),
        ));
    }
    let d = a.dim();
    let mut rng = rng::stream(seed, rng::SALT_PROJECTIONS, 0);
    let wa = a.weights().as_slice().expect("contiguous").to_vec();
    let wb = b.weights().as_slice().expect("contiguous").to_vec();
    let mut acc = 0.0;
    for _ in 0..n_projections {
        let dir = random_unit_vector(&mut rng, d);
        let pa = project(a.points(), &dir);
        let pb = project(b.points(), &dir);
        acc += wasserstein1_1d_weighted(&pa, &wa, &pb, &wb);
    }
    Ok(acc / n_projections as f64)
}

fn random_unit_vector(rng: &mut rand_chacha::ChaCha8Rng, d: usize) -> Vec<f64> {
    use rand::Rng;
    use rand_distr::StandardNormal;
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn project(points: &Array2<f64>, dir: &[f64]) -> Vec<f64> {
    points
        .rows()
        .into_iter()
        .map(|row| row.iter().zip(dir).map(|(x, d)| x * d).sum())
        .collect()
}

/// Pairwise Euclidean distance matrix of the rows of `x`: symmetric,
/// nonnegative, zero diagonal.
pub fn pairwise_distances(x: &Array2<f64>) -> Result<Array2<f64>> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("pairwise distance input".into()));
    }
    let n = x.nrows();
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let mut s = 0.0;
            for k in 0..x.ncols() {
                let diff = x[[i, k]] - x[[j, k]];
                s += diff * diff;
            }
            let d = s.sqrt();
            out[[i, j]] = d;
            out[[j, i]] = d;
        }
    }
    Ok(out)
}

/// Euclidean cost matrix between the rows of two point sets.
pub fn euclidean_cost(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let (na, nb) = (a.nrows(), b.nrows());
    let mut cost = Array2::zeros((na, nb));
    for i in 0..na {
        for j in 0..nb {
            let mut s = 0.0;
            for k in 0..a.ncols() {
                let diff = a[[i, k]] - b[[j, k]];
                s += diff * diff;
            }
            cost[[i, j]] = s.sqrt();
        }
    }
    cost
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn w1_1d_identical_samples() {
        assert_eq!(wasserstein1_1d(&[0.0, 1.0], &[0.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn w1_1d_single_point_translation() {
        assert_eq!(wasserstein1_1d(&[0.0], &[3.0]).unwrap(), 3.0);
    }

    #[test]
    fn w1_1d_shifted_pair() {
        // Matching 0->1 and 2->3 costs 1 per unit mass; the LP oracle in the
        // integration tests confirms this value.
        let w = wasserstein1_1d(&[0.0, 2.0], &[1.0, 3.0]).unwrap();
        assert!((w - 1.0).abs() < 1e-12);
    }

    #[test]
    fn w1_1d_unequal_mass_split() {
        // One third of the mass moves by 6: W1 = 2.
        let w = wasserstein1_1d(&[0.0, 0.0, 0.0], &[0.0, 0.0, 6.0]).unwrap();
        assert!((w - 2.0).abs() < 1e-12);
    }

    #[test]
    fn w1_1d_unequal_counts() {
        // a = {0,1} uniform, b = {0} point mass: quantile difference
        // integrates to 0.5.
        let w = wasserstein1_1d(&[0.0, 1.0], &[0.0]).unwrap();
        assert!((w - 0.5).abs() < 1e-12);
    }

    #[test]
    fn w1_1d_rejects_empty_and_nonfinite() {
        assert!(wasserstein1_1d(&[], &[1.0]).is_err());
        assert!(wasserstein1_1d(&[1.0], &[f64::NAN]).is_err());
    }

    #[test]
    fn w1_nd_identity_and_translation() {
        let a = WeightedPointCloud::uniform(array![[0.0, 0.0], [1.0, 1.0]]).unwrap();
        assert_eq!(wasserstein1_nd(&a, &a, 10, 0).unwrap(), 0.0);

        let p = WeightedPointCloud::uniform(array![[0.0, 0.0]]).unwrap();
        let q = WeightedPointCloud::uniform(array![[3.0, 4.0]]).unwrap();
        let w = wasserstein1_nd(&p, &q, 10, 0).unwrap();
        assert!((w - 5.0).abs() < 1e-12);
    }

    #[test]
    fn w1_nd_rejects_dim_mismatch_and_bad_cap() {
        let a = WeightedPointCloud::uniform(array![[0.0, 0.0]]).unwrap();
        let b = WeightedPointCloud::uniform(array![[0.0]]).unwrap();
        assert!(wasserstein1_nd(&a, &b, 10, 0).is_err());
        assert!(wasserstein1_nd(&a, &a, 0, 0).is_err());
    }

    #[test]
    fn sliced_matches_exact_in_1d() {
        let a = WeightedPointCloud::uniform(array![[0.0], [2.0], [5.0]]).unwrap();
        let b = WeightedPointCloud::uniform(array![[1.0], [1.5]]).unwrap();
        let exact = wasserstein1_1d(&[0.0, 2.0, 5.0], &[1.0, 1.5]).unwrap();
        for seed in [0u64, 1, 99] {
            let s = sliced_wasserstein1(&a, &b, 7, seed).unwrap();
            assert!((s - exact).abs() < 1e-12, "seed {seed}: {s} vs {exact}");
        }
    }

    #[test]
    fn sliced_zero_on_identical_clouds() {
        let a = WeightedPointCloud::uniform(array![[0.0, 1.0], [2.0, -1.0]]).unwrap();
        let s = sliced_wasserstein1(&a, &a, 16, 42).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn pairwise_basic() {
        let d = pairwise_distances(&array![[0.0], [3.0]]).unwrap();
        assert_eq!(d, array![[0.0, 3.0], [3.0, 0.0]]);

        let dup = pairwise_distances(&array![[1.0, 2.0], [1.0, 2.0]]).unwrap();
        assert_eq!(dup[[0, 1]], 0.0);
    }

    #[test]
    fn cloud_weight_validation() {
        let pts = array![[0.0], [1.0]];
        assert!(WeightedPointCloud::new(pts.clone(), array![0.5, 0.6]).is_err());
        assert!(WeightedPointCloud::new(pts.clone(), array![-0.1, 1.1]).is_err());
        assert!(WeightedPointCloud::new(pts, array![0.5, 0.5]).is_ok());
    }

    #[test]
    fn subsample_is_deterministic() {
        let pts = Array2::from_shape_fn((50, 2), |(i, j)| (i * 2 + j) as f64);
        let c = WeightedPointCloud::uniform(pts).unwrap();
        let s1 = c.subsampled(10, 7, rng::SALT_SUBSAMPLE_A);
        let s2 = c.subsampled(10, 7, rng::SALT_SUBSAMPLE_A);
        assert_eq!(s1.points(), s2.points());
        assert_eq!(s1.len(), 10);
        assert!((s1.weights().sum() - 1.0).abs() < 1e-12);
    }
}
