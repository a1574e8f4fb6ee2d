//! Property-based invariants of the transport kernels, criteria, and data
//! handling.

mod common;

use ndarray::Array2;
use proptest::prelude::*;

use otfs::dataset::{load_csv, save_csv, zscore_filter, Dataset};
use otfs::distmat::{
    class_distance_matrix, frobenius_utility, matrix_similarity, mean_scale, DistanceMode,
    DistmatConfig, FeatureSet,
};
use otfs::eval::spearman_correlation;
use otfs::ot::{
    emd_exact, sliced_wasserstein1, wasserstein1_1d, wasserstein1_nd, TransportPlan,
    WeightedPointCloud,
};
use otfs::select::{greedy_forward, Criterion, SelectionConfig, Strategy as SearchStrategy};

fn samples(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0..100.0f64, 1..=max_len)
}

proptest! {
    #[test]
    fn w1_1d_is_symmetric_and_zero_on_self(a in samples(12), b in samples(12)) {
        let ab = wasserstein1_1d(&a, &b).unwrap();
        let ba = wasserstein1_1d(&b, &a).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert_eq!(wasserstein1_1d(&a, &a).unwrap(), 0.0);
        prop_assert!(ab >= 0.0);
    }

    #[test]
    fn w1_1d_triangle_inequality(a in samples(10), b in samples(10), c in samples(10)) {
        let ab = wasserstein1_1d(&a, &b).unwrap();
        let bc = wasserstein1_1d(&b, &c).unwrap();
        let ac = wasserstein1_1d(&a, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-9, "{} > {} + {}", ac, ab, bc);
    }

    #[test]
    fn w1_1d_translation_and_scale(a in samples(10), b in samples(10),
                                   shift in -50.0..50.0f64, scale in 0.1..10.0f64) {
        let base = wasserstein1_1d(&a, &b).unwrap();
        let at: Vec<f64> = a.iter().map(|v| v + shift).collect();
        let bt: Vec<f64> = b.iter().map(|v| v + shift).collect();
        prop_assert!((wasserstein1_1d(&at, &bt).unwrap() - base).abs() < 1e-9);
        let asc: Vec<f64> = a.iter().map(|v| v * scale).collect();
        let bsc: Vec<f64> = b.iter().map(|v| v * scale).collect();
        prop_assert!((wasserstein1_1d(&asc, &bsc).unwrap() - scale * base).abs() < 1e-9 * (1.0 + scale));
    }

    #[test]
    fn emd_plan_is_feasible_and_value_bounded(
        (m, n) in (2usize..=5, 2usize..=5),
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let cost = Array2::from_shape_fn((m, n), |_| rng.gen_range(0.0..3.0));
        let mu = common::random_simplex(&mut rng, m);
        let nu = common::random_simplex(&mut rng, n);
        let sol = emd_exact(&cost, &mu, &nu).unwrap();
        prop_assert!(sol.value >= 0.0);
        sol.plan.validate().unwrap();

        // No coupling can beat the optimum; the independent one is a handy
        // upper bound.
        let independent = TransportPlan::independent(&mu, &nu);
        let upper: f64 = cost
            .indexed_iter()
            .map(|((i, j), &c)| c * independent.coupling[[i, j]])
            .sum();
        prop_assert!(sol.value <= upper + 1e-9);

        // Transpose symmetry.
        let transposed = emd_exact(&cost.t().to_owned(), &nu, &mu).unwrap();
        prop_assert!((sol.value - transposed.value).abs() < 1e-9);

        // Dual certificate.
        for ((i, j), &c) in cost.indexed_iter() {
            let reduced = c - sol.row_duals[i] - sol.col_duals[j];
            prop_assert!(reduced >= -1e-8);
            prop_assert!((reduced * sol.plan.coupling[[i, j]]).abs() <= 1e-8);
        }
    }

    #[test]
    fn w1_nd_symmetry_and_translation(seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let na = rng.gen_range(1..=8);
        let nb = rng.gen_range(1..=8);
        let d = rng.gen_range(1..=3);
        let a = Array2::from_shape_fn((na, d), |_| rng.gen_range(-5.0..5.0));
        let b = Array2::from_shape_fn((nb, d), |_| rng.gen_range(-5.0..5.0));
        let shift: Vec<f64> = (0..d).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let ca = WeightedPointCloud::uniform(a.clone()).unwrap();
        let cb = WeightedPointCloud::uniform(b.clone()).unwrap();
        let ab = wasserstein1_nd(&ca, &cb, 16, 0).unwrap();
        let ba = wasserstein1_nd(&cb, &ca, 16, 0).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12, "symmetry: {} vs {}", ab, ba);

        let at = Array2::from_shape_fn((na, d), |(i, j)| a[[i, j]] + shift[j]);
        let bt = Array2::from_shape_fn((nb, d), |(i, j)| b[[i, j]] + shift[j]);
        let cat = WeightedPointCloud::uniform(at).unwrap();
        let cbt = WeightedPointCloud::uniform(bt).unwrap();
        let translated = wasserstein1_nd(&cat, &cbt, 16, 0).unwrap();
        prop_assert!((translated - ab).abs() < 1e-9, "translation: {} vs {}", translated, ab);
    }

    #[test]
    fn sliced_is_symmetric_given_shared_seed(seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = Array2::from_shape_fn((4, 2), |_| rng.gen_range(-3.0..3.0));
        let b = Array2::from_shape_fn((6, 2), |_| rng.gen_range(-3.0..3.0));
        let ca = WeightedPointCloud::uniform(a).unwrap();
        let cb = WeightedPointCloud::uniform(b).unwrap();
        let ab = sliced_wasserstein1(&ca, &cb, 16, seed).unwrap();
        let ba = sliced_wasserstein1(&cb, &ca, 16, seed).unwrap();
        prop_assert_eq!(ab, ba);
    }

    #[test]
    fn frobenius_monotone_under_domination(seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let k = rng.gen_range(2..=5);
        // Build dominated pair of datasets by scaling one class column.
        let upper = common::random_metric(&mut rng, k, 0.5, 2.0);
        let mut lower = upper.clone();
        for i in 0..k {
            for j in (i + 1)..k {
                let shrink = rng.gen_range(0.2..1.0);
                lower[[i, j]] *= shrink;
                lower[[j, i]] = lower[[i, j]];
            }
        }
        // Utilities via synthetic single-point datasets are overkill here;
        // the Frobenius form is linear algebra, checked directly.
        let fu = |m: &Array2<f64>| m.iter().map(|v| v * v).sum::<f64>();
        prop_assert!(fu(&upper) >= fu(&lower));
    }

    #[test]
    fn spearman_stays_in_unit_interval(pairs in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 2..20)) {
        let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        if let Some(rho) = spearman_correlation(&a, &b) {
            prop_assert!((-1.0..=1.0).contains(&rho));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn csv_round_trip_is_bit_exact(
        rows in 1usize..6,
        cols in 1usize..4,
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((rows, cols), |_| {
            let mag = rng.gen_range(-300i32..300) as f64;
            let v: f64 = rng.gen_range(-1.0..1.0);
            v * 10f64.powf(mag / 10.0)
        });
        let ds = Dataset::new(x, None).unwrap();
        let file = tempfile::NamedTempFile::new().unwrap();
        save_csv(&ds, file.path()).unwrap();
        let back = load_csv(file.path(), true, None).unwrap();
        prop_assert_eq!(ds.x(), back.x());
    }

    #[test]
    fn greedy_supervised_trace_is_monotone(seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(8..=20);
        let d = rng.gen_range(2..=4);
        let x = Array2::from_shape_fn((n, d), |_| rng.gen_range(-2.0..2.0));
        let labels: Vec<String> = (0..n).map(|i| format!("c{}", i % 2)).collect();
        let ds = Dataset::with_labels(x, &labels, None).unwrap();
        // Raw (unstandardized) metric: appending a coordinate can only grow
        // Euclidean distances, hence the exact W1 matrix and its utility.
        let cfg = SelectionConfig {
            criterion: Criterion::FrobeniusSupervised,
            strategy: SearchStrategy::Greedy,
            m: d,
            distmat: DistmatConfig {
                mode: DistanceMode::Exact,
                standardize: false,
                ..DistmatConfig::default()
            },
            ..SelectionConfig::default()
        };
        let result = greedy_forward(&ds, &cfg).unwrap();
        let scores: Vec<f64> = result.score_trace.iter().map(|e| e.score).collect();
        for w in scores.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9, "trace decreased: {:?}", scores);
        }
    }

    #[test]
    fn zscore_filter_is_idempotent_after_outlier_removal(seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = 400;
        let mut values: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        values[13] = 1e6; // single extreme outlier
        let x = Array2::from_shape_vec((n, 1), values).unwrap();
        let ds = Dataset::new(x, None).unwrap();
        let (once, removed_first) = zscore_filter(&ds, 10.0).unwrap();
        prop_assert_eq!(removed_first, vec![13]);
        let (_, removed_second) = zscore_filter(&once, 10.0).unwrap();
        prop_assert!(removed_second.is_empty(), "second pass removed {:?}", removed_second);
    }

    #[test]
    fn matrix_similarity_proportional_after_mean_scale(seed in any::<u64>()) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let k = 3;
        let entries = common::random_metric(&mut rng, k, 0.1, 3.0);
        // Route through a dataset so the matrices carry class names.
        let ds = three_class_dataset(&entries);
        let m = class_distance_matrix(&ds, &FeatureSet::full(1), &DistmatConfig::default()).unwrap();
        if frobenius_utility(&m) > 0.0 {
            let scaled = mean_scale(&m).unwrap();
            let sim = matrix_similarity(&m, &scaled, false).unwrap();
            prop_assert!((sim - 1.0).abs() < 1e-12);
        }
    }
}

/// A 1D three-class dataset whose single-point classes sit at 0, a, b so the
/// class distance matrix is fully determined.
fn three_class_dataset(target: &Array2<f64>) -> Dataset {
    let positions = [0.0, target[[0, 1]], target[[0, 2]]];
    let x = Array2::from_shape_vec((3, 1), positions.to_vec()).unwrap();
    let labels: Vec<String> = (0..3).map(|c| format!("c{c}")).collect();
    Dataset::with_labels(x, &labels, None).unwrap()
}
