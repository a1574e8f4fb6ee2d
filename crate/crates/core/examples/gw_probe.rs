use otfs::dataset::{planted_dataset, PlantedConfig};
use otfs::distmat::FeatureSet;
use otfs::gw_select::gw_to_full;
use otfs::ot::GwConfig;

fn probe(delta: f64, relevant: usize, noise: usize, n: usize, cap: usize, eps: f64, base: usize, steps: usize) {
    let mut bad = 0;
    let mut worst = f64::INFINITY;
    for seed in 0..10u64 {
        let ds = planted_dataset(&PlantedConfig {
            n, classes: 2, delta, relevant, noise, seed: 100 + seed,
        }).unwrap();
        let cfg = GwConfig { epsilon: eps, seed, normalize_metrics: false, ..GwConfig::default() };
        let gwd = |cols: Vec<usize>| -> f64 {
            gw_to_full(&ds, &FeatureSet::new(cols, ds.d()).unwrap(), &cfg, cap).unwrap().gwd
        };
        // both chains start from the same base of `base` relevant columns
        let rel: Vec<f64> = (0..=steps).map(|k| (0..base + k).collect()).map(&gwd).collect();
        let noi: Vec<f64> = (0..=steps).map(|k| {
            let mut v: Vec<usize> = (0..base).collect();
            v.extend(relevant..relevant + k);
            v
        }).map(&gwd).collect();
        for k in 1..=steps {
            let dr = rel[k - 1] - rel[k];
            let dn = noi[k - 1] - noi[k];
            if !(rel[k] < rel[k - 1] + 1e-6 && dn < dr) {
                bad += 1;
                println!("  seed {seed} step {k}: rel d {:.4}  noise d {:.4}", dr, dn);
            }
            worst = worst.min(dr - dn);
        }
    }
    println!("delta={delta} rel={relevant} noise={noise} base={base} eps={eps}: bad {bad}/{} worst margin {worst:.4}", 10 * steps);
}

fn main() {
    probe(4.0, 6, 5, 240, 80, 0.05, 1, 4);
    probe(3.0, 6, 5, 240, 80, 0.05, 1, 4);
    probe(4.0, 6, 5, 240, 60, 0.1, 1, 4);
}
