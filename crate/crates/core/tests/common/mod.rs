//! Independent reference implementations ("oracles") used to validate the
//! solvers. Everything here is deliberately brute force and shares no code
//! with the implementation paths it checks.

#![allow(dead_code)]

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Exact transportation LP by enumerating the basic feasible solutions of
/// the polytope: every spanning tree of the bipartite graph K_{m,n} induces
/// one basic solution; the optimum is the cheapest nonnegative one.
/// Exponential in `m + n`; intended for `m, n <= 4`.
pub fn lp_vertex_oracle(cost: &Array2<f64>, mu: &[f64], nu: &[f64]) -> f64 {
    let (m, n) = cost.dim();
    let arcs: Vec<(usize, usize)> = (0..m)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .collect();
    let basis_size = m + n - 1;
    let mut best = f64::INFINITY;
    let mut combo: Vec<usize> = (0..basis_size).collect();
    loop {
        if let Some(value) = tree_solution_cost(cost, mu, nu, &combo, &arcs) {
            best = best.min(value);
        }
        // next combination
        let mut i = basis_size;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if combo[i] != i + arcs.len() - basis_size {
                combo[i] += 1;
                for k in (i + 1)..basis_size {
                    combo[k] = combo[k - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Solve the flows of one candidate basis by leaf elimination; `None` if the
/// arcs do not form a spanning tree or the flows go negative.
fn tree_solution_cost(
    cost: &Array2<f64>,
    mu: &[f64],
    nu: &[f64],
    combo: &[usize],
    arcs: &[(usize, usize)],
) -> Option<f64> {
    let (m, n) = cost.dim();
    let nodes = m + n;
    let mut degree = vec![0usize; nodes];
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    for (slot, &a) in combo.iter().enumerate() {
        let (i, j) = arcs[a];
        degree[i] += 1;
        degree[m + j] += 1;
        incident[i].push(slot);
        incident[m + j].push(slot);
    }
    let mut balance: Vec<f64> = mu.iter().chain(nu.iter()).copied().collect();
    let mut resolved = vec![false; combo.len()];
    let mut flows = vec![0.0f64; combo.len()];
    let mut stack: Vec<usize> = (0..nodes).filter(|&v| degree[v] == 1).collect();
    let mut done = 0;
    while let Some(node) = stack.pop() {
        if degree[node] != 1 {
            continue;
        }
        let slot = *incident[node].iter().find(|&&s| !resolved[s])?;
        let (i, j) = arcs[combo[slot]];
        let f = balance[node];
        if f < -1e-9 {
            return None;
        }
        flows[slot] = f.max(0.0);
        resolved[slot] = true;
        done += 1;
        balance[i] -= flows[slot];
        balance[m + j] -= flows[slot];
        degree[i] -= 1;
        degree[m + j] -= 1;
        let other = if node == i { m + j } else { i };
        if degree[other] == 1 {
            stack.push(other);
        }
    }
    if done != combo.len() {
        return None; // cycle or disconnected: not a spanning tree
    }
    let mut total = 0.0;
    for (slot, &a) in combo.iter().enumerate() {
        let (i, j) = arcs[a];
        total += cost[[i, j]] * flows[slot];
    }
    Some(total)
}

/// Direct evaluation of the (p=1, q=1) GW objective for a 3x3 or general
/// small plan. Straight quadruple loop, no shortcuts.
pub fn gw_objective_direct(dx: &Array2<f64>, dy: &Array2<f64>, plan: &Array2<f64>) -> f64 {
    let (na, nb) = plan.dim();
    let mut total = 0.0;
    for i in 0..na {
        for j in 0..nb {
            for i2 in 0..na {
                for j2 in 0..nb {
                    total += (dx[[i, i2]] - dy[[j, j2]]).abs() * plan[[i, j]] * plan[[i2, j2]];
                }
            }
        }
    }
    total
}

/// Dense grid search with local refinement over the 4-dimensional polytope
/// of 3x3 couplings with uniform marginals. Returns the best objective
/// value found (an upper bound on the global optimum that tightens with
/// resolution).
pub fn gw_grid_oracle_3x3(dx: &Array2<f64>, dy: &Array2<f64>) -> f64 {
    let third = 1.0 / 3.0;
    let mut center = [third / 2.0; 4];
    let mut radius = third / 2.0;
    let mut best = f64::INFINITY;
    for _level in 0..4 {
        let steps = 10i32;
        let mut level_best = best;
        let mut level_point = center;
        for a in -steps..=steps {
            for b in -steps..=steps {
                for c in -steps..=steps {
                    for d in -steps..=steps {
                        let point = [
                            center[0] + radius * a as f64 / steps as f64,
                            center[1] + radius * b as f64 / steps as f64,
                            center[2] + radius * c as f64 / steps as f64,
                            center[3] + radius * d as f64 / steps as f64,
                        ];
                        if let Some(plan) = coupling_from_free(point) {
                            let value = gw_objective_direct(dx, dy, &plan);
                            if value < level_best {
                                level_best = value;
                                level_point = point;
                            }
                        }
                    }
                }
            }
        }
        best = level_best;
        center = level_point;
        radius /= steps as f64;
    }
    best
}

/// Rebuild a full 3x3 coupling with uniform marginals from the four free
/// entries (pi00, pi01, pi10, pi11); `None` when infeasible.
fn coupling_from_free(free: [f64; 4]) -> Option<Array2<f64>> {
    let third = 1.0 / 3.0;
    let [p00, p01, p10, p11] = free;
    let p02 = third - p00 - p01;
    let p12 = third - p10 - p11;
    let p20 = third - p00 - p10;
    let p21 = third - p01 - p11;
    let p22 = p00 + p01 + p10 + p11 - third;
    let entries = [p00, p01, p02, p10, p11, p12, p20, p21, p22];
    if entries.iter().any(|&v| v < -1e-12) {
        return None;
    }
    Some(Array2::from_shape_vec((3, 3), entries.map(|v| v.max(0.0)).to_vec()).unwrap())
}

/// Exhaustive search over the one-parameter family of 2x2 couplings with
/// uniform marginals: plan(t) = [[t, 1/2 - t], [1/2 - t, t]].
pub fn gw_grid_oracle_2x2(dx: &Array2<f64>, dy: &Array2<f64>, steps: usize) -> f64 {
    let mut best = f64::INFINITY;
    for k in 0..=steps {
        let t = 0.5 * k as f64 / steps as f64;
        let plan = Array2::from_shape_vec((2, 2), vec![t, 0.5 - t, 0.5 - t, t]).unwrap();
        best = best.min(gw_objective_direct(dx, dy, &plan));
    }
    best
}

/// Average of the projected 1D W1 over a dense deterministic grid of
/// directions on the unit circle (quadrature oracle for sliced W1 in 2D,
/// uniform weights, equal sample counts).
pub fn sliced_circle_quadrature(a: &Array2<f64>, b: &Array2<f64>, grid: usize) -> f64 {
    assert_eq!(a.ncols(), 2);
    let mut total = 0.0;
    for s in 0..grid {
        let theta = std::f64::consts::PI * (s as f64 + 0.5) / grid as f64;
        let dir = [theta.cos(), theta.sin()];
        let mut pa: Vec<f64> = a
            .rows()
            .into_iter()
            .map(|r| r[0] * dir[0] + r[1] * dir[1])
            .collect();
        let mut pb: Vec<f64> = b
            .rows()
            .into_iter()
            .map(|r| r[0] * dir[0] + r[1] * dir[1])
            .collect();
        pa.sort_by(f64::total_cmp);
        pb.sort_by(f64::total_cmp);
        total += w1_sorted_equal_counts(&pa, &pb);
    }
    total / grid as f64
}

/// W1 between sorted equal-count samples: mean absolute difference of order
/// statistics.
pub fn w1_sorted_equal_counts(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

/// Naive double-loop Euclidean distance matrix.
pub fn pairwise_double_loop(x: &Array2<f64>) -> Array2<f64> {
    let n = x.nrows();
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..x.ncols() {
                let d = x[[i, k]] - x[[j, k]];
                s += d * d;
            }
            out[[i, j]] = s.sqrt();
        }
    }
    out
}

/// Random probability vector with strictly positive entries.
pub fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Array1<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    Array1::from_vec(raw.into_iter().map(|v| v / total).collect())
}

/// Random symmetric zero-diagonal "distance" matrix (entries need not obey
/// the triangle inequality; the GW solver only requires symmetry).
pub fn random_metric(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Array2<f64> {
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let v = rng.gen_range(lo..hi);
            d[[i, j]] = v;
            d[[j, i]] = v;
        }
    }
    d
}
