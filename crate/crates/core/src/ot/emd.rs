//! Exact discrete optimal transport via the transportation simplex.
//!
//! Solves `min <cost, X>` over couplings `X >= 0` with prescribed row and
//! column sums. This is the network-flow form of the LP: a basis is a
//! spanning tree of the bipartite supply/demand graph, pivots exchange one
//! arc on the unique cycle the entering arc closes.
//!
//! Pivoting is deterministic: the entering arc is the most negative reduced
//! cost with ties broken by lowest `(row, col)` index, and the leaving arc is
//! the lowest-index arc among those attaining the minimum cycle flow. After a
//! long run of degenerate pivots the entering rule switches to Bland's rule,
//! which cannot cycle.

use ndarray::{Array1, Array2};

use super::TransportPlan;
use crate::error::{Error, Result};

/// Exact EMD solution: optimal value, an optimal plan, and the dual
/// potentials certifying optimality (`cost[i][j] - row_duals[i] -
/// col_duals[j] >= 0` for every cell, with equality on the support).
#[derive(Debug, Clone)]
pub struct EmdSolution {
    pub value: f64,
    pub plan: TransportPlan,
    pub row_duals: Array1<f64>,
    pub col_duals: Array1<f64>,
    pub pivots: usize,
}

/// Exact minimum-cost coupling between discrete measures `mu` and `nu` under
/// the given cost matrix.
pub fn emd_exact(
    cost: &Array2<f64>,
    mu: &Array1<f64>,
    nu: &Array1<f64>,
) -> Result<EmdSolution> {
    let (m, n) = cost.dim();
    if m == 0 || n == 0 {
        return Err(Error::EmptyInput("cost matrix"));
    }
    if mu.len() != m || nu.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "cost is {m}x{n} but weights have lengths {} and {}",
            mu.len(),
            nu.len()
        )));
    }
    for ((i, j), &c) in cost.indexed_iter() {
        if !c.is_finite() {
            return Err(Error::NonFinite(format!("cost[{i}][{j}]")));
        }
        if c < 0.0 {
            return Err(Error::NegativeEntry {
                which: "cost",
                row: i,
                col: j,
            });
        }
    }
    check_probability("row", mu)?;
    check_probability("column", nu)?;

    let mut state = Simplex::new(cost, mu, nu);
    let pivots = state.solve()?;
    let coupling = state.final_flows(mu, nu)?;
    let (u, v) = state.duals();

    let value = coupling
        .indexed_iter()
        .map(|((i, j), &x)| cost[[i, j]] * x)
        .sum::<f64>()
        .max(0.0);

    Ok(EmdSolution {
        value,
        plan: TransportPlan {
            coupling,
            row_marginal: mu.clone(),
            col_marginal: nu.clone(),
        },
        row_duals: u,
        col_duals: v,
        pivots,
    })
}

fn check_probability(which: &'static str, w: &Array1<f64>) -> Result<()> {
    for (i, &x) in w.iter().enumerate() {
        if !x.is_finite() || x < 0.0 {
            return Err(Error::NegativeEntry {
                which: "weights",
                row: i,
                col: 0,
            });
        }
    }
    let sum = w.sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::NotAProbability { which, sum });
    }
    Ok(())
}

/// Spanning-tree simplex state over the `m x n` transportation tableau.
struct Simplex<'a> {
    m: usize,
    n: usize,
    cost: &'a Array2<f64>,
    flow: Vec<f64>,
    in_basis: Vec<bool>,
    // Basic arcs incident to each row node / column node.
    row_arcs: Vec<Vec<usize>>, // row i -> basic column indices
    col_arcs: Vec<Vec<usize>>, // col j -> basic row indices
    u: Vec<f64>,
    v: Vec<f64>,
    enter_tol: f64,
}

impl<'a> Simplex<'a> {
    fn new(cost: &'a Array2<f64>, mu: &Array1<f64>, nu: &Array1<f64>) -> Self {
        let (m, n) = cost.dim();
        let max_c = cost.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let mut s = Self {
            m,
            n,
            cost,
            flow: vec![0.0; m * n],
            in_basis: vec![false; m * n],
            row_arcs: vec![Vec::new(); m],
            col_arcs: vec![Vec::new(); n],
            u: vec![0.0; m],
            v: vec![0.0; n],
            enter_tol: 1e-10 * (1.0 + max_c),
        };
        s.northwest_corner(mu, nu);
        s
    }

    fn id(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }

    /// Initial basic feasible solution; always yields exactly `m + n - 1`
    /// basic arcs forming a spanning tree (some may carry zero flow).
    fn northwest_corner(&mut self, mu: &Array1<f64>, nu: &Array1<f64>) {
        let mut remaining_row: Vec<f64> = mu.to_vec();
        let mut remaining_col: Vec<f64> = nu.to_vec();
        let (mut i, mut j) = (0usize, 0usize);
        loop {
            let f = remaining_row[i].min(remaining_col[j]).max(0.0);
            let id = self.id(i, j);
            self.flow[id] = f;
            self.in_basis[id] = true;
            self.row_arcs[i].push(j);
            self.col_arcs[j].push(i);
            remaining_row[i] -= f;
            remaining_col[j] -= f;
            if i == self.m - 1 && j == self.n - 1 {
                break;
            }
            if j == self.n - 1 {
                i += 1;
            } else if i == self.m - 1 {
                j += 1;
            } else if remaining_row[i] <= remaining_col[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    /// Recompute dual potentials from the basis tree (u[0] fixed at 0).
    fn update_duals(&mut self) {
        let m = self.m;
        let mut seen_row = vec![false; m];
        let mut seen_col = vec![false; self.n];
        // Nodes 0..m are rows, m..m+n are columns.
        let mut stack = vec![0usize];
        self.u[0] = 0.0;
        seen_row[0] = true;
        while let Some(node) = stack.pop() {
            if node < m {
                let i = node;
                for &j in &self.row_arcs[i] {
                    if !seen_col[j] {
                        seen_col[j] = true;
                        self.v[j] = self.cost[[i, j]] - self.u[i];
                        stack.push(m + j);
                    }
                }
            } else {
                let j = node - m;
                for &i in &self.col_arcs[j] {
                    if !seen_row[i] {
                        seen_row[i] = true;
                        self.u[i] = self.cost[[i, j]] - self.v[j];
                        stack.push(i);
                    }
                }
            }
        }
    }

    /// Entering arc under the current rule. `bland` takes the first
    /// improving arc in lexicographic order instead of the most negative.
    fn entering(&self, bland: bool) -> Option<(usize, usize)> {
        let mut best: Option<((usize, usize), f64)> = None;
        for i in 0..self.m {
            for j in 0..self.n {
                if self.in_basis[self.id(i, j)] {
                    continue;
                }
                let r = self.cost[[i, j]] - self.u[i] - self.v[j];
                if r < -self.enter_tol {
                    if bland {
                        return Some((i, j));
                    }
                    if best.map_or(true, |(_, br)| r < br) {
                        best = Some(((i, j), r));
                    }
                }
            }
        }
        best.map(|(cell, _)| cell)
    }

    /// Path of basic arcs from row node `ie` to column node `je` in the
    /// basis tree, as a list of `(i, j)` arcs ordered from the `je` end back
    /// toward `ie`.
    fn tree_path(&self, ie: usize, je: usize) -> Vec<(usize, usize)> {
        let m = self.m;
        let n = self.n;
        // parent[node] = (parent node, arc used)
        let mut parent: Vec<Option<(usize, (usize, usize))>> = vec![None; m + n];
        let mut seen = vec![false; m + n];
        let mut queue = std::collections::VecDeque::new();
        seen[ie] = true;
        queue.push_back(ie);
        'bfs: while let Some(node) = queue.pop_front() {
            if node < m {
                let i = node;
                for &j in &self.row_arcs[i] {
                    let other = m + j;
                    if !seen[other] {
                        seen[other] = true;
                        parent[other] = Some((node, (i, j)));
                        if other == m + je {
                            break 'bfs;
                        }
                        queue.push_back(other);
                    }
                }
            } else {
                let j = node - m;
                for &i in &self.col_arcs[j] {
                    if !seen[i] {
                        seen[i] = true;
                        parent[i] = Some((node, (i, j)));
                        queue.push_back(i);
                    }
                }
            }
        }
        let mut path = Vec::new();
        let mut node = m + je;
        while node != ie {
            let (p, arc) = parent[node].expect("basis tree is spanning");
            path.push(arc);
            node = p;
        }
        path
    }

    /// Run pivots to optimality. Returns the pivot count.
    fn solve(&mut self) -> Result<usize> {
        let budget_phase1 = 200 * (self.m + self.n) + 10_000;
        let budget_total = budget_phase1 + 4_000_000;
        let mut degenerate_streak = 0usize;
        let mut bland = false;
        let mut pivots = 0usize;
        loop {
            self.update_duals();
            let Some((ie, je)) = self.entering(bland) else {
                return Ok(pivots);
            };
            pivots += 1;
            if pivots > budget_total {
                return Err(Error::InvalidArgument(
                    "transportation simplex failed to terminate".into(),
                ));
            }
            if !bland && (pivots > budget_phase1 || degenerate_streak > 4 * (self.m + self.n)) {
                bland = true;
            }

            // Cycle = entering arc plus tree path; arcs at even positions in
            // `path` lose flow.
            let path = self.tree_path(ie, je);
            let mut theta = f64::INFINITY;
            let mut leaving: Option<(usize, usize)> = None;
            for (pos, &(i, j)) in path.iter().enumerate() {
                if pos % 2 == 0 {
                    let f = self.flow[self.id(i, j)];
                    let better = f < theta - 1e-15
                        || (f <= theta + 1e-15
                            && leaving.map_or(true, |(li, lj)| (i, j) < (li, lj)));
                    if better {
                        theta = f.min(theta);
                        leaving = Some((i, j));
                    }
                }
            }
            let (li, lj) = leaving.expect("cycle has at least one losing arc");
            if theta <= 1e-15 {
                degenerate_streak += 1;
            } else {
                degenerate_streak = 0;
            }

            let eid = self.id(ie, je);
            self.flow[eid] = theta.max(0.0);
            for (pos, &(i, j)) in path.iter().enumerate() {
                let id = self.id(i, j);
                if pos % 2 == 0 {
                    self.flow[id] = (self.flow[id] - theta).max(0.0);
                } else {
                    self.flow[id] += theta;
                }
            }

            self.in_basis[eid] = true;
            self.row_arcs[ie].push(je);
            self.col_arcs[je].push(ie);
            let lid = self.id(li, lj);
            self.in_basis[lid] = false;
            self.flow[lid] = 0.0;
            self.row_arcs[li].retain(|&j| j != lj);
            self.col_arcs[lj].retain(|&i| i != li);
        }
    }

    /// Re-derive the basic flows from the marginals by leaf elimination on
    /// the basis tree. This removes the drift accumulated by pivot updates:
    /// each row/column sum reproduces its marginal to within an ulp or two.
    fn final_flows(&self, mu: &Array1<f64>, nu: &Array1<f64>) -> Result<Array2<f64>> {
        let (m, n) = (self.m, self.n);
        let mut degree = vec![0usize; m + n];
        let mut balance: Vec<f64> = mu.to_vec();
        balance.extend(nu.iter().copied());
        let mut arcs_at: Vec<Vec<(usize, usize)>> = vec![Vec::new(); m + n];
        for i in 0..m {
            for &j in &self.row_arcs[i] {
                degree[i] += 1;
                degree[m + j] += 1;
                arcs_at[i].push((i, j));
                arcs_at[m + j].push((i, j));
            }
        }
        let mut resolved = vec![false; m * n];
        let mut out = Array2::zeros((m, n));
        let mut leaves: Vec<usize> = (0..m + n).filter(|&k| degree[k] == 1).collect();
        while let Some(node) = leaves.pop() {
            if degree[node] == 0 {
                continue;
            }
            let &(i, j) = arcs_at[node]
                .iter()
                .find(|&&(i, j)| !resolved[self.id(i, j)])
                .expect("leaf has one unresolved arc");
            let f = balance[node];
            if f < -1e-9 {
                return Err(Error::InvalidArgument(
                    "transportation simplex produced an infeasible basis".into(),
                ));
            }
            let f = f.max(0.0);
            out[[i, j]] = f;
            resolved[self.id(i, j)] = true;
            balance[i] -= f;
            balance[m + j] -= f;
            degree[i] -= 1;
            degree[m + j] -= 1;
            let other = if node == i { m + j } else { i };
            if degree[other] == 1 {
                leaves.push(other);
            }
        }
        Ok(out)
    }

    fn duals(&mut self) -> (Array1<f64>, Array1<f64>) {
        self.update_duals();
        (
            Array1::from_vec(self.u.clone()),
            Array1::from_vec(self.v.clone()),
        )
    }
}
