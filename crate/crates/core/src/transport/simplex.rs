//! Transportation simplex for the exact Kantorovich LP.
//!
//! North-west-corner start, MODI duals, and Bland's rule throughout: the
//! entering cell is the lowest-index cell with negative reduced cost, and the
//! leaving cell is the lowest-index cell among the minimum-ratio candidates.
//! Bland's rule makes degenerate pivots safe (no cycling), which matters on
//! the transportation polytope where degeneracy is routine.

use crate::table::Table;
use crate::transport::TransportError;

const PIVOT_BUDGET_PER_CELL: usize = 200;

/// Solve `min Σ c_ij x_ij` s.t. row sums `= mu`, column sums `= nu`, `x ≥ 0`.
pub(crate) fn solve(cost: &Table, mu: &[f64], nu: &[f64]) -> Result<Table, TransportError> {
    let k = mu.len();
    let kp = nu.len();
    let mut basis = northwest_corner(mu, nu);
    let tol = 1e-11 * (1.0 + cost.max_abs());
    let budget = PIVOT_BUDGET_PER_CELL * (k * kp + k + kp);

    for _ in 0..budget {
        let (u, v) = duals(&basis, cost, k, kp);
        let entering = entering_cell(&basis, cost, &u, &v, k, kp, tol);
        let Some((ei, ej)) = entering else {
            let mut plan = Table::zeros(k, kp);
            for &(i, j, f) in &basis {
                plan.set(i, j, f.max(0.0));
            }
            return Ok(plan);
        };
        pivot(&mut basis, ei, ej, k, kp);
    }
    Err(TransportError::PivotLimit)
}

/// Initial basic feasible solution with exactly `k + kp - 1` cells forming a
/// spanning tree (degenerate zero flows included on ties).
fn northwest_corner(mu: &[f64], nu: &[f64]) -> Vec<(usize, usize, f64)> {
    let k = mu.len();
    let kp = nu.len();
    let mut a = mu.to_vec();
    let mut b = nu.to_vec();
    let mut basis = Vec::with_capacity(k + kp - 1);
    let (mut i, mut j) = (0, 0);
    loop {
        let f = a[i].min(b[j]);
        basis.push((i, j, f));
        a[i] -= f;
        b[j] -= f;
        if basis.len() == k + kp - 1 {
            return basis;
        }
        // Move off the exhausted side; prefer advancing the row on ties so
        // the staircase still ends at the bottom-right corner.
        if a[i] <= b[j] && i + 1 < k {
            i += 1;
        } else {
            j += 1;
        }
    }
}

/// MODI duals on the basis tree: `u_i + v_j = c_ij` on basic cells, `u_0 = 0`.
fn duals(basis: &[(usize, usize, f64)], cost: &Table, k: usize, kp: usize) -> (Vec<f64>, Vec<f64>) {
    let adj = adjacency(basis, k, kp);
    let mut u = vec![f64::NAN; k];
    let mut v = vec![f64::NAN; kp];
    u[0] = 0.0;
    let mut stack = vec![0usize]; // node ids: rows 0..k, cols k..k+kp
    while let Some(node) = stack.pop() {
        for &(other, bidx) in &adj[node] {
            let (i, j, _) = basis[bidx];
            if node < k {
                if v[j].is_nan() {
                    v[j] = cost.get(i, j) - u[i];
                    stack.push(other);
                }
            } else if u[i].is_nan() {
                u[i] = cost.get(i, j) - v[j];
                stack.push(other);
            }
        }
    }
    (u, v)
}

fn adjacency(basis: &[(usize, usize, f64)], k: usize, kp: usize) -> Vec<Vec<(usize, usize)>> {
    let mut adj = vec![Vec::new(); k + kp];
    for (bidx, &(i, j, _)) in basis.iter().enumerate() {
        adj[i].push((k + j, bidx));
        adj[k + j].push((i, bidx));
    }
    adj
}

/// Lowest-index cell with reduced cost below `-tol` (Bland's rule).
fn entering_cell(
    basis: &[(usize, usize, f64)],
    cost: &Table,
    u: &[f64],
    v: &[f64],
    k: usize,
    kp: usize,
    tol: f64,
) -> Option<(usize, usize)> {
    let mut in_basis = vec![false; k * kp];
    for &(i, j, _) in basis {
        in_basis[i * kp + j] = true;
    }
    for i in 0..k {
        for j in 0..kp {
            if !in_basis[i * kp + j] && cost.get(i, j) - u[i] - v[j] < -tol {
                return Some((i, j));
            }
        }
    }
    None
}

/// Add the entering cell, shift flow around the unique tree cycle, and drop
/// the lowest-index minimum-ratio cell.
fn pivot(basis: &mut Vec<(usize, usize, f64)>, ei: usize, ej: usize, k: usize, kp: usize) {
    let adj = adjacency(basis, k, kp);
    // Path from the entering column node to the entering row node; together
    // with the entering cell it closes the cycle.
    let path = tree_path(&adj, k + ej, ei);

    // Walking the path from the column end, odd-positioned cells gain flow
    // and even-positioned cells lose it (the entering cell gains).
    let mut minus_cells: Vec<usize> = Vec::new();
    let mut plus_cells: Vec<usize> = Vec::new();
    for (step, &bidx) in path.iter().enumerate() {
        if step % 2 == 0 {
            minus_cells.push(bidx);
        } else {
            plus_cells.push(bidx);
        }
    }
    let theta = minus_cells
        .iter()
        .map(|&b| basis[b].2)
        .fold(f64::INFINITY, f64::min)
        .max(0.0);
    let leaving = minus_cells
        .iter()
        .copied()
        .filter(|&b| basis[b].2 <= theta + 0.0)
        .min_by_key(|&b| basis[b].0 * kp + basis[b].1)
        .expect("cycle has at least one minus cell");

    for &b in &minus_cells {
        basis[b].2 = (basis[b].2 - theta).max(0.0);
    }
    for &b in &plus_cells {
        basis[b].2 += theta;
    }
    basis.swap_remove(leaving);
    basis.push((ei, ej, theta));
}

/// Basis-edge indices along the unique tree path between two nodes.
fn tree_path(adj: &[Vec<(usize, usize)>], from: usize, to: usize) -> Vec<usize> {
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; adj.len()];
    let mut visited = vec![false; adj.len()];
    visited[from] = true;
    let mut queue = std::collections::VecDeque::from([from]);
    while let Some(node) = queue.pop_front() {
        if node == to {
            break;
        }
        for &(other, bidx) in &adj[node] {
            if !visited[other] {
                visited[other] = true;
                parent[other] = Some((node, bidx));
                queue.push_back(other);
            }
        }
    }
    let mut path = Vec::new();
    let mut node = to;
    while let Some((prev, bidx)) = parent[node] {
        path.push(bidx);
        node = prev;
    }
    path.reverse();
    path
}
