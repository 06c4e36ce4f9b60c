//! Shared test oracles, independent of the library's solver paths.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use otbandit::measures::{CostTable, DiscreteMeasure};
use otbandit::table::Table;
use rand::Rng;
use rand_chacha::ChaCha12Rng;

/// Exhaustive Kantorovich oracle: enumerate every spanning-tree basis of the
/// transportation polytope, solve the tree flow by leaf elimination, and take
/// the best all-nonnegative one. Exponential; keep `K·K' ≤ 16`.
pub fn kantorovich_brute_force(cost: &CostTable, mu: &[f64], nu: &[f64]) -> f64 {
    let k = mu.len();
    let kp = nu.len();
    let cells = k * kp;
    let basis_size = k + kp - 1;
    let mut best = f64::INFINITY;
    let mut subset: Vec<usize> = (0..basis_size).collect();

    loop {
        if let Some(value) = tree_flow_value(cost, mu, nu, &subset) {
            best = best.min(value);
        }
        // Next combination in lexicographic order.
        let mut i = basis_size;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if subset[i] != i + cells - basis_size {
                subset[i] += 1;
                for j in (i + 1)..basis_size {
                    subset[j] = subset[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Unique flow on a candidate tree basis; `None` when the cells do not form
/// a spanning tree or the flow goes negative.
fn tree_flow_value(cost: &CostTable, mu: &[f64], nu: &[f64], cells: &[usize]) -> Option<f64> {
    let k = mu.len();
    let kp = nu.len();
    let nodes = k + kp;
    let mut degree = vec![0usize; nodes];
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nodes]; // (other, cell idx)
    for (slot, &cell) in cells.iter().enumerate() {
        let i = cell / kp;
        let j = cell % kp;
        degree[i] += 1;
        degree[k + j] += 1;
        adj[i].push((k + j, slot));
        adj[k + j].push((i, slot));
    }
    // Spanning tree on `nodes` vertices needs every node touched; with
    // nodes-1 edges, connectivity follows from acyclicity, which leaf
    // elimination verifies implicitly (it consumes every edge).
    if degree.iter().any(|&d| d == 0) {
        return None;
    }

    let mut supply: Vec<f64> = mu.iter().chain(nu.iter()).copied().collect();
    let mut flows = vec![f64::NAN; cells.len()];
    let mut alive_deg = degree.clone();
    let mut used = vec![false; cells.len()];
    let mut stack: Vec<usize> =
        (0..nodes).filter(|&v| alive_deg[v] == 1).collect();
    let mut consumed = 0;
    while let Some(leaf) = stack.pop() {
        if alive_deg[leaf] != 1 {
            continue;
        }
        let &(other, slot) = adj[leaf].iter().find(|&&(_, s)| !used[s])?;
        used[slot] = true;
        consumed += 1;
        let f = supply[leaf];
        flows[slot] = f;
        supply[leaf] = 0.0;
        supply[other] -= f;
        alive_deg[leaf] -= 1;
        alive_deg[other] -= 1;
        if alive_deg[other] == 1 {
            stack.push(other);
        }
    }
    if consumed != cells.len() {
        return None; // contained a cycle
    }
    if flows.iter().any(|&f| f < -1e-12) {
        return None;
    }
    let mut value = 0.0;
    for (slot, &cell) in cells.iter().enumerate() {
        value += cost.values().as_slice()[cell] * flows[slot].max(0.0);
    }
    Some(value)
}

/// Independent entropic oracle: projected gradient descent on the flat
/// parametrization of the plan, with projection onto the marginal-constraint
/// subspace and Armijo backtracking that keeps the iterate strictly positive.
/// The objective is strictly convex with an interior optimum, so this
/// converges to the global minimum of `⟨c|π⟩ + ε·H(π|ρ)`.
pub fn entropic_oracle(
    cost: &CostTable,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    epsilon: f64,
    iterations: usize,
) -> (f64, Vec<f64>) {
    let k = mu.len();
    let kp = nu.len();
    let cells = k * kp;

    // Constraint matrix A: rows for row sums then column sums.
    let mut a = DMatrix::zeros(k + kp, cells);
    for i in 0..k {
        for j in 0..kp {
            a[(i, i * kp + j)] = 1.0;
            a[(k + j, i * kp + j)] = 1.0;
        }
    }
    let aat = &a * a.transpose();
    let pinv = aat.pseudo_inverse(1e-12).expect("pseudo-inverse exists");
    let project_null = |v: &DVector<f64>| -> DVector<f64> { v - a.transpose() * (&pinv * (&a * v)) };

    let rho: Vec<f64> = (0..cells)
        .map(|cell| mu.weights()[cell / kp] * nu.weights()[cell % kp])
        .collect();
    let c = cost.values().as_slice();
    let objective = |x: &DVector<f64>| -> f64 {
        let mut v = 0.0;
        for idx in 0..cells {
            let xi = x[idx];
            v += c[idx] * xi;
            if xi > 0.0 {
                v += epsilon * xi * (xi / rho[idx]).ln();
            }
        }
        v
    };

    let mut x = DVector::from_column_slice(&rho); // feasible interior start
    let mut value = objective(&x);
    for _ in 0..iterations {
        let grad = DVector::from_fn(cells, |idx, _| {
            c[idx] + epsilon * ((x[idx] / rho[idx]).ln() + 1.0)
        });
        let dir = -project_null(&grad);
        let dnorm = dir.norm();
        if dnorm <= 1e-12 {
            break;
        }
        // Backtracking: stay strictly positive and decrease the objective.
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &x + step * &dir;
            if cand.iter().all(|&v| v > 0.0) {
                let cv = objective(&cand);
                if cv < value - 1e-16 {
                    x = cand;
                    value = cv;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (value, x.iter().copied().collect())
}

pub fn random_cost(k: usize, kp: usize, rng: &mut ChaCha12Rng) -> CostTable {
    CostTable::new(
        Table::from_vec(k, kp, (0..k * kp).map(|_| rng.gen::<f64>()).collect()).unwrap(),
    )
    .unwrap()
}

/// Random non-uniform probability weights bounded away from zero.
pub fn random_weights(n: usize, rng: &mut ChaCha12Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 0.2).collect();
    let sum: f64 = raw.iter().sum();
    raw.iter().map(|w| w / sum).collect()
}

pub fn random_measure(n: usize, rng: &mut ChaCha12Rng) -> DiscreteMeasure {
    let points = (0..n).map(|i| vec![i as f64]).collect();
    DiscreteMeasure::new(points, random_weights(n, rng)).unwrap()
}
