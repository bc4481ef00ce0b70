//! Marginal-preserving perturbations of an allocation.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::problem::{AllocationResult, ProcessTag, RebalanceProblem};

/// Returns `A$ + α·b·E` for a random `E` with zero row and column sums,
/// entries in `[-1, 1]` and support inside the positive cells of `A$`, where
/// `b` is the smallest positive entry of `A$`.
pub fn perturb_allocation(
    problem: &RebalanceProblem,
    result: &AllocationResult,
    alpha: f64,
    seed: u64,
) -> Result<AllocationResult> {
    check_alpha(alpha)?;
    let cycles = support_cycles(&result.values);
    if cycles.is_empty() {
        return Err(Error::NoPerturbationPossible);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (m, n) = result.values.shape();
    let direction = loop {
        let mut e = DMatrix::<f64>::zeros(m, n);
        for cycle in &cycles {
            let w: f64 = rng.random_range(-1.0..=1.0);
            for &(i, j, sign) in cycle {
                e[(i, j)] += w * sign;
            }
        }
        let scale = e.amax();
        if scale > 0.0 {
            break e / scale;
        }
    };
    Ok(apply(problem, result, alpha, &direction))
}

/// Perturbs along a caller-supplied direction `E`.
pub fn perturb_with_matrix(
    problem: &RebalanceProblem,
    result: &AllocationResult,
    alpha: f64,
    direction: &DMatrix<f64>,
) -> Result<AllocationResult> {
    check_alpha(alpha)?;
    if direction.shape() != result.values.shape() {
        return Err(Error::InvalidPerturbation("shape differs from the allocation".into()));
    }
    if direction.amax() > 1.0 {
        return Err(Error::InvalidPerturbation("entries must lie in [-1, 1]".into()));
    }
    let slack = 1e-12 * direction.nrows().max(direction.ncols()) as f64;
    let sums_vanish =
        direction.row_iter().all(|r| r.sum().abs() <= slack) && direction.column_iter().all(|c| c.sum().abs() <= slack);
    if !sums_vanish {
        return Err(Error::InvalidPerturbation("row and column sums must be zero".into()));
    }
    let outside_support = direction
        .iter()
        .zip(result.values.iter())
        .any(|(&e, &v)| e != 0.0 && v <= 0.0);
    if outside_support {
        return Err(Error::InvalidPerturbation(
            "support must lie inside the positive cells".into(),
        ));
    }
    Ok(apply(problem, result, alpha, direction))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidPerturbation(format!("alpha {alpha} outside [0, 1]")));
    }
    Ok(())
}

fn apply(
    problem: &RebalanceProblem,
    result: &AllocationResult,
    alpha: f64,
    direction: &DMatrix<f64>,
) -> AllocationResult {
    if alpha == 0.0 {
        return result.clone();
    }
    let smallest = result
        .values
        .iter()
        .copied()
        .filter(|&v| v > 0.0)
        .fold(f64::INFINITY, f64::min);
    let values = &result.values + direction * (alpha * smallest);
    AllocationResult::from_values(
        problem,
        values,
        ProcessTag::Perturbed,
        result.tolerance.max(problem.exact_tolerance()),
    )
}

/// Signed cells of the fundamental cycles of the support graph.
///
/// The support of `A$` is a bipartite graph on asset classes and portfolios.
/// Every edge outside a spanning forest closes an even cycle; alternating signs
/// around it gives a direction with zero row and column sums.
fn support_cycles(values: &DMatrix<f64>) -> Vec<Vec<(usize, usize, f64)>> {
    let (m, n) = values.shape();
    let nodes = m + n;
    let neighbours = |v: usize| -> Vec<usize> {
        if v < m {
            (0..n).filter(|&j| values[(v, j)] > 0.0).map(|j| m + j).collect()
        } else {
            (0..m).filter(|&i| values[(i, v - m)] > 0.0).collect()
        }
    };

    let mut parent: Vec<Option<usize>> = vec![None; nodes];
    let mut depth = vec![0usize; nodes];
    let mut seen = vec![false; nodes];
    let mut tree_edge = DMatrix::from_element(m, n, false);
    for root in 0..nodes {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            for w in neighbours(v) {
                if !seen[w] {
                    seen[w] = true;
                    parent[w] = Some(v);
                    depth[w] = depth[v] + 1;
                    let (i, j) = cell(v, w, m);
                    tree_edge[(i, j)] = true;
                    queue.push_back(w);
                }
            }
        }
    }

    let mut cycles = Vec::new();
    for i in 0..m {
        for j in 0..n {
            if values[(i, j)] <= 0.0 || tree_edge[(i, j)] {
                continue;
            }
            // Walk both ends up to their common ancestor.
            let (mut u, mut w) = (i, m + j);
            let mut left = vec![u];
            let mut right = vec![w];
            while u != w {
                if depth[u] >= depth[w] {
                    u = parent[u].expect("non-root has parent");
                    left.push(u);
                } else {
                    w = parent[w].expect("non-root has parent");
                    right.push(w);
                }
            }
            right.pop();
            left.extend(right.into_iter().rev());
            // left now runs i → ancestor → j; the closing edge is (j, i).
            let len = left.len();
            let cycle = (0..len)
                .map(|k| {
                    let (a, b) = (left[k], left[(k + 1) % len]);
                    let (r, c) = cell(a, b, m);
                    (r, c, if k % 2 == 0 { 1.0 } else { -1.0 })
                })
                .collect();
            cycles.push(cycle);
        }
    }
    cycles
}

fn cell(a: usize, b: usize, m: usize) -> (usize, usize) {
    if a < m {
        (a, b - m)
    } else {
        (b, a - m)
    }
}
