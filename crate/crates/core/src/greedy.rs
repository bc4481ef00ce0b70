//! Greedy min-fill allocation.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::feasibility::BipartiteFlow;
use crate::problem::{AllocationResult, ProcessTag, RebalanceProblem};

/// Fills each cell with the smaller of the remaining row and column budgets,
/// sweeping asset classes within each portfolio.
///
/// With `enforce_zero_pattern` cells where `M_ij = 0` stay empty, and any demand
/// the sweep strands is rerouted along augmenting paths.
pub fn greedy_allocate(problem: &RebalanceProblem, enforce_zero_pattern: bool) -> Result<AllocationResult> {
    let (m, n) = problem.shape();
    let target = problem.target();
    let mut row_left: Vec<f64> = problem.assets().iter().copied().collect();
    let mut col_left: Vec<f64> = problem.portfolios().iter().copied().collect();
    let mut values = DMatrix::zeros(m, n);

    for j in 0..n {
        for i in 0..m {
            if enforce_zero_pattern && target[(i, j)] <= 0.0 {
                continue;
            }
            let fill = row_left[i].min(col_left[j]).max(0.0);
            values[(i, j)] = fill;
            row_left[i] -= fill;
            col_left[j] -= fill;
        }
    }

    if enforce_zero_pattern {
        let mut flow = BipartiteFlow::new(problem, values);
        flow.saturate();
        let report = flow.report();
        if let Some(witness) = report.witness {
            return Err(Error::Infeasible(witness));
        }
        values = flow.flow;
    } else {
        // Σa and Σp agree only to validation tolerance; park the difference in the last cell.
        if let Some(last) = (0..m).rev().find(|&i| row_left[i].abs() > 0.0) {
            values[(last, n - 1)] += row_left[last];
        }
    }

    Ok(AllocationResult::from_values(
        problem,
        values,
        ProcessTag::Greedy,
        problem.exact_tolerance(),
    ))
}
