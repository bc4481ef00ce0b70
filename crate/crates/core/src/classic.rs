//! Banker, linear and proportional-then-banker processes.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::problem::{AllocationResult, ProcessTag, RebalanceProblem, EXACT_TOL};

/// The portfolio that absorbs residuals, and whether it may go short.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BankerConfig {
    /// 0-based portfolio index.
    pub banker_index: usize,
    pub allow_negative: bool,
}

impl BankerConfig {
    pub fn new(banker_index: usize) -> Self {
        BankerConfig {
            banker_index,
            allow_negative: false,
        }
    }

    fn check(&self, problem: &RebalanceProblem) -> Result<()> {
        let b = self.banker_index;
        if b >= problem.n_portfolios() {
            return Err(Error::InvalidBanker {
                index: b,
                reason: "index out of range",
            });
        }
        if problem.portfolios()[b] <= 0.0 {
            return Err(Error::InvalidBanker {
                index: b,
                reason: "banker portfolio must have positive value",
            });
        }
        Ok(())
    }
}

/// Every portfolio except the banker holds its target; the banker takes the rest.
pub fn banker_rebalance(problem: &RebalanceProblem, config: BankerConfig) -> Result<AllocationResult> {
    config.check(problem)?;
    let values = problem.target_values();
    absorb_in_banker(
        problem,
        values,
        config,
        ProcessTag::Banker {
            banker: config.banker_index,
        },
    )
}

/// Overwrites the banker column of `values` with the row residuals.
fn absorb_in_banker(
    problem: &RebalanceProblem,
    mut values: DMatrix<f64>,
    config: BankerConfig,
    process: ProcessTag,
) -> Result<AllocationResult> {
    let b = config.banker_index;
    let (m, n) = problem.shape();
    let slack = problem.exact_tolerance();
    for i in 0..m {
        let others: f64 = (0..n).filter(|&j| j != b).map(|j| values[(i, j)]).sum();
        let banker = problem.assets()[i] - others;
        if banker < -slack && !config.allow_negative {
            return Err(Error::BankerInfeasible {
                asset_class: i,
                value: banker,
            });
        }
        values[(i, b)] = banker;
    }
    let mut proportions = problem.target().clone();
    let pb = problem.portfolios()[b];
    for i in 0..m {
        proportions[(i, b)] = values[(i, b)] / pb;
    }
    for j in (0..n).filter(|&j| j != b) {
        for i in 0..m {
            if problem.portfolios()[j] > 0.0 {
                proportions[(i, j)] = values[(i, j)] / problem.portfolios()[j];
            }
        }
    }
    if process == (ProcessTag::Banker { banker: b }) {
        // Non-banker columns are M verbatim; avoid the division round trip.
        for j in (0..n).filter(|&j| j != b) {
            proportions.set_column(j, &problem.target().column(j));
        }
    }
    Ok(AllocationResult::from_parts(
        problem,
        proportions,
        values,
        process,
        slack,
    ))
}

/// The linear overweight `d_i = (a_i − (Mp)_i) / Σa`.
pub fn linear_overweights(problem: &RebalanceProblem) -> DVector<f64> {
    let total = problem.total();
    if total == 0.0 {
        return DVector::zeros(problem.n_assets());
    }
    (problem.assets() - problem.implied_assets()) / total
}

/// Shifts every portfolio's weight in asset class `i` by the same `d_i`.
pub fn linear_rebalance(problem: &RebalanceProblem, allow_negative: bool) -> Result<AllocationResult> {
    let d = linear_overweights(problem);
    let (m, n) = problem.shape();
    let proportions = DMatrix::from_fn(m, n, |i, j| problem.target()[(i, j)] + d[i]);
    let slack = EXACT_TOL;
    if !allow_negative {
        for j in 0..n {
            for i in 0..m {
                if proportions[(i, j)] < -slack {
                    return Err(Error::NegativeAllocation {
                        asset_class: i,
                        portfolio: j,
                        value: proportions[(i, j)],
                    });
                }
            }
        }
    }
    let values = DMatrix::from_fn(m, n, |i, j| proportions[(i, j)] * problem.portfolios()[j]);
    Ok(AllocationResult::from_parts(
        problem,
        proportions,
        values,
        ProcessTag::Linear,
        problem.exact_tolerance(),
    ))
}

/// Scales each asset class by `q_i = a_i / (Mp)_i`, rescales non-banker
/// columns back to their totals, then lets the banker absorb row residuals.
pub fn proportional_then_banker(problem: &RebalanceProblem, config: BankerConfig) -> Result<AllocationResult> {
    config.check(problem)?;
    let b = config.banker_index;
    let (m, n) = problem.shape();
    let q = proportional_factors(problem);
    let mut values = problem.target_values();
    for j in (0..n).filter(|&j| j != b) {
        let provisional: Vec<f64> = (0..m).map(|i| values[(i, j)] * q[i]).collect();
        let sum: f64 = provisional.iter().sum();
        if sum > 0.0 {
            let scale = problem.portfolios()[j] / sum;
            for i in 0..m {
                values[(i, j)] = provisional[i] * scale;
            }
        }
    }
    absorb_in_banker(problem, values, config, ProcessTag::ProportionalBanker { banker: b })
}

/// `q_i = a_i / (Mp)_i`, taken as 1 where `(Mp)_i = 0`.
pub fn proportional_factors(problem: &RebalanceProblem) -> DVector<f64> {
    let implied = problem.implied_assets();
    DVector::from_fn(problem.n_assets(), |i, _| {
        if implied[i] > 0.0 {
            problem.assets()[i] / implied[i]
        } else {
            1.0
        }
    })
}

/// Which process objective to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    /// Squared deviation from `M` outside the banker column (0-based index).
    Banker(usize),
    /// Squared deviation from `M + d`.
    Linear,
}

/// Sum of squared deviations of `A` from what the chosen process targets.
pub fn process_objective(result: &AllocationResult, problem: &RebalanceProblem, kind: ObjectiveKind) -> f64 {
    let (m, n) = problem.shape();
    let a = &result.proportions;
    let target = problem.target();
    match kind {
        ObjectiveKind::Banker(b) => (0..n)
            .filter(|&j| j != b)
            .flat_map(|j| (0..m).map(move |i| (i, j)))
            .map(|(i, j)| (a[(i, j)] - target[(i, j)]).powi(2))
            .sum(),
        ObjectiveKind::Linear => {
            let d = linear_overweights(problem);
            (0..n)
                .flat_map(|j| (0..m).map(move |i| (i, j)))
                .map(|(i, j)| (a[(i, j)] - (target[(i, j)] + d[i])).powi(2))
                .sum()
        }
    }
}
