//! Iterative proportional fitting with residual distribution.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::feasibility::check_feasibility;
use crate::market_invariant::scaling::{Normalization, ScalingSolution};
use crate::problem::{AllocationResult, ProcessTag, RebalanceProblem, DEFAULT_MARGINAL_TOL};

/// Default sweep limit.
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// When to stop sweeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Stop once `max |M(k,a) − M(k,p)| ≤ q` (absolute), giving up after `max_iter` sweeps.
    Gap { q: f64, max_iter: usize },
    /// Run exactly this many sweeps.
    Sweeps(usize),
}

impl StopRule {
    /// Gap rule with `q = 1e-9·Σa`.
    pub fn default_for(problem: &RebalanceProblem) -> Self {
        StopRule::Gap {
            q: DEFAULT_MARGINAL_TOL * problem.total(),
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IpfTrace {
    /// Completed column-then-row sweeps.
    pub iterations_used: usize,
    /// Final `max |M(k,a) − M(k,p)|`.
    pub max_gap: f64,
    /// `max_i |Σ_j A$_ij − a_i|` before the residual is distributed.
    pub row_gap: f64,
    pub converged: bool,
    /// `max_gap` after the initial row scaling and after every sweep.
    pub gap_history: Vec<f64>,
    /// `(min_i, max_i)` of `Σ_j M(k,p)_ij / a_i` for the same snapshots.
    pub row_ratio_bracket: Vec<(f64, f64)>,
    /// Largest entry of the residual distribution added in the final step.
    pub max_correction: f64,
}

/// Solves the market-invariant allocation with a gap tolerance `q` (absolute).
pub fn ipf_solve(
    problem: &RebalanceProblem,
    max_iter: usize,
    q: f64,
) -> Result<(AllocationResult, ScalingSolution, IpfTrace)> {
    ipf_with(problem, StopRule::Gap { q, max_iter })
}

/// Solves the market-invariant allocation under an explicit stopping rule.
pub fn ipf_with(problem: &RebalanceProblem, stop: StopRule) -> Result<(AllocationResult, ScalingSolution, IpfTrace)> {
    let (m, n) = problem.shape();
    let target = problem.target();
    if !problem.is_strictly_positive() {
        let report = check_feasibility(problem, true);
        if let Some(witness) = report.witness {
            return Err(Error::Infeasible(witness));
        }
    }

    let rows: Vec<usize> = (0..m).filter(|&i| problem.assets()[i] > 0.0).collect();
    let cols: Vec<usize> = (0..n).filter(|&j| problem.portfolios()[j] > 0.0).collect();
    let live = DMatrix::from_fn(rows.len(), cols.len(), |r, c| target[(rows[r], cols[c])]);
    let a = DVector::from_iterator(rows.len(), rows.iter().map(|&i| problem.assets()[i]));
    let p = DVector::from_iterator(cols.len(), cols.iter().map(|&j| problem.portfolios()[j]));

    let fit = fit_live(&live, &a, &p, stop)?;

    let mut values = DMatrix::zeros(m, n);
    let mut x_prime = DVector::zeros(m);
    let mut p_prime = DVector::zeros(n);
    for (r, &i) in rows.iter().enumerate() {
        x_prime[i] = fit.log_x[r].exp();
        for (c, &j) in cols.iter().enumerate() {
            values[(i, j)] = fit.values[(r, c)];
        }
    }
    for (c, &j) in cols.iter().enumerate() {
        p_prime[j] = fit.log_p[c].exp();
    }

    let tolerance = problem.exact_tolerance();
    let result = AllocationResult::from_values(problem, values, ProcessTag::MarketInvariant, tolerance);
    let scaling = ScalingSolution::new(problem, x_prime, p_prime, Normalization::P1EqualsOne);
    Ok((result, scaling, fit.trace))
}

struct LiveFit {
    values: DMatrix<f64>,
    log_x: DVector<f64>,
    log_p: DVector<f64>,
    trace: IpfTrace,
}

fn fit_live(target: &DMatrix<f64>, a: &DVector<f64>, p: &DVector<f64>, stop: StopRule) -> Result<LiveFit> {
    let (m, n) = target.shape();
    let mut log_x = DVector::<f64>::zeros(m);
    let mut log_p = p.map(f64::ln);
    let mut mp = DMatrix::from_fn(m, n, |i, j| target[(i, j)] * p[j]);
    let mut gap_history = Vec::new();
    let mut row_ratio_bracket = Vec::new();

    // Row scaling of M(k,p) gives M(k,a); returns the factors and the gap.
    let row_stage = |mp: &DMatrix<f64>, bracket: &mut Vec<(f64, f64)>| {
        let mut rho = DVector::zeros(m);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..m {
            let sum = mp.row(i).sum();
            rho[i] = a[i] / sum;
            let ratio = sum / a[i];
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
        bracket.push((lo, hi));
        let mut gap: f64 = 0.0;
        for j in 0..n {
            for i in 0..m {
                gap = gap.max((mp[(i, j)] * (rho[i] - 1.0)).abs());
            }
        }
        (rho, gap)
    };

    let (mut rho, mut gap) = row_stage(&mp, &mut row_ratio_bracket);
    gap_history.push(gap);
    let mut sweeps = 0;
    loop {
        let done = match stop {
            StopRule::Gap { q, max_iter } => gap <= q || sweeps >= max_iter,
            StopRule::Sweeps(r) => sweeps >= r,
        };
        if done {
            break;
        }
        for i in 0..m {
            log_x[i] += rho[i].ln();
            for j in 0..n {
                mp[(i, j)] *= rho[i];
            }
        }
        for j in 0..n {
            let kappa = p[j] / mp.column(j).sum();
            log_p[j] += kappa.ln();
            mp.column_mut(j).scale_mut(kappa);
        }
        (rho, gap) = row_stage(&mp, &mut row_ratio_bracket);
        gap_history.push(gap);
        sweeps += 1;
    }

    let converged = match stop {
        StopRule::Gap { q, .. } => {
            if gap > 100.0 * q {
                return Err(Error::NonConvergence {
                    iterations: sweeps,
                    max_gap: gap,
                });
            }
            gap <= q
        }
        StopRule::Sweeps(_) => true,
    };

    let total_p = p.sum();
    let d = DVector::from_fn(m, |i, _| a[i] - mp.row(i).sum());
    let row_gap = d.amax();
    let mut max_correction: f64 = 0.0;
    let mut values = mp;
    for j in 0..n {
        let share = p[j] / total_p;
        for i in 0..m {
            let correction = d[i] * share;
            max_correction = max_correction.max(correction.abs());
            values[(i, j)] += correction;
        }
    }

    Ok(LiveFit {
        values,
        log_x,
        log_p,
        trace: IpfTrace {
            iterations_used: sweeps,
            max_gap: gap,
            row_gap,
            converged,
            gap_history,
            row_ratio_bracket,
            max_correction,
        },
    })
}
