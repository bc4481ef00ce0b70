use nalgebra::{DMatrix, DVector};

use crate::classic::{banker_rebalance, linear_rebalance, BankerConfig};
use crate::error::{Error, Result};
use crate::market_invariant::ipf::{ipf_solve, DEFAULT_MAX_ITER};
use crate::problem::RebalanceProblem;
use crate::simulation::config::{BankerInfeasibility, ProcessKind, ShadowMode, SimulationConfig, VarianceKind};

/// Outcome of one simulated horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    /// `p_j^T / p_j^0 − 1` for each portfolio.
    pub portfolio_returns: Vec<f64>,
    /// Mean per-period simple return of each asset class, weighted by starting asset value.
    pub weighted_return: f64,
    /// Per-period return variance of each asset class with the same weights.
    pub weighted_variance: f64,
    pub shadow_return: Option<f64>,
    /// Return of the shadowed portfolio minus the shadow's return.
    pub banker_minus_shadow: Option<f64>,
    /// Return paths drawn before this one succeeded.
    pub attempts: usize,
    /// Periods whose allocation held a negative entry.
    pub negative_periods: usize,
    /// Largest `|Σp − Σa| / Σa` seen across periods.
    pub max_conservation_error: f64,
}

/// Applies returns then rebalances, period by period, starting at target.
pub fn run_trial(config: &SimulationConfig, returns: &DMatrix<f64>) -> Result<TrialResult> {
    let (m, n) = (config.n_assets(), config.n_portfolios());
    if returns.shape() != (m, config.n_periods) {
        return Err(Error::DimensionMismatch {
            what: "returns",
            expected: m * config.n_periods,
            found: returns.len(),
        });
    }

    let joint = matches!((config.shadow_of, config.shadow_mode), (Some(_), ShadowMode::Joint));
    let (target, start) = if let (true, Some(s)) = (joint, config.shadow_of) {
        let mut target = config.target.clone().insert_column(n, 0.0);
        target.set_column(n, &config.target.column(s));
        let start = config
            .start_portfolios
            .clone()
            .insert_row(n, config.start_portfolios[s]);
        (target, start)
    } else {
        (config.target.clone(), config.start_portfolios.clone())
    };
    let width = target.ncols();

    let allow_negative = config.on_infeasible == BankerInfeasibility::AllowNegative;
    let mut values = DMatrix::from_fn(m, width, |i, j| target[(i, j)] * start[j]);
    let mut shadow = config.shadow_of.map(|s| config.start_portfolios[s]);
    let mut negative_periods = 0;
    let mut max_conservation_error: f64 = 0.0;

    for period in 0..config.n_periods {
        for i in 0..m {
            values.row_mut(i).scale_mut(returns[(i, period)]);
        }
        if let (Some(s), ShadowMode::Compound) = (config.shadow_of, config.shadow_mode) {
            let growth: f64 = (0..m).map(|i| config.target[(i, s)] * returns[(i, period)]).sum();
            shadow = shadow.map(|v| v * growth);
        }
        let assets = DVector::from_iterator(m, values.row_iter().map(|r| r.sum()));
        let portfolios = DVector::from_iterator(width, values.column_iter().map(|c| c.sum()));
        let total = assets.sum();
        max_conservation_error = max_conservation_error.max((portfolios.sum() - total).abs() / total);

        let wrap = |source: Error| Error::PeriodFailure {
            process: config.process.name().to_string(),
            period,
            source: Box::new(source),
        };
        let problem = RebalanceProblem::new(target.clone(), assets, portfolios).map_err(wrap)?;
        let result = match config.process {
            ProcessKind::MarketInvariant => {
                ipf_solve(&problem, DEFAULT_MAX_ITER, config.ipf_tol * problem.total()).map(|(r, _, _)| r)
            }
            ProcessKind::Banker => banker_rebalance(
                &problem,
                BankerConfig {
                    banker_index: config.banker_index,
                    allow_negative,
                },
            ),
            ProcessKind::Linear => linear_rebalance(&problem, allow_negative),
        }
        .map_err(wrap)?;
        if result.values.iter().any(|&v| v < 0.0) {
            negative_periods += 1;
        }
        values = result.values;
    }

    let end = DVector::from_iterator(width, values.column_iter().map(|c| c.sum()));
    let portfolio_returns: Vec<f64> = (0..n).map(|j| end[j] / config.start_portfolios[j] - 1.0).collect();
    let shadow_return = match (config.shadow_of, config.shadow_mode) {
        (Some(s), ShadowMode::Compound) => shadow.map(|v| v / config.start_portfolios[s] - 1.0),
        (Some(s), ShadowMode::Joint) => Some(end[n] / config.start_portfolios[s] - 1.0),
        (None, _) => None,
    };
    let banker_minus_shadow = config
        .shadow_of
        .zip(shadow_return)
        .map(|(s, shadow)| portfolio_returns[s] - shadow);
    let (weighted_return, weighted_variance) = weighted_moments(config, returns);

    Ok(TrialResult {
        trial: 0,
        portfolio_returns,
        weighted_return,
        weighted_variance,
        shadow_return,
        banker_minus_shadow,
        attempts: 1,
        negative_periods,
        max_conservation_error,
    })
}

/// Mean and variance of each asset class's simple returns, averaged with
/// weights proportional to the starting asset values.
pub fn weighted_moments(config: &SimulationConfig, returns: &DMatrix<f64>) -> (f64, f64) {
    let weights = config.start_assets();
    let total = weights.sum();
    let t = returns.ncols() as f64;
    let divisor = match config.variance {
        VarianceKind::Population => t,
        VarianceKind::Sample => t - 1.0,
    };
    let mut mean_acc = 0.0;
    let mut var_acc = 0.0;
    for (i, row) in returns.row_iter().enumerate() {
        let mean = row.iter().map(|g| g - 1.0).sum::<f64>() / t;
        let var = row.iter().map(|g| (g - 1.0 - mean).powi(2)).sum::<f64>() / divisor;
        mean_acc += weights[i] * mean;
        var_acc += weights[i] * var;
    }
    (mean_acc / total, var_acc / total)
}
