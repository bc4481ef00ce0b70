//! The rebalancing problem `(M, a, p)` and allocation results.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default tolerance on column sums of `M`.
pub const DEFAULT_COL_TOL: f64 = 1e-9;
/// Default relative tolerance on `|Σa − Σp|`.
pub const DEFAULT_TOTAL_TOL: f64 = 1e-9;
/// Relative marginal tolerance declared by processes that are exact by construction.
pub const EXACT_TOL: f64 = 1e-12;
/// Default relative marginal tolerance for iterative processes.
pub const DEFAULT_MARGINAL_TOL: f64 = 1e-9;

/// Validation tolerances for [`RebalanceProblem`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub col: f64,
    pub total: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            col: DEFAULT_COL_TOL,
            total: DEFAULT_TOTAL_TOL,
        }
    }
}

/// A validated rebalancing problem.
///
/// Rows of `M` are asset classes and columns are portfolios.
#[derive(Debug, Clone, PartialEq)]
pub struct RebalanceProblem {
    target: DMatrix<f64>,
    assets: DVector<f64>,
    portfolios: DVector<f64>,
}

/// Checks `(M, a, p)` and returns a problem. Nothing is normalized.
pub fn validate_problem(
    target: DMatrix<f64>,
    assets: DVector<f64>,
    portfolios: DVector<f64>,
    tol: Tolerances,
) -> Result<RebalanceProblem> {
    let (m, n) = target.shape();
    if assets.len() != m {
        return Err(Error::DimensionMismatch {
            what: "a",
            expected: m,
            found: assets.len(),
        });
    }
    if portfolios.len() != n {
        return Err(Error::DimensionMismatch {
            what: "p",
            expected: n,
            found: portfolios.len(),
        });
    }
    check_entries("M", target.as_slice())?;
    check_entries("a", assets.as_slice())?;
    check_entries("p", portfolios.as_slice())?;

    for (j, col) in target.column_iter().enumerate() {
        let sum = col.sum();
        if (sum - 1.0).abs() > tol.col {
            return Err(Error::ColumnSum { column: j, sum });
        }
    }

    let total_a = assets.sum();
    let total_p = portfolios.sum();
    if (total_a - total_p).abs() > tol.total * total_a.max(total_p) {
        return Err(Error::TotalMismatch {
            assets: total_a,
            portfolios: total_p,
        });
    }

    Ok(RebalanceProblem {
        target,
        assets,
        portfolios,
    })
}

fn check_entries(what: &'static str, values: &[f64]) -> Result<()> {
    for (index, &value) in values.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite { what, index });
        }
        if value < 0.0 {
            return Err(Error::NegativeEntry { what, index, value });
        }
    }
    Ok(())
}

impl RebalanceProblem {
    /// Validates with default tolerances.
    pub fn new(target: DMatrix<f64>, assets: DVector<f64>, portfolios: DVector<f64>) -> Result<Self> {
        validate_problem(target, assets, portfolios, Tolerances::default())
    }

    /// Builds a problem from row slices of `M`.
    pub fn from_rows(rows: &[Vec<f64>], assets: &[f64], portfolios: &[f64]) -> Result<Self> {
        let target = matrix_from_rows(rows)?;
        Self::new(
            target,
            DVector::from_column_slice(assets),
            DVector::from_column_slice(portfolios),
        )
    }

    pub fn target(&self) -> &DMatrix<f64> {
        &self.target
    }

    pub fn assets(&self) -> &DVector<f64> {
        &self.assets
    }

    pub fn portfolios(&self) -> &DVector<f64> {
        &self.portfolios
    }

    pub fn n_assets(&self) -> usize {
        self.target.nrows()
    }

    pub fn n_portfolios(&self) -> usize {
        self.target.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.target.shape()
    }

    /// `Σa`, the scale used by relative tolerances.
    pub fn total(&self) -> f64 {
        self.assets.sum()
    }

    /// Target values `M·diag(p)`.
    pub fn target_values(&self) -> DMatrix<f64> {
        scale_columns(&self.target, &self.portfolios)
    }

    /// `Mp`, the asset totals implied by holding every portfolio at target.
    pub fn implied_assets(&self) -> DVector<f64> {
        &self.target * &self.portfolios
    }

    /// Marginal tolerance for processes that are exact up to rounding: `1e-12·Σa`
    /// plus whatever mismatch between `Σa` and `Σp` validation let through.
    pub fn exact_tolerance(&self) -> f64 {
        EXACT_TOL * self.total() + (self.total() - self.portfolios.sum()).abs()
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.target.iter().all(|&v| v > 0.0)
    }
}

/// Builds a dense matrix from rows, rejecting ragged input.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let m = rows.len();
    let n = rows.first().map_or(0, Vec::len);
    for row in rows {
        if row.len() != n {
            return Err(Error::DimensionMismatch {
                what: "row of M",
                expected: n,
                found: row.len(),
            });
        }
    }
    Ok(DMatrix::from_fn(m, n, |i, j| rows[i][j]))
}

/// Rows of a matrix as nested vectors.
pub fn matrix_to_rows(matrix: &DMatrix<f64>) -> Vec<Vec<f64>> {
    matrix.row_iter().map(|row| row.iter().copied().collect()).collect()
}

pub(crate) fn scale_columns(matrix: &DMatrix<f64>, weights: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(matrix.nrows(), matrix.ncols(), |i, j| matrix[(i, j)] * weights[j])
}

pub(crate) fn row_sums(matrix: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(matrix.nrows(), matrix.row_iter().map(|r| r.sum()))
}

pub(crate) fn col_sums(matrix: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(matrix.ncols(), matrix.column_iter().map(|c| c.sum()))
}

/// Identifies the process that produced an allocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProcessTag {
    Greedy,
    Banker { banker: usize },
    Linear,
    ProportionalBanker { banker: usize },
    MarketInvariant,
    Analytic,
    GroupedHybrid,
    Perturbed,
}

impl ProcessTag {
    pub fn name(&self) -> &'static str {
        match self {
            ProcessTag::Greedy => "greedy",
            ProcessTag::Banker { .. } => "banker",
            ProcessTag::Linear => "linear",
            ProcessTag::ProportionalBanker { .. } => "proportional-banker",
            ProcessTag::MarketInvariant => "market-invariant",
            ProcessTag::Analytic => "analytic",
            ProcessTag::GroupedHybrid => "hybrid",
            ProcessTag::Perturbed => "perturbed",
        }
    }
}

impl fmt::Display for ProcessTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Proportions `A` and values `A$` of an allocation, with marginal residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationResult {
    pub proportions: DMatrix<f64>,
    pub values: DMatrix<f64>,
    pub process: ProcessTag,
    pub residual_row: DVector<f64>,
    pub residual_col: DVector<f64>,
    /// Absolute marginal tolerance the producing process guarantees.
    pub tolerance: f64,
}

impl AllocationResult {
    /// Wraps `A$`, deriving `A` and the residuals against `problem`.
    pub fn from_values(problem: &RebalanceProblem, values: DMatrix<f64>, process: ProcessTag, tolerance: f64) -> Self {
        let proportions = proportions_from_values(&values, problem.portfolios(), problem.target());
        Self::from_parts(problem, proportions, values, process, tolerance)
    }

    pub fn from_parts(
        problem: &RebalanceProblem,
        proportions: DMatrix<f64>,
        values: DMatrix<f64>,
        process: ProcessTag,
        tolerance: f64,
    ) -> Self {
        let residual_row = (row_sums(&values) - problem.assets()).abs();
        let residual_col = (col_sums(&values) - problem.portfolios()).abs();
        AllocationResult {
            proportions,
            values,
            process,
            residual_row,
            residual_col,
            tolerance,
        }
    }

    pub fn max_row_residual(&self) -> f64 {
        self.residual_row.amax()
    }

    pub fn max_col_residual(&self) -> f64 {
        self.residual_col.amax()
    }

    pub fn satisfies_marginals(&self) -> bool {
        self.max_row_residual() <= self.tolerance && self.max_col_residual() <= self.tolerance
    }

    /// True if no value is below `-slack`.
    pub fn is_non_negative(&self, slack: f64) -> bool {
        self.values.iter().all(|&v| v >= -slack)
    }
}

/// `A = A$ / p` column-wise; columns with `p_j = 0` copy `M`.
pub fn proportions_from_values(
    values: &DMatrix<f64>,
    portfolios: &DVector<f64>,
    target: &DMatrix<f64>,
) -> DMatrix<f64> {
    DMatrix::from_fn(values.nrows(), values.ncols(), |i, j| {
        if portfolios[j] > 0.0 {
            values[(i, j)] / portfolios[j]
        } else {
            target[(i, j)]
        }
    })
}
