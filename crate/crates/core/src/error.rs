use thiserror::Error;

use crate::feasibility::FeasibilityWitness;

/// Errors produced by the rebalancing library.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {what} has length {found}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{what} has a negative entry {value} at index {index}")]
    NegativeEntry {
        what: &'static str,
        index: usize,
        value: f64,
    },

    #[error("{what} has a non-finite entry at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("column {} of M sums to {sum}, not 1", column + 1)]
    ColumnSum { column: usize, sum: f64 },

    #[error("asset total {assets} does not match portfolio total {portfolios}")]
    TotalMismatch { assets: f64, portfolios: f64 },

    #[error("problem is infeasible under the zero pattern: {0}")]
    Infeasible(FeasibilityWitness),

    #[error("banker process is infeasible: asset class {} needs {value} in the banker portfolio", asset_class + 1)]
    BankerInfeasible { asset_class: usize, value: f64 },

    #[error("negative allocation {value} for asset class {} in portfolio {}", asset_class + 1, portfolio + 1)]
    NegativeAllocation {
        asset_class: usize,
        portfolio: usize,
        value: f64,
    },

    #[error("invalid banker portfolio {}: {reason}", index + 1)]
    InvalidBanker { index: usize, reason: &'static str },

    #[error("no convergence after {iterations} sweeps (max gap {max_gap:e})")]
    NonConvergence { iterations: usize, max_gap: f64 },

    #[error("analytic solver supports (2,2),(2,3),(3,2),(2,4),(4,2); got ({rows},{cols})")]
    UnsupportedShape { rows: usize, cols: usize },

    #[error("analytic solver requires a strictly positive target matrix")]
    NonPositiveTarget,

    #[error("degenerate problem: {0}")]
    Degenerate(&'static str),

    #[error("no root of the characteristic polynomial yields a non-negative allocation")]
    NoPositiveRoot,

    #[error("row {} of M is zero and cannot be rescaled", row + 1)]
    ZeroRow { row: usize },

    #[error("allocation has no cycle in its support, so it cannot be perturbed")]
    NoPerturbationPossible,

    #[error("invalid perturbation: {0}")]
    InvalidPerturbation(String),

    #[error("allocation puts {value} on asset class {} of portfolio {} where the target is zero", asset_class + 1, portfolio + 1)]
    StructuralZero {
        asset_class: usize,
        portfolio: usize,
        value: f64,
    },

    #[error("dual constraints violated by {violation:e}")]
    DualInfeasible { violation: f64 },

    #[error("invalid partition tree: {0}")]
    InvalidPartition(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("returns for asset class {} are not tethered (cumulative gross return {product})", asset_class + 1)]
    NotTethered { asset_class: usize, product: f64 },

    #[error("{process} process failed in period {}: {source}", period + 1)]
    PeriodFailure {
        process: String,
        period: usize,
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors that report an infeasible problem rather than bad input.
    pub fn is_infeasible(&self) -> bool {
        match self {
            Error::Infeasible(_) | Error::BankerInfeasible { .. } | Error::NegativeAllocation { .. } => true,
            Error::PeriodFailure { source, .. } => source.is_infeasible(),
            _ => false,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Parse(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Parse(err.to_string())
    }
}
