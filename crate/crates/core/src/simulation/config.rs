use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::problem::{RebalanceProblem, Tolerances};

/// Rebalancing process applied at the end of every period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProcessKind {
    MarketInvariant,
    /// Uses [`SimulationConfig::banker_index`] as the banker.
    Banker,
    Linear,
}

impl ProcessKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProcessKind::MarketInvariant => "market-invariant",
            ProcessKind::Banker => "banker",
            ProcessKind::Linear => "linear",
        }
    }
}

/// How the shadow portfolio evolves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShadowMode {
    /// Compounds on its own at its target weights.
    Compound,
    /// Joins the rebalance as an extra portfolio.
    Joint,
}

/// What to do when a banker or linear allocation goes negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BankerInfeasibility {
    /// Carry the negative holdings forward.
    AllowNegative,
    /// Discard the trial and draw a fresh return path from the same stream.
    Resample,
}

/// Population (divide by T) or sample (divide by T − 1) variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarianceKind {
    Population,
    Sample,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub target: DMatrix<f64>,
    pub start_portfolios: DVector<f64>,
    pub n_periods: usize,
    pub n_trials: usize,
    pub tethered: bool,
    pub process: ProcessKind,
    /// 0-based banker portfolio.
    pub banker_index: usize,
    /// 0-based portfolio whose target column the shadow copies.
    pub shadow_of: Option<usize>,
    pub shadow_mode: ShadowMode,
    pub on_infeasible: BankerInfeasibility,
    pub variance: VarianceKind,
    /// Relative gap tolerance for the market-invariant solve.
    pub ipf_tol: f64,
    pub seed: u64,
}

/// Largest number of return paths drawn for one trial under resampling.
pub const MAX_ATTEMPTS: usize = 1_000;

impl SimulationConfig {
    /// Five asset classes and four portfolios with the second as banker and shadowed.
    pub fn reference() -> Self {
        let target = DMatrix::from_row_slice(
            5,
            4,
            &[
                0.2, 0.05, 0.05, 0.01, //
                0.2, 0.05, 0.05, 0.02, //
                0.15, 0.25, 0.25, 0.35, //
                0.15, 0.30, 0.30, 0.40, //
                0.3, 0.35, 0.35, 0.22,
            ],
        );
        SimulationConfig {
            target,
            start_portfolios: DVector::from_vec(vec![50.0, 540.0, 50.0, 80.0]),
            n_periods: 30,
            n_trials: 10_000,
            tethered: true,
            process: ProcessKind::MarketInvariant,
            banker_index: 1,
            shadow_of: Some(1),
            shadow_mode: ShadowMode::Compound,
            on_infeasible: BankerInfeasibility::AllowNegative,
            variance: VarianceKind::Population,
            ipf_tol: 1e-13,
            seed: 0,
        }
    }

    pub fn n_assets(&self) -> usize {
        self.target.nrows()
    }

    pub fn n_portfolios(&self) -> usize {
        self.target.ncols()
    }

    /// Starting asset values `M·p⁰`, the weights for the summary statistics.
    pub fn start_assets(&self) -> DVector<f64> {
        &self.target * &self.start_portfolios
    }

    pub fn validate(&self) -> Result<()> {
        let assets = self.start_assets();
        crate::problem::validate_problem(
            self.target.clone(),
            assets,
            self.start_portfolios.clone(),
            Tolerances::default(),
        )?;
        let n = self.n_portfolios();
        if self.n_periods == 0 || (self.tethered && self.n_periods < 3) {
            return Err(Error::InvalidConfig("tethered returns need at least 3 periods".into()));
        }
        if self.n_trials == 0 {
            return Err(Error::InvalidConfig("at least one trial is required".into()));
        }
        if self.banker_index >= n {
            return Err(Error::InvalidBanker {
                index: self.banker_index,
                reason: "index out of range",
            });
        }
        if self.start_portfolios[self.banker_index] <= 0.0 && self.process == ProcessKind::Banker {
            return Err(Error::InvalidBanker {
                index: self.banker_index,
                reason: "banker portfolio must have positive value",
            });
        }
        if let Some(s) = self.shadow_of {
            if s >= n {
                return Err(Error::InvalidConfig(format!("shadow portfolio {} out of range", s + 1)));
            }
            if self.start_portfolios[s] <= 0.0 {
                return Err(Error::InvalidConfig(
                    "shadowed portfolio must have positive value".into(),
                ));
            }
        }
        if self.ipf_tol.is_nan() || self.ipf_tol <= 0.0 {
            return Err(Error::InvalidConfig("ipf tolerance must be positive".into()));
        }
        Ok(())
    }

    /// The problem solved in the first period before any returns.
    pub fn start_problem(&self) -> Result<RebalanceProblem> {
        RebalanceProblem::new(self.target.clone(), self.start_assets(), self.start_portfolios.clone())
    }
}
