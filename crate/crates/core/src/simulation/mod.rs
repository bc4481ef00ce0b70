//! Multi-period comparison of rebalancing processes under random asset returns.

pub mod config;
pub mod ols;
pub mod permutation;
pub mod returns;
pub mod study;
pub mod summary;
pub mod trial;

pub use config::{BankerInfeasibility, ProcessKind, ShadowMode, SimulationConfig, VarianceKind};
pub use ols::{ols_regress, RegressionResult};
pub use permutation::{permutation_inequality_check, PermutationReport};
pub use returns::{gen_returns, tether, trial_returns, trial_rng};
pub use study::{run_seeded_trial, run_study, StudyReport};
pub use summary::{summarize_study, Histogram, StudySummary};
pub use trial::{run_trial, weighted_moments, TrialResult};
