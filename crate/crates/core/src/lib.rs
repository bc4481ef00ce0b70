//! Internal rebalancing of pooled assets across portfolios.
//!
//! A fund holds `m` asset classes on behalf of `n` portfolios. Given target
//! proportions `M` (columns sum to 1), current asset-class totals `a` and
//! portfolio totals `p`, a rebalancing process chooses an allocation `A$`
//! whose rows sum to `a` and columns to `p`.

pub mod classic;
pub mod error;
pub mod feasibility;
pub mod greedy;
pub mod hybrid;
pub mod io;
pub mod market_invariant;
pub mod perturb;
pub mod problem;
pub mod simulation;

pub use classic::{
    banker_rebalance, linear_rebalance, process_objective, proportional_then_banker, BankerConfig, ObjectiveKind,
};
pub use error::{Error, Result};
pub use feasibility::{check_feasibility, FeasibilityReport, FeasibilityWitness};
pub use greedy::greedy_allocate;
pub use hybrid::{grouped_hybrid, IndexTree, PartitionTree};
pub use market_invariant::{
    analytic_2x2, analytic_2x3, analytic_2x4, analytic_solve, dual_objective, equation_residuals, ipf_solve,
    kl_objective, transpose_reduce, verify_market_invariance, Branch, ScalingSolution,
};
pub use perturb::{perturb_allocation, perturb_with_matrix};
pub use problem::{
    proportions_from_values, validate_problem, AllocationResult, ProcessTag, RebalanceProblem, Tolerances,
};
