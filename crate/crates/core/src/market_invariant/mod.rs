//! The market-invariant process: biproportional fitting of `M` to `(a, p)`.

pub mod analytic;
pub mod duality;
pub mod invariance;
pub mod ipf;
pub mod poly;
pub mod scaling;

pub use analytic::{
    analytic_2x2, analytic_2x3, analytic_2x4, analytic_solutions, analytic_solve, transpose_reduce, AnalyticSolution,
    Branch,
};
pub use duality::{dual_objective, kl_objective, DualCertificate};
pub use invariance::verify_market_invariance;
pub use ipf::{ipf_solve, ipf_with, IpfTrace, StopRule, DEFAULT_MAX_ITER};
pub use scaling::{equation_residuals, Normalization, ScalingSolution};
