//! Checks that the allocation follows proportional moves in asset prices.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::market_invariant::ipf::{ipf_solve, DEFAULT_MAX_ITER};
use crate::problem::RebalanceProblem;

/// Moves asset class `i` by the factor `x_i`, re-solves, and compares with
/// the old allocation scaled by `x`.
///
/// `q` is relative: each solve stops at a gap of `q` times its own `Σa`, and
/// the comparison allows `10·q·max(Σa, Σa_x)`.
pub fn verify_market_invariance(problem: &RebalanceProblem, x: &DVector<f64>, q: f64) -> Result<bool> {
    if x.len() != problem.n_assets() {
        return Err(Error::DimensionMismatch {
            what: "x",
            expected: problem.n_assets(),
            found: x.len(),
        });
    }
    if x.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidConfig("market moves must be positive".into()));
    }
    let (before, _, _) = ipf_solve(problem, DEFAULT_MAX_ITER, q * problem.total())?;
    let moved = DVector::from_fn(problem.n_assets(), |i, _| problem.assets()[i] * x[i]);
    let portfolios = DVector::from_fn(problem.n_portfolios(), |j, _| {
        (0..problem.n_assets()).map(|i| before.values[(i, j)] * x[i]).sum()
    });
    let scaled = RebalanceProblem::new(problem.target().clone(), moved, portfolios)?;
    let (after, _, _) = ipf_solve(&scaled, DEFAULT_MAX_ITER, q * scaled.total())?;
    let tolerance = 10.0 * q * problem.total().max(scaled.total());
    let worst = (0..problem.n_assets())
        .flat_map(|i| (0..problem.n_portfolios()).map(move |j| (i, j)))
        .map(|(i, j)| (after.values[(i, j)] - before.values[(i, j)] * x[i]).abs())
        .fold(0.0, f64::max);
    Ok(worst <= tolerance)
}
