//! The information-inaccuracy objective and its dual.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::market_invariant::scaling::ScalingSolution;
use crate::problem::{AllocationResult, RebalanceProblem};

/// Default relative tolerance on the dual constraints.
pub const DUAL_TOL: f64 = 1e-9;

/// `Σ A$_ij·ln(A$_ij / (M_ij·p_j))` over cells with `M_ij > 0`, with `0·ln 0 = 0`.
pub fn kl_objective(result: &AllocationResult, problem: &RebalanceProblem) -> Result<f64> {
    let (m, n) = problem.shape();
    let target = problem.target();
    // Residual distribution can leave dust in structurally zero cells.
    let dust = 1e-9 * problem.total();
    let mut total = 0.0;
    for j in 0..n {
        let pj = problem.portfolios()[j];
        for i in 0..m {
            let v = result.values[(i, j)];
            if target[(i, j)] == 0.0 {
                if v.abs() > dust {
                    return Err(Error::StructuralZero {
                        asset_class: i,
                        portfolio: j,
                        value: v,
                    });
                }
                continue;
            }
            if v < -dust {
                return Err(Error::NegativeAllocation {
                    asset_class: i,
                    portfolio: j,
                    value: v,
                });
            }
            if v > 0.0 && pj > 0.0 {
                total += v * (v / (target[(i, j)] * pj)).ln();
            }
        }
    }
    Ok(total)
}

/// Dual variables and objective recovered from scaling vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct DualCertificate {
    /// `Σ λ_i a_i + Σ ν_j p_j`.
    pub objective: f64,
    /// `λ_i = ln x′_i + 1`.
    pub lambda: DVector<f64>,
    /// `ν_j = ln p′_j`.
    pub nu: DVector<f64>,
    /// Largest relative violation of the dual constraints.
    pub violation: f64,
}

/// `Σ λ_i a_i + Σ ν_j p_j`.
pub fn dual_value(problem: &RebalanceProblem, lambda: &DVector<f64>, nu: &DVector<f64>) -> f64 {
    lambda.dot(problem.assets()) + nu.dot(problem.portfolios())
}

/// Largest relative violation of
/// `p_j·e^{−ν_j} = Σ_i M_ij·e^{λ_i − 1}` and `a_i·e^{−λ_i} = Σ_j M_ij·e^{ν_j − 1}`.
pub fn dual_violation(problem: &RebalanceProblem, lambda: &DVector<f64>, nu: &DVector<f64>) -> f64 {
    let target = problem.target();
    let (m, n) = problem.shape();
    let rel = |lhs: f64, rhs: f64| {
        let scale = lhs.abs().max(rhs.abs());
        if scale == 0.0 {
            0.0
        } else {
            (lhs - rhs).abs() / scale
        }
    };
    let mut worst: f64 = 0.0;
    for j in 0..n {
        let rhs: f64 = (0..m).map(|i| target[(i, j)] * (lambda[i] - 1.0).exp()).sum();
        worst = worst.max(rel(problem.portfolios()[j] * (-nu[j]).exp(), rhs));
    }
    for i in 0..m {
        let rhs: f64 = (0..n).map(|j| target[(i, j)] * (nu[j] - 1.0).exp()).sum();
        worst = worst.max(rel(problem.assets()[i] * (-lambda[i]).exp(), rhs));
    }
    worst
}

/// Evaluates the dual at `λ = ln x′ + 1`, `ν = ln p′` and checks feasibility to `tol`.
pub fn dual_objective(problem: &RebalanceProblem, sol: &ScalingSolution, tol: f64) -> Result<DualCertificate> {
    if sol.x_prime.iter().chain(sol.p_prime.iter()).any(|&v| v <= 0.0) {
        return Err(Error::Degenerate(
            "dual variables need strictly positive scaling vectors",
        ));
    }
    let lambda = sol.x_prime.map(|x| x.ln() + 1.0);
    let nu = sol.p_prime.map(f64::ln);
    let violation = dual_violation(problem, &lambda, &nu);
    if violation.is_nan() || violation > tol {
        return Err(Error::DualInfeasible { violation });
    }
    Ok(DualCertificate {
        objective: dual_value(problem, &lambda, &nu),
        lambda,
        nu,
        violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_invariant::ipf::{ipf_with, StopRule};
    use crate::problem::ProcessTag;
    use nalgebra::{dmatrix, dvector};

    fn example() -> RebalanceProblem {
        RebalanceProblem::new(
            dmatrix![0.3, 0.5; 0.7, 0.5],
            dvector![100.0, 200.0],
            dvector![120.0, 180.0],
        )
        .unwrap()
    }

    #[test]
    fn target_values_have_zero_objective() {
        let problem = example();
        let result = AllocationResult::from_values(&problem, problem.target_values(), ProcessTag::Linear, 1e-9);
        assert_eq!(kl_objective(&result, &problem).unwrap(), 0.0);
    }

    #[test]
    fn primal_equals_dual_at_solution() {
        let problem = example();
        let (result, scaling, _) = ipf_with(
            &problem,
            StopRule::Gap {
                q: 1e-12,
                max_iter: 1000,
            },
        )
        .unwrap();
        let cert = dual_objective(&problem, &scaling, DUAL_TOL).unwrap();
        let primal = kl_objective(&result, &problem).unwrap();
        let entropy: f64 = problem.portfolios().iter().map(|p| p * p.ln()).sum();
        assert!((primal - (cert.objective - problem.total() - entropy)).abs() < 1e-8);
    }

    #[test]
    fn opposite_shifts_cancel() {
        let problem = example();
        let (_, scaling, _) = ipf_with(
            &problem,
            StopRule::Gap {
                q: 1e-12,
                max_iter: 1000,
            },
        )
        .unwrap();
        let cert = dual_objective(&problem, &scaling, DUAL_TOL).unwrap();
        let r = 0.7;
        let lambda = cert.lambda.add_scalar(r);
        let nu = cert.nu.add_scalar(-r);
        assert!((dual_value(&problem, &lambda, &nu) - cert.objective).abs() < 1e-9);
        assert!(dual_violation(&problem, &lambda, &nu) < 1e-9);
    }

    #[test]
    fn generic_point_is_infeasible() {
        let problem = example();
        let sol = ScalingSolution::new(
            &problem,
            dvector![1.0, 2.0],
            dvector![3.0, 4.0],
            crate::market_invariant::scaling::Normalization::P1EqualsOne,
        );
        assert!(matches!(
            dual_objective(&problem, &sol, DUAL_TOL),
            Err(Error::DualInfeasible { .. })
        ));
    }

    #[test]
    fn mass_on_structural_zero_rejected() {
        let problem = RebalanceProblem::new(
            dmatrix![0.0, 0.5; 1.0, 0.5],
            dvector![60.0, 140.0],
            dvector![80.0, 120.0],
        )
        .unwrap();
        let values = dmatrix![10.0, 50.0; 70.0, 70.0];
        let result = AllocationResult::from_values(&problem, values, ProcessTag::Greedy, 1e-9);
        assert!(matches!(
            kl_objective(&result, &problem),
            Err(Error::StructuralZero { .. })
        ));
    }
}
