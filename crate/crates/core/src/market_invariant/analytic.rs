//! Closed-form market-invariant solutions for two asset classes or two portfolios.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::market_invariant::poly::{cubic_roots, horner, polish_root, quartic_roots, real_roots};
use crate::market_invariant::scaling::{scaling_from_values, Normalization, ScalingSolution};
use crate::problem::{
    col_sums, row_sums, AllocationResult, ProcessTag, RebalanceProblem, DEFAULT_MARGINAL_TOL, EXACT_TOL,
};

/// Root of the 2×2 quadratic to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// The unique non-negative allocation.
    Positive,
    /// The other real solution, which has negative entries.
    Negative,
}

/// One real solution of the polynomial system.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticSolution {
    pub result: AllocationResult,
    pub scaling: ScalingSolution,
    /// The root `x′_1` (with `x′_2 = 1`), or `p′_1/p′_2` for the 2×2 case.
    pub root: f64,
    pub non_negative: bool,
}

/// Coefficients `(b, c, d)` of `d·K² + b·K + c = 0` for `K = p′_1/p′_2`.
pub fn quadratic_coefficients(problem: &RebalanceProblem) -> (f64, f64, f64) {
    let m = problem.target();
    let (a1, a2) = (problem.assets()[0], problem.assets()[1]);
    let (p1, p2) = (problem.portfolios()[0], problem.portfolios()[1]);
    let b = m[(0, 0)] * m[(1, 1)] * (a1 / p1 - a2 / p2) + m[(1, 0)] * m[(0, 1)] * (a2 / p1 - a1 / p2);
    let c = -m[(0, 1)] * m[(1, 1)] * (a1 + a2) / p2;
    let d = m[(0, 0)] * m[(1, 0)] * (a1 + a2) / p1;
    (b, c, d)
}

/// Solves a 2×2 problem on the requested branch.
///
/// Zeros in `M` or in the totals pin the allocation directly; those cases have
/// only a non-negative solution.
pub fn analytic_2x2(problem: &RebalanceProblem, branch: Branch) -> Result<(AllocationResult, ScalingSolution)> {
    if problem.shape() != (2, 2) {
        let (rows, cols) = problem.shape();
        return Err(Error::UnsupportedShape { rows, cols });
    }
    let degenerate = !problem.is_strictly_positive()
        || problem
            .assets()
            .iter()
            .chain(problem.portfolios().iter())
            .any(|&v| v <= 0.0);
    if degenerate {
        if branch == Branch::Negative {
            return Err(Error::Degenerate("the negative branch needs positive M, a and p"));
        }
        return pinned_2x2(problem);
    }

    let m = problem.target();
    let (b, c, d) = quadratic_coefficients(problem);
    let root = (b * b - 4.0 * d * c).sqrt();
    let k = match branch {
        Branch::Positive => (-b + root) / (2.0 * d),
        Branch::Negative => (-b - root) / (2.0 * d),
    };
    let x_prime = DVector::from_fn(2, |i, _| problem.assets()[i] / (m[(i, 0)] * k + m[(i, 1)]));
    let values = DMatrix::from_fn(2, 2, |i, j| {
        let denom = m[(i, 0)] * k + m[(i, 1)];
        let weight = if j == 0 { m[(i, 0)] * k } else { m[(i, 1)] };
        problem.assets()[i] * weight / denom
    });
    let result = AllocationResult::from_values(problem, values, ProcessTag::Analytic, tolerance(problem));
    let scaling = ScalingSolution::new(
        problem,
        x_prime,
        DVector::from_vec(vec![k, 1.0]),
        Normalization::P1EqualsOne,
    );
    Ok((result, scaling))
}

/// 2×2 allocations form the line `[[t, a1 − t], [p1 − t, a2 − p1 + t]]`;
/// each zero cell fixes `t`.
fn pinned_2x2(problem: &RebalanceProblem) -> Result<(AllocationResult, ScalingSolution)> {
    let m = problem.target();
    let (a1, a2) = (problem.assets()[0], problem.assets()[1]);
    let p1 = problem.portfolios()[0];
    let slack = problem.exact_tolerance();
    let lo = 0f64.max(p1 - a2);
    let hi = a1.min(p1);

    let mut pins = Vec::new();
    if m[(0, 0)] == 0.0 {
        pins.push(0.0);
    }
    if m[(0, 1)] == 0.0 {
        pins.push(a1);
    }
    if m[(1, 0)] == 0.0 {
        pins.push(p1);
    }
    if m[(1, 1)] == 0.0 {
        pins.push(p1 - a2);
    }
    let t = match pins.first() {
        Some(&t) => {
            if pins.iter().any(|&u| (u - t).abs() > slack) {
                return Err(infeasible(problem));
            }
            t
        }
        // Positive M with a zero total: the segment has collapsed to a point.
        None => lo,
    };
    if t < lo - slack || t > hi + slack || (pins.is_empty() && hi - lo > slack) {
        return Err(infeasible(problem));
    }
    let values = DMatrix::from_row_slice(2, 2, &[t, a1 - t, p1 - t, a2 - p1 + t]).map(|v| v.max(0.0));
    let result = AllocationResult::from_values(problem, values, ProcessTag::Analytic, tolerance(problem));
    let scaling = scaling_from_values(problem, &result.values, Normalization::P1EqualsOne);
    Ok((result, scaling))
}

fn infeasible(problem: &RebalanceProblem) -> Error {
    match crate::feasibility::check_feasibility(problem, true).witness {
        Some(witness) => Error::Infeasible(witness),
        None => Error::Degenerate("zero pattern admits no biproportional allocation"),
    }
}

fn tolerance(problem: &RebalanceProblem) -> f64 {
    DEFAULT_MARGINAL_TOL * problem.total() + problem.exact_tolerance()
}

/// Cubic coefficients `B1..B4` in `x′_1` for a 2×3 problem with `x′_2 = 1`.
pub fn cubic_coefficients(problem: &RebalanceProblem) -> [f64; 4] {
    let m = problem.target();
    let a1 = problem.assets()[0];
    let p = problem.portfolios();
    let (m11, m12, m13) = (m[(0, 0)], m[(0, 1)], m[(0, 2)]);
    let (m21, m22, m23) = (m[(1, 0)], m[(1, 1)], m[(1, 2)]);
    [
        m11 * m12 * m13 * (p[0] + p[1] + p[2] - a1),
        m11 * m12 * m23 * (p[0] + p[1] - a1)
            + m11 * m22 * m13 * (p[0] + p[2] - a1)
            + m21 * m12 * m13 * (p[1] + p[2] - a1),
        m11 * m22 * m23 * (p[0] - a1) + m21 * m12 * m23 * (p[1] - a1) + m21 * m22 * m13 * (p[2] - a1),
        -a1 * m21 * m22 * m23,
    ]
}

/// Quartic coefficients `B1..B5` in `x′_1` for a 2×4 problem with `x′_2 = 1`.
pub fn quartic_coefficients(problem: &RebalanceProblem) -> [f64; 5] {
    let m = problem.target();
    let a1 = problem.assets()[0];
    let p = problem.portfolios();
    let (m11, m12, m13, m14) = (m[(0, 0)], m[(0, 1)], m[(0, 2)], m[(0, 3)]);
    let (m21, m22, m23, m24) = (m[(1, 0)], m[(1, 1)], m[(1, 2)], m[(1, 3)]);
    [
        m11 * m12 * m13 * m14 * (p[0] + p[1] + p[2] + p[3] - a1),
        m11 * m12 * m13 * m24 * (p[0] + p[1] + p[2] - a1)
            + m11 * m12 * m23 * m14 * (p[0] + p[1] + p[3] - a1)
            + m11 * m22 * m13 * m14 * (p[0] + p[2] + p[3] - a1)
            + m21 * m12 * m13 * m14 * (p[1] + p[2] + p[3] - a1),
        m11 * m12 * m23 * m24 * (p[0] + p[1] - a1)
            + m11 * m22 * m13 * m24 * (p[0] + p[2] - a1)
            + m21 * m12 * m13 * m24 * (p[1] + p[2] - a1)
            + m11 * m22 * m23 * m14 * (p[0] + p[3] - a1)
            + m21 * m12 * m23 * m14 * (p[1] + p[3] - a1)
            + m21 * m22 * m13 * m14 * (p[2] + p[3] - a1),
        m11 * m22 * m23 * m24 * (p[0] - a1)
            + m21 * m12 * m23 * m24 * (p[1] - a1)
            + m21 * m22 * m13 * m24 * (p[2] - a1)
            + m21 * m22 * m23 * m14 * (p[3] - a1),
        -a1 * m21 * m22 * m23 * m24,
    ]
}

/// All real solutions of a 2×3 problem with strictly positive `M`, `a` and `p`.
pub fn analytic_2x3(problem: &RebalanceProblem) -> Result<Vec<AnalyticSolution>> {
    require_two_rows(problem, 3)?;
    let b = cubic_coefficients(problem);
    let roots = real_roots(&cubic_roots(b[0], b[1], b[2], b[3]));
    solutions_from_roots(problem, &b, roots)
}

/// All real solutions of a 2×4 problem with strictly positive `M`, `a` and `p`.
pub fn analytic_2x4(problem: &RebalanceProblem) -> Result<Vec<AnalyticSolution>> {
    require_two_rows(problem, 4)?;
    let b = quartic_coefficients(problem);
    let roots = real_roots(&quartic_roots(b[0], b[1], b[2], b[3], b[4]));
    solutions_from_roots(problem, &b, roots)
}

fn require_two_rows(problem: &RebalanceProblem, cols: usize) -> Result<()> {
    let (rows, n) = problem.shape();
    if (rows, n) != (2, cols) {
        return Err(Error::UnsupportedShape { rows, cols: n });
    }
    if !problem.is_strictly_positive() {
        return Err(Error::NonPositiveTarget);
    }
    if problem
        .assets()
        .iter()
        .chain(problem.portfolios().iter())
        .any(|&v| v <= 0.0)
    {
        return Err(Error::Degenerate(
            "closed forms need positive asset and portfolio totals",
        ));
    }
    Ok(())
}

/// Maps each real root `x′_1` to `p′_j = p_j / (M_1j·x′_1 + M_2j)`.
fn solutions_from_roots(problem: &RebalanceProblem, coeffs: &[f64], roots: Vec<f64>) -> Result<Vec<AnalyticSolution>> {
    let m = problem.target();
    let n = problem.n_portfolios();
    let slack = EXACT_TOL * problem.total();
    let mut out: Vec<AnalyticSolution> = Vec::new();
    for raw in roots {
        let x = polish_root(coeffs, raw);
        if out.iter().any(|s| (s.root - x).abs() <= 1e-9 * x.abs().max(1.0)) {
            continue;
        }
        let denoms: Vec<f64> = (0..n).map(|j| m[(0, j)] * x + m[(1, j)]).collect();
        if denoms
            .iter()
            .enumerate()
            .any(|(j, &den)| den.abs() <= 1e-12 * (m[(0, j)] * x.abs() + m[(1, j)]))
        {
            continue;
        }
        let p_prime = DVector::from_fn(n, |j, _| problem.portfolios()[j] / denoms[j]);
        let x_prime = DVector::from_vec(vec![x, 1.0]);
        let values = DMatrix::from_fn(2, n, |i, j| x_prime[i] * m[(i, j)] * p_prime[j]);
        let non_negative = x >= 0.0 && values.iter().all(|&v| v >= -slack);
        let result = AllocationResult::from_values(problem, values, ProcessTag::Analytic, tolerance(problem));
        let scaling = ScalingSolution::new(problem, x_prime, p_prime, Normalization::P1EqualsOne);
        out.push(AnalyticSolution {
            result,
            scaling,
            root: x,
            non_negative,
        });
    }
    if !out.iter().any(|s| s.non_negative) {
        return Err(Error::NoPositiveRoot);
    }
    debug_assert!(out.iter().all(|s| horner(coeffs, s.root).is_finite()));
    Ok(out)
}

/// Swaps the roles of asset classes and portfolios.
///
/// The new target is `Mᵀ` with each column rescaled to sum to 1, and `a`, `p`
/// are exchanged. Biproportional fits commute with this operation.
pub fn transpose_reduce(problem: &RebalanceProblem) -> Result<RebalanceProblem> {
    let sums = row_sums(problem.target());
    if let Some(row) = sums.iter().position(|&s| s <= 0.0) {
        return Err(Error::ZeroRow { row });
    }
    let (m, n) = problem.shape();
    let target = DMatrix::from_fn(n, m, |j, i| problem.target()[(i, j)] / sums[i]);
    RebalanceProblem::new(target, problem.portfolios().clone(), problem.assets().clone())
}

/// Carries a solution of the transposed problem back to the original.
fn transpose_back(problem: &RebalanceProblem, solution: AnalyticSolution) -> AnalyticSolution {
    let sums = row_sums(problem.target());
    let values = solution.result.values.transpose();
    let x_prime = solution.scaling.p_prime.component_div(&sums);
    let p_prime = solution.scaling.x_prime.clone();
    AnalyticSolution {
        result: AllocationResult::from_values(problem, values, ProcessTag::Analytic, solution.result.tolerance),
        scaling: ScalingSolution::new(problem, x_prime, p_prime, Normalization::P1EqualsOne),
        root: solution.root,
        non_negative: solution.non_negative,
    }
}

/// Every real closed-form solution for the supported shapes, transposing
/// `(3,2)` and `(4,2)` problems.
pub fn analytic_solutions(problem: &RebalanceProblem) -> Result<Vec<AnalyticSolution>> {
    match problem.shape() {
        (2, 2) => {
            let (result, scaling) = analytic_2x2(problem, Branch::Positive)?;
            let k = 1.0 / scaling.p_prime[1];
            let mut out = vec![AnalyticSolution {
                result,
                scaling,
                root: k,
                non_negative: true,
            }];
            if let Ok((result, scaling)) = analytic_2x2(problem, Branch::Negative) {
                let k = 1.0 / scaling.p_prime[1];
                out.push(AnalyticSolution {
                    result,
                    scaling,
                    root: k,
                    non_negative: false,
                });
            }
            Ok(out)
        }
        (2, 3) => analytic_2x3(problem),
        (2, 4) => analytic_2x4(problem),
        (3, 2) | (4, 2) => {
            let transposed = transpose_reduce(problem)?;
            let solutions = analytic_solutions(&transposed)?;
            Ok(solutions.into_iter().map(|s| transpose_back(problem, s)).collect())
        }
        (rows, cols) => Err(Error::UnsupportedShape { rows, cols }),
    }
}

/// The non-negative closed-form solution.
///
/// Zero asset or portfolio totals are stripped first; a problem that then has
/// a single row or column is allocated directly.
pub fn analytic_solve(problem: &RebalanceProblem) -> Result<(AllocationResult, ScalingSolution)> {
    let (m, n) = problem.shape();
    if !matches!((m, n), (2, 2) | (2, 3) | (3, 2) | (2, 4) | (4, 2)) {
        return Err(Error::UnsupportedShape { rows: m, cols: n });
    }
    if (m, n) == (2, 2) {
        return analytic_2x2(problem, Branch::Positive);
    }
    let rows: Vec<usize> = (0..m).filter(|&i| problem.assets()[i] > 0.0).collect();
    let cols: Vec<usize> = (0..n).filter(|&j| problem.portfolios()[j] > 0.0).collect();
    if rows.len() == m && cols.len() == n {
        let solutions = analytic_solutions(problem)?;
        let best = solutions
            .into_iter()
            .filter(|s| s.non_negative)
            .min_by(|a, b| {
                let ra = a.result.max_row_residual() + a.result.max_col_residual();
                let rb = b.result.max_row_residual() + b.result.max_col_residual();
                ra.total_cmp(&rb)
            })
            .ok_or(Error::NoPositiveRoot)?;
        return Ok((best.result, best.scaling));
    }
    solve_stripped(problem, &rows, &cols)
}

/// Solves the live block left after removing zero totals and embeds it back.
pub(crate) fn solve_stripped(
    problem: &RebalanceProblem,
    rows: &[usize],
    cols: &[usize],
) -> Result<(AllocationResult, ScalingSolution)> {
    let (m, n) = problem.shape();
    let mut values = DMatrix::zeros(m, n);
    if !rows.is_empty() && !cols.is_empty() {
        let live = DMatrix::from_fn(rows.len(), cols.len(), |r, c| problem.target()[(rows[r], cols[c])]);
        let block = if rows.len() == 1 || cols.len() == 1 {
            forced_block(problem, rows, cols, &live)?
        } else {
            let sums = col_sums(&live);
            if let Some(c) = sums.iter().position(|&s| s <= 0.0) {
                return Err(Error::Infeasible(crate::feasibility::FeasibilityWitness {
                    portfolios: vec![cols[c]],
                    asset_classes: Vec::new(),
                    available: 0.0,
                    required: problem.portfolios()[cols[c]],
                }));
            }
            let normalized = DMatrix::from_fn(live.nrows(), live.ncols(), |r, c| live[(r, c)] / sums[c]);
            let sub = RebalanceProblem::new(
                normalized,
                DVector::from_iterator(rows.len(), rows.iter().map(|&i| problem.assets()[i])),
                DVector::from_iterator(cols.len(), cols.iter().map(|&j| problem.portfolios()[j])),
            )?;
            analytic_solve(&sub)?.0.values
        };
        for (r, &i) in rows.iter().enumerate() {
            for (c, &j) in cols.iter().enumerate() {
                values[(i, j)] = block[(r, c)];
            }
        }
    }
    let result = AllocationResult::from_values(problem, values, ProcessTag::Analytic, tolerance(problem));
    let scaling = scaling_from_values(problem, &result.values, Normalization::P1EqualsOne);
    Ok((result, scaling))
}

/// A single live row takes the portfolio totals; a single live column the asset totals.
fn forced_block(
    problem: &RebalanceProblem,
    rows: &[usize],
    cols: &[usize],
    live: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let block = if rows.len() == 1 {
        DMatrix::from_fn(1, cols.len(), |_, c| problem.portfolios()[cols[c]])
    } else {
        DMatrix::from_fn(rows.len(), 1, |r, _| problem.assets()[rows[r]])
    };
    for r in 0..block.nrows() {
        for c in 0..block.ncols() {
            if block[(r, c)] > 0.0 && live[(r, c)] <= 0.0 {
                return Err(infeasible(problem));
            }
        }
    }
    Ok(block)
}
