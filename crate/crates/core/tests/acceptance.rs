//! Acceptance criteria 1–9. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{dmatrix, dvector, DMatrix, DVector};
use rand::Rng;
use rebalance_core::market_invariant::analytic::analytic_solve;
use rebalance_core::market_invariant::ipf::{ipf_with, StopRule, DEFAULT_MAX_ITER};
use rebalance_core::simulation::{
    ols_regress, permutation_inequality_check, run_study, ProcessKind, SimulationConfig, TrialResult,
};
use rebalance_core::{
    analytic_2x2, banker_rebalance, dual_objective, equation_residuals, greedy_allocate, ipf_solve, kl_objective,
    linear_rebalance, perturb_allocation, verify_market_invariance, AllocationResult, BankerConfig, Branch,
    RebalanceProblem, ScalingSolution,
};

use common::{newton_oracle, positive_problem, rng, sparse_problem};

/// Reference values carry four decimals.
const FOUR_DECIMALS: f64 = 5e-4;
/// Relative stopping gap for "fully converged" solves.
const CONVERGED_Q: f64 = 1e-12;
/// Agreement between independent solvers, relative to `Σa`.
const AGREEMENT_TOL: f64 = 1e-8;
/// Residual and dual feasibility bound, relative to `Σa`.
const CERTIFICATE_TOL: f64 = 1e-9;
/// Relative gap handed to the invariance check.
const INVARIANCE_Q: f64 = 1e-10;
const MI_RETURN_TOL: f64 = 1e-9;
const EQUALITY_TOL: f64 = 1e-12;
const LINEAR_SHIFT_TOL: f64 = 1e-12;
const GREEDY_TOL: f64 = 1e-12;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within_budget(start: Instant, budget: Duration) -> Result<Duration, String> {
    let elapsed = start.elapsed();
    if elapsed < budget {
        Ok(elapsed)
    } else {
        Err(format!("took {elapsed:.2?}, budget {budget:?}"))
    }
}

fn worked_example() -> RebalanceProblem {
    RebalanceProblem::new(
        dmatrix![0.3, 0.5; 0.7, 0.5],
        dvector![100.0, 200.0],
        dvector![120.0, 180.0],
    )
    .unwrap()
}

fn c1_worked_example() -> Outcome {
    let start = Instant::now();
    let problem = worked_example();
    let values = dmatrix![27.1003, 72.8997; 92.8997, 107.1003];
    // Proportions in asset-class-by-portfolio orientation.
    let proportions = dmatrix![0.2258, 0.4050; 0.7742, 0.5950];
    let negative = dmatrix![-332.1003, 432.1003; 452.1003, -252.1003];

    let (analytic, _) = analytic_2x2(&problem, Branch::Positive).map_err(|e| e.to_string())?;
    let (ipf, _, _) =
        ipf_solve(&problem, DEFAULT_MAX_ITER, CONVERGED_Q * problem.total()).map_err(|e| e.to_string())?;
    let (neg, _) = analytic_2x2(&problem, Branch::Negative).map_err(|e| e.to_string())?;
    let worst = [
        (&analytic.values - &values).amax(),
        (&analytic.proportions - &proportions).amax(),
        (&ipf.values - &values).amax(),
        (&ipf.proportions - &proportions).amax(),
        (&neg.values - &negative).amax(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let elapsed = within_budget(start, Duration::from_secs(1))?;
    check(
        worst <= FOUR_DECIMALS,
        format!("max deviation {worst:.2e} (tol {FOUR_DECIMALS:e}), {elapsed:.2?}"),
    )
}

fn c2_fast_convergence() -> Outcome {
    let problem = RebalanceProblem::new(
        dmatrix![0.3, 0.4, 0.5, 0.1; 0.3, 0.2, 0.3, 0.4; 0.4, 0.4, 0.2, 0.5],
        dvector![55.0, 60.0, 1065.0],
        dvector![1030.0, 40.0, 50.0, 60.0],
    )
    .unwrap();
    let (three, _, _) = ipf_with(&problem, StopRule::Sweeps(3)).map_err(|e| e.to_string())?;
    let (full, _, _) =
        ipf_solve(&problem, DEFAULT_MAX_ITER, CONVERGED_Q * problem.total()).map_err(|e| e.to_string())?;
    let gap = (&three.values - &full.values).amax();
    check(
        gap <= FOUR_DECIMALS,
        format!("3 sweeps vs converged: {gap:.2e} (tol {FOUR_DECIMALS:e})"),
    )
}

const ANALYTIC_SHAPES: [(usize, usize); 5] = [(2, 2), (2, 3), (3, 2), (2, 4), (4, 2)];
const PER_SHAPE: usize = 1000;
const ORACLE_CASES: usize = 200;

/// Problems of criterion 3: 1000 per analytic shape, then 200 of size up to 6×6.
fn c3_problems() -> (Vec<RebalanceProblem>, Vec<RebalanceProblem>) {
    let mut r = rng(3);
    let analytic = ANALYTIC_SHAPES
        .iter()
        .flat_map(|&(m, n)| (0..PER_SHAPE).map(move |_| (m, n)))
        .map(|(m, n)| positive_problem(&mut r, m, n))
        .collect();
    let oracle = (0..ORACLE_CASES)
        .map(|_| {
            let (m, n) = (r.random_range(1..=6), r.random_range(1..=6));
            positive_problem(&mut r, m, n)
        })
        .collect();
    (analytic, oracle)
}

fn converged(problem: &RebalanceProblem) -> Result<(AllocationResult, ScalingSolution), String> {
    let (result, scaling, _) =
        ipf_solve(problem, DEFAULT_MAX_ITER, CONVERGED_Q * problem.total()).map_err(|e| e.to_string())?;
    Ok((result, scaling))
}

fn c3_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let (analytic_cases, oracle_cases) = c3_problems();
    let mut worst_analytic: f64 = 0.0;
    for problem in &analytic_cases {
        let (closed, _) = analytic_solve(problem).map_err(|e| format!("{:?}: {e}", problem.shape()))?;
        let (ipf, _) = converged(problem)?;
        worst_analytic = worst_analytic.max((&closed.values - &ipf.values).amax() / problem.total());
    }
    let mut worst_newton: f64 = 0.0;
    for problem in &oracle_cases {
        let (ipf, _) = converged(problem)?;
        worst_newton = worst_newton.max((newton_oracle(problem) - &ipf.values).amax() / problem.total());
    }
    let elapsed = within_budget(start, Duration::from_secs(60))?;
    check(
        worst_analytic <= AGREEMENT_TOL && worst_newton <= AGREEMENT_TOL,
        format!(
            "{} analytic vs IPF {worst_analytic:.2e}·Σa, {} Newton vs IPF {worst_newton:.2e}·Σa (tol {AGREEMENT_TOL:e}), {elapsed:.2?}",
            analytic_cases.len(),
            oracle_cases.len()
        ),
    )
}

fn c4_market_invariance() -> Outcome {
    let start = Instant::now();
    let mut r = rng(4);
    let mut failures = 0;
    for _ in 0..1000 {
        let (m, n) = (r.random_range(1..=6), r.random_range(1..=6));
        let problem = positive_problem(&mut r, m, n);
        let x = DVector::from_fn(m, |_, _| r.random_range(0.5..2.0));
        if !verify_market_invariance(&problem, &x, INVARIANCE_Q).map_err(|e| e.to_string())? {
            failures += 1;
        }
    }
    let elapsed = within_budget(start, Duration::from_secs(60))?;
    check(
        failures == 0,
        format!("{failures}/1000 pairs failed at 10·q, q = {INVARIANCE_Q:e}, {elapsed:.2?}"),
    )
}

fn c5_convex_certificate() -> Outcome {
    let (analytic_cases, oracle_cases) = c3_problems();
    let mut solutions = Vec::new();
    for problem in &analytic_cases {
        let (closed, scaling) = analytic_solve(problem).map_err(|e| e.to_string())?;
        solutions.push((problem, closed, scaling));
    }
    for problem in analytic_cases.iter().chain(&oracle_cases) {
        let (ipf, scaling) = converged(problem)?;
        solutions.push((problem, ipf, scaling));
    }

    let mut r = rng(5);
    let mut worst_residual: f64 = 0.0;
    let mut worst_dual: f64 = 0.0;
    let mut min_increase = f64::INFINITY;
    let mut pinned = 0;
    for (problem, result, scaling) in &solutions {
        let (f, g) = equation_residuals(problem, scaling);
        worst_residual = worst_residual.max(f.amax().max(g.amax()) / problem.total());
        let cert = dual_objective(problem, scaling, f64::INFINITY).map_err(|e| e.to_string())?;
        worst_dual = worst_dual.max(cert.violation);
        let base = kl_objective(result, problem).map_err(|e| e.to_string())?;
        // A single row or column fixes the allocation; there is nothing to perturb.
        if problem.n_assets() == 1 || problem.n_portfolios() == 1 {
            pinned += 1;
            continue;
        }
        for _ in 0..100 {
            let alpha = r.random_range(0.05..=1.0);
            let moved = perturb_allocation(problem, result, alpha, r.random()).map_err(|e| e.to_string())?;
            let value = kl_objective(&moved, problem).map_err(|e| e.to_string())?;
            min_increase = min_increase.min(value - base);
        }
    }
    check(
        worst_residual <= CERTIFICATE_TOL && worst_dual <= CERTIFICATE_TOL && min_increase > 0.0,
        format!(
            "{} solutions: residual {worst_residual:.2e}·Σa, dual violation {worst_dual:.2e} (tol {CERTIFICATE_TOL:e}), \
             smallest KL increase {min_increase:.2e} over {} perturbed ({pinned} single row/column)",
            solutions.len(),
            solutions.len() - pinned
        ),
    )
}

fn study(process: ProcessKind, tethered: bool, n_trials: usize) -> Result<Vec<TrialResult>, String> {
    let config = SimulationConfig {
        process,
        tethered,
        n_trials,
        ..SimulationConfig::reference()
    };
    let report = run_study(&config).map_err(|e| e.to_string())?;
    if let Some((trial, err)) = report.failures.first() {
        return Err(format!("{} trial {trial} failed: {err}", process.name()));
    }
    Ok(report.results)
}

fn c6_tethered_study() -> Outcome {
    let start = Instant::now();
    let banker = SimulationConfig::reference().banker_index;
    let mi = study(ProcessKind::MarketInvariant, true, 1000)?;
    let max_mi = mi
        .iter()
        .flat_map(|t| t.portfolio_returns.iter())
        .fold(0.0f64, |acc, r| acc.max(r.abs()));
    let bk = study(ProcessKind::Banker, true, 1000)?;
    let banker_negative = bk.iter().all(|t| t.portfolio_returns[banker] < 0.0);
    let others_positive = bk.iter().all(|t| {
        t.portfolio_returns
            .iter()
            .enumerate()
            .all(|(j, &r)| j == banker || r > 0.0)
    });
    let lin = study(ProcessKind::Linear, true, 1000)?;
    let pos = lin.iter().filter(|t| t.portfolio_returns[banker] > 0.0).count();
    let neg = lin.iter().filter(|t| t.portfolio_returns[banker] < 0.0).count();
    let elapsed = within_budget(start, Duration::from_secs(120))?;
    check(
        max_mi <= MI_RETURN_TOL && banker_negative && others_positive && pos > 0 && neg > 0,
        format!(
            "MI max |return| {max_mi:.2e} (tol {MI_RETURN_TOL:e}); banker negative {banker_negative}, \
             others positive {others_positive}; linear banker column +{pos}/-{neg}; {elapsed:.2?}"
        ),
    )
}

fn regress(
    results: &[TrialResult],
    columns: &[fn(&TrialResult) -> f64],
    names: &[&str],
) -> Result<rebalance_core::simulation::RegressionResult, String> {
    let y = DVector::from_iterator(results.len(), results.iter().map(|t| t.banker_minus_shadow.unwrap()));
    let x = DMatrix::from_fn(results.len(), columns.len(), |r, c| columns[c](&results[r]));
    ols_regress(&x, &y, names).map_err(|e| e.to_string())
}

fn c7_regressions() -> Outcome {
    let variance: fn(&TrialResult) -> f64 = |t| t.weighted_variance;
    let ret: fn(&TrialResult) -> f64 = |t| t.weighted_return;
    let ret2: fn(&TrialResult) -> f64 = |t| t.weighted_return * t.weighted_return;

    let tethered = study(ProcessKind::Banker, true, 10_000)?;
    let fit = regress(&tethered, &[variance], &["v"])?;
    let tethered_ok = fit.coefficients[1] < 0.0 && fit.p_values[1] < 1e-10 && (0.35..=0.60).contains(&fit.r_squared);

    let free = study(ProcessKind::Banker, false, 10_000)?;
    let fit_free = regress(&free, &[variance], &["v"])?;
    let negative = free.iter().filter(|t| t.banker_minus_shadow.unwrap() < 0.0).count() as f64 / free.len() as f64;
    let full = regress(&free, &[ret, ret2, variance], &["r", "r^2", "v"])?;
    let signs = full.coefficients[1] > 0.0 && full.coefficients[2] > 0.0 && full.coefficients[3] < 0.0;
    let free_ok = (0.005..=0.05).contains(&fit_free.r_squared) && (0.55..=0.70).contains(&negative) && signs;
    check(
        tethered_ok && free_ok,
        format!(
            "tethered slope {:.4} p {:.1e} R² {:.4}; untethered R² {:.4}, negative {:.4}, (r, r², v) = ({:.4}, {:.4}, {:.4})",
            fit.coefficients[1],
            fit.p_values[1],
            fit.r_squared,
            fit_free.r_squared,
            negative,
            full.coefficients[1],
            full.coefficients[2],
            full.coefficients[3]
        ),
    )
}

fn c8_permutation_inequality() -> Outcome {
    let start = Instant::now();
    let mut r = rng(8);
    let mut mismatches = 0;
    let mut violations = 0;
    for case in 0..100 {
        let (m, t) = (r.random_range(1..=4), r.random_range(2..=6));
        let flat = case % 2 == 0;
        let mut returns = DMatrix::from_fn(m, t, |_, _| (r.random::<f64>() - 0.5) / 2.0).map(f64::exp);
        if flat {
            for k in 0..t {
                let g = returns[(0, k)];
                returns.column_mut(k).fill(g);
            }
        }
        for i in 0..m {
            let head: f64 = (0..t - 1).map(|k| returns[(i, k)]).product();
            returns[(i, t - 1)] = 1.0 / head;
        }
        let all_equal = (0..t).all(|k| {
            returns
                .column(k)
                .iter()
                .all(|&g| (g - returns[(0, k)]).abs() <= EQUALITY_TOL)
        });
        let report = permutation_inequality_check(&returns).map_err(|e| e.to_string())?;
        violations += usize::from(!report.holds);
        mismatches += usize::from(report.equality != all_equal);
    }
    let elapsed = within_budget(start, Duration::from_secs(30))?;
    check(
        violations == 0 && mismatches == 0,
        format!("{violations} violations, {mismatches} equality mismatches over 100 instances, {elapsed:.2?}"),
    )
}

fn c9_process_contracts() -> Outcome {
    let start = Instant::now();
    let mut r = rng(9);
    let (mut banker_bad, mut linear_worst, mut greedy_worst) = (0, 0.0f64, 0.0f64);
    for _ in 0..1000 {
        let (m, n) = (r.random_range(1..=6), r.random_range(1..=6));
        let problem = sparse_problem(&mut r, m, n);
        let target = problem.target();

        let b = r.random_range(0..n);
        let config = BankerConfig {
            banker_index: b,
            allow_negative: true,
        };
        let banker = banker_rebalance(&problem, config).map_err(|e| e.to_string())?;
        if (0..n).any(|j| j != b && banker.proportions.column(j) != target.column(j)) {
            banker_bad += 1;
        }

        let linear = linear_rebalance(&problem, true).map_err(|e| e.to_string())?;
        let shift = &linear.proportions - target;
        for row in shift.row_iter() {
            linear_worst = linear_worst.max(row.max() - row.min());
        }

        let greedy = greedy_allocate(&problem, false).map_err(|e| e.to_string())?;
        greedy_worst = greedy_worst.max(greedy.max_row_residual().max(greedy.max_col_residual()) / problem.total());
    }
    let elapsed = within_budget(start, Duration::from_secs(10))?;
    check(
        banker_bad == 0 && linear_worst <= LINEAR_SHIFT_TOL && greedy_worst <= GREEDY_TOL,
        format!(
            "banker columns off target {banker_bad}, linear row spread {linear_worst:.2e} (tol {LINEAR_SHIFT_TOL:e}), \
             greedy residual {greedy_worst:.2e}·Σa (tol {GREEDY_TOL:e}), {elapsed:.2?}"
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("2x2 worked example", c1_worked_example),
        ("fast convergence", c2_fast_convergence),
        ("oracle equivalence", c3_oracle_equivalence),
        ("market invariance", c4_market_invariance),
        ("convex certificate", c5_convex_certificate),
        ("tethered study", c6_tethered_study),
        ("regressions", c7_regressions),
        ("permutation inequality", c8_permutation_inequality),
        ("process contracts", c9_process_contracts),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {detail}", k + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
