//! Scaling vectors `x′`, `p′` with `A$ = diag(x′)·M·diag(p′)`.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::problem::RebalanceProblem;

/// How the one-parameter freedom `(t·x′, p′/t)` is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// `p′_1 = 1`.
    P1EqualsOne,
    /// `p′_1 = p_1`.
    P1EqualsP1,
    /// `a′_1 = a_1` where `a′ = M·p′`.
    A1EqualsA1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingSolution {
    pub x_prime: DVector<f64>,
    pub p_prime: DVector<f64>,
    /// `M·p′`.
    pub a_prime: DVector<f64>,
    pub normalization: Normalization,
}

impl ScalingSolution {
    /// Normalizes raw scaling vectors. "First" means the first index with a
    /// non-zero value, since zero portfolios or asset classes scale to zero.
    pub fn new(
        problem: &RebalanceProblem,
        x_prime: DVector<f64>,
        p_prime: DVector<f64>,
        normalization: Normalization,
    ) -> Self {
        let a_prime = problem.target() * &p_prime;
        ScalingSolution {
            x_prime,
            p_prime,
            a_prime,
            normalization,
        }
        .normalized(problem, normalization)
    }

    /// Rescales to another normalization.
    pub fn normalized(&self, problem: &RebalanceProblem, normalization: Normalization) -> Self {
        let first = |v: &DVector<f64>| v.iter().position(|&x| x != 0.0);
        let t = match normalization {
            Normalization::P1EqualsOne => first(&self.p_prime).map(|j| self.p_prime[j]),
            Normalization::P1EqualsP1 => first(&self.p_prime).map(|j| self.p_prime[j] / problem.portfolios()[j]),
            Normalization::A1EqualsA1 => first(&self.a_prime).map(|i| self.a_prime[i] / problem.assets()[i]),
        };
        let mut out = match t {
            Some(t) if t.is_finite() && t != 0.0 => self.scaled(problem, t),
            _ => self.clone(),
        };
        out.normalization = normalization;
        out
    }

    /// `(t·x′, p′/t)`, which describes the same allocation.
    pub fn scaled(&self, problem: &RebalanceProblem, t: f64) -> Self {
        let p_prime = &self.p_prime / t;
        ScalingSolution {
            x_prime: &self.x_prime * t,
            a_prime: problem.target() * &p_prime,
            p_prime,
            normalization: self.normalization,
        }
    }

    /// `diag(x′)·M·diag(p′)`.
    pub fn values(&self, target: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(target.nrows(), target.ncols(), |i, j| {
            self.x_prime[i] * target[(i, j)] * self.p_prime[j]
        })
    }
}

/// `(f − a, g − p)` with `f = x′ ⊙ (M p′)` and `g = p′ ⊙ (Mᵀ x′)`.
pub fn equation_residuals(problem: &RebalanceProblem, sol: &ScalingSolution) -> (DVector<f64>, DVector<f64>) {
    let target = problem.target();
    let f = sol.x_prime.component_mul(&(target * &sol.p_prime));
    let g = sol.p_prime.component_mul(&(target.transpose() * &sol.x_prime));
    (f - problem.assets(), g - problem.portfolios())
}

/// Recovers representative scaling vectors from a biproportional `A$`.
///
/// Each connected component of the support is anchored at its first
/// portfolio with `p′ = 1`; classes and portfolios with no support get 0.
pub fn scaling_from_values(
    problem: &RebalanceProblem,
    values: &DMatrix<f64>,
    normalization: Normalization,
) -> ScalingSolution {
    let (m, n) = problem.shape();
    let target = problem.target();
    let live = |i: usize, j: usize| values[(i, j)] > 0.0 && target[(i, j)] > 0.0;
    let mut x = DVector::zeros(m);
    let mut p = DVector::zeros(n);
    let mut x_set = vec![false; m];
    let mut p_set = vec![false; n];
    for root in 0..n {
        if p_set[root] || !(0..m).any(|i| live(i, root)) {
            continue;
        }
        p_set[root] = true;
        p[root] = 1.0;
        let mut queue = VecDeque::from([(false, root)]);
        while let Some((is_asset, k)) = queue.pop_front() {
            if is_asset {
                for j in 0..n {
                    if p_set[j] || !live(k, j) {
                        continue;
                    }
                    p[j] = values[(k, j)] / (target[(k, j)] * x[k]);
                    p_set[j] = true;
                    queue.push_back((false, j));
                }
            } else {
                for i in 0..m {
                    if x_set[i] || !live(i, k) {
                        continue;
                    }
                    x[i] = values[(i, k)] / (target[(i, k)] * p[k]);
                    x_set[i] = true;
                    queue.push_back((true, i));
                }
            }
        }
    }
    ScalingSolution::new(problem, x, p, normalization)
}
