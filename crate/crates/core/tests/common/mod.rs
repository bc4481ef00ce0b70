#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rebalance_core::RebalanceProblem;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Column-stochastic matrix with entries bounded away from zero.
pub fn positive_target<R: Rng>(rng: &mut R, m: usize, n: usize) -> DMatrix<f64> {
    let mut target = DMatrix::from_fn(m, n, |_, _| rng.random_range(0.05..1.0));
    for mut col in target.column_iter_mut() {
        let s = col.sum();
        col /= s;
    }
    target
}

pub fn positive_problem<R: Rng>(rng: &mut R, m: usize, n: usize) -> RebalanceProblem {
    let target = positive_target(rng, m, n);
    let p = DVector::from_fn(n, |_, _| rng.random_range(10.0..1000.0));
    let weights = DVector::from_fn(m, |_, _| rng.random_range(0.1..1.0));
    let a = &weights * (p.sum() / weights.sum());
    RebalanceProblem::new(target, a, p).unwrap()
}

/// Valid problem whose target may contain zeros (each column keeps one positive entry).
pub fn sparse_problem<R: Rng>(rng: &mut R, m: usize, n: usize) -> RebalanceProblem {
    let mut target = DMatrix::from_fn(m, n, |_, _| {
        if rng.random_bool(0.3) {
            0.0
        } else {
            rng.random_range(0.05..1.0)
        }
    });
    for j in 0..n {
        if target.column(j).sum() == 0.0 {
            let i = rng.random_range(0..m);
            target[(i, j)] = 1.0;
        }
        let s = target.column(j).sum();
        target.column_mut(j).unscale_mut(s);
    }
    let p = DVector::from_fn(n, |_, _| rng.random_range(10.0..1000.0));
    let weights = DVector::from_fn(m, |_, _| rng.random_range(0.1..1.0));
    let a = &weights * (p.sum() / weights.sum());
    RebalanceProblem::new(target, a, p).unwrap()
}

/// Solves `x_i Σ_j M_ij p_j = a_i`, `p_j Σ_i M_ij x_i = p_j⁰` by damped Newton
/// in `u = ln x`, `v = ln p` with `v_1 = 0` and the last column equation dropped.
/// Returns the allocation `M_ij x_i p_j`.
pub fn newton_oracle(problem: &RebalanceProblem) -> DMatrix<f64> {
    let (m, n) = problem.shape();
    let target = problem.target();
    let a = problem.assets();
    let p = problem.portfolios();
    let dim = m + n - 1;

    let unpack = |z: &DVector<f64>| -> (DVector<f64>, DVector<f64>) {
        let u = DVector::from_fn(m, |i, _| z[i]);
        let v = DVector::from_fn(n, |j, _| if j == 0 { 0.0 } else { z[m + j - 1] });
        (u, v)
    };
    let residual = |z: &DVector<f64>| -> DVector<f64> {
        let (u, v) = unpack(z);
        let mut f = DVector::zeros(dim);
        for i in 0..m {
            let s: f64 = (0..n).map(|j| target[(i, j)] * v[j].exp()).sum();
            f[i] = u[i] + s.ln() - a[i].ln();
        }
        for j in 0..n - 1 {
            let s: f64 = (0..m).map(|i| target[(i, j)] * u[i].exp()).sum();
            f[m + j] = v[j] + s.ln() - p[j].ln();
        }
        f
    };
    let jacobian = |z: &DVector<f64>| -> DMatrix<f64> {
        let (u, v) = unpack(z);
        let mut jac = DMatrix::zeros(dim, dim);
        for i in 0..m {
            jac[(i, i)] = 1.0;
            let s: f64 = (0..n).map(|j| target[(i, j)] * v[j].exp()).sum();
            for j in 1..n {
                jac[(i, m + j - 1)] = target[(i, j)] * v[j].exp() / s;
            }
        }
        for j in 0..n - 1 {
            let s: f64 = (0..m).map(|i| target[(i, j)] * u[i].exp()).sum();
            for i in 0..m {
                jac[(m + j, i)] = target[(i, j)] * u[i].exp() / s;
            }
            if j > 0 {
                jac[(m + j, m + j - 1)] = 1.0;
            }
        }
        jac
    };

    let mut z = DVector::from_fn(dim, |k, _| if k < m { a[k].ln() } else { 0.0 });
    let mut f = residual(&z);
    for _ in 0..200 {
        if f.amax() < 1e-14 {
            break;
        }
        let step = jacobian(&z).lu().solve(&(-&f)).expect("singular Jacobian");
        let mut t = 1.0;
        loop {
            let trial = &z + &step * t;
            let ft = residual(&trial);
            if ft.norm() < f.norm() || t < 1e-10 {
                z = trial;
                f = ft;
                break;
            }
            t /= 2.0;
        }
    }
    let (u, v) = unpack(&z);
    DMatrix::from_fn(m, n, |i, j| target[(i, j)] * u[i].exp() * v[j].exp())
}
