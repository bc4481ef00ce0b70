//! Grouped-partition approximation built from 2×2 closed-form solves.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::market_invariant::analytic::analytic_solve;
use crate::problem::{AllocationResult, ProcessTag, RebalanceProblem, DEFAULT_MARGINAL_TOL};

/// A binary tree over indices with singleton leaves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IndexTree {
    Leaf(usize),
    Split(Box<IndexTree>, Box<IndexTree>),
}

impl IndexTree {
    /// Splits `indices` in half recursively, preserving order.
    pub fn halving(indices: &[usize]) -> Result<Self> {
        match indices {
            [] => Err(Error::InvalidPartition("empty index set".into())),
            [i] => Ok(IndexTree::Leaf(*i)),
            _ => {
                let (left, right) = indices.split_at(indices.len() / 2);
                Ok(IndexTree::Split(
                    Box::new(Self::halving(left)?),
                    Box::new(Self::halving(right)?),
                ))
            }
        }
    }

    pub fn indices(&self) -> Vec<usize> {
        match self {
            IndexTree::Leaf(i) => vec![*i],
            IndexTree::Split(l, r) => {
                let mut out = l.indices();
                out.extend(r.indices());
                out
            }
        }
    }

    /// The two halves, or the leaf itself as a single group.
    fn groups(&self) -> Vec<&IndexTree> {
        match self {
            IndexTree::Leaf(_) => vec![self],
            IndexTree::Split(l, r) => vec![l.as_ref(), r.as_ref()],
        }
    }
}

/// Partitions of asset classes and portfolios, refined together level by level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionTree {
    pub assets: IndexTree,
    pub portfolios: IndexTree,
}

impl PartitionTree {
    /// Index-order halving on both sides.
    pub fn halving(m: usize, n: usize) -> Result<Self> {
        Ok(PartitionTree {
            assets: IndexTree::halving(&(0..m).collect::<Vec<_>>())?,
            portfolios: IndexTree::halving(&(0..n).collect::<Vec<_>>())?,
        })
    }

    /// Each side must cover its index range exactly once.
    pub fn validate(&self, m: usize, n: usize) -> Result<()> {
        for (tree, size, what) in [(&self.assets, m, "asset"), (&self.portfolios, n, "portfolio")] {
            let mut seen = vec![false; size];
            for i in tree.indices() {
                if i >= size {
                    return Err(Error::InvalidPartition(format!("{what} index {} out of range", i + 1)));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::InvalidPartition(format!("{what} index {} appears twice", i + 1)));
                }
            }
            if let Some(missing) = seen.iter().position(|s| !s) {
                return Err(Error::InvalidPartition(format!(
                    "{what} index {} is missing",
                    missing + 1
                )));
            }
        }
        Ok(())
    }
}

/// Approximates the market-invariant allocation by solving aggregated
/// problems of at most 2×2 down the partition tree.
pub fn grouped_hybrid(problem: &RebalanceProblem, tree: &PartitionTree) -> Result<AllocationResult> {
    let (m, n) = problem.shape();
    tree.validate(m, n)?;
    let mut values = DMatrix::zeros(m, n);
    let mut ctx = Context {
        problem,
        values: &mut values,
        slack: DEFAULT_MARGINAL_TOL * problem.total(),
    };
    ctx.solve(
        &tree.assets,
        &tree.portfolios,
        problem.assets().clone(),
        problem.portfolios().clone(),
    )?;
    Ok(AllocationResult::from_values(
        problem,
        values,
        ProcessTag::GroupedHybrid,
        DEFAULT_MARGINAL_TOL * problem.total(),
    ))
}

struct Context<'a> {
    problem: &'a RebalanceProblem,
    values: &'a mut DMatrix<f64>,
    slack: f64,
}

impl Context<'_> {
    /// `a` and `p` are full-length; only entries inside the node are read.
    fn solve(&mut self, rows: &IndexTree, cols: &IndexTree, a: DVector<f64>, p: DVector<f64>) -> Result<()> {
        let target = self.problem.target();
        if let (IndexTree::Leaf(i), IndexTree::Leaf(j)) = (rows, cols) {
            let amount = a[*i];
            if amount > self.slack && target[(*i, *j)] <= 0.0 {
                return Err(Error::StructuralZero {
                    asset_class: *i,
                    portfolio: *j,
                    value: amount,
                });
            }
            self.values[(*i, *j)] = amount;
            return Ok(());
        }

        let row_groups: Vec<Vec<usize>> = rows.groups().iter().map(|g| g.indices()).collect();
        let col_groups: Vec<Vec<usize>> = cols.groups().iter().map(|g| g.indices()).collect();
        let all_rows = rows.indices();
        let a_hat = DVector::from_iterator(
            row_groups.len(),
            row_groups.iter().map(|g| g.iter().map(|&i| a[i]).sum()),
        );
        let p_hat = DVector::from_iterator(
            col_groups.len(),
            col_groups.iter().map(|g| g.iter().map(|&j| p[j]).sum()),
        );
        if a_hat.sum() <= 0.0 && p_hat.sum() <= 0.0 {
            return Ok(());
        }

        // M̂_kl = Σ_{I_k, J_l} M_ij p_j / Σ_{I, J_l} M_ij p_j, falling back to unweighted
        // sums when the column group carries no value.
        let mut m_hat = DMatrix::zeros(row_groups.len(), col_groups.len());
        for (l, cg) in col_groups.iter().enumerate() {
            let weight = |j: usize| if p_hat[l] > 0.0 { p[j] } else { 1.0 };
            let column_total: f64 = all_rows
                .iter()
                .flat_map(|&i| cg.iter().map(move |&j| (i, j)))
                .map(|(i, j)| target[(i, j)] * weight(j))
                .sum();
            if column_total <= 0.0 {
                if p_hat[l] > self.slack {
                    return Err(Error::Infeasible(crate::feasibility::FeasibilityWitness {
                        portfolios: cg.clone(),
                        asset_classes: Vec::new(),
                        available: 0.0,
                        required: p_hat[l],
                    }));
                }
                m_hat.column_mut(l).fill(1.0 / row_groups.len() as f64);
                continue;
            }
            for (k, rg) in row_groups.iter().enumerate() {
                let block: f64 = rg
                    .iter()
                    .flat_map(|&i| cg.iter().map(move |&j| (i, j)))
                    .map(|(i, j)| target[(i, j)] * weight(j))
                    .sum();
                m_hat[(k, l)] = block / column_total;
            }
        }

        let block = if row_groups.len() == 1 {
            DMatrix::from_fn(1, col_groups.len(), |_, l| p_hat[l])
        } else if col_groups.len() == 1 {
            DMatrix::from_fn(row_groups.len(), 1, |k, _| a_hat[k])
        } else {
            // Node totals agree only up to rounding from the parent split.
            let p_node = &p_hat * (a_hat.sum() / p_hat.sum());
            let node = RebalanceProblem::new(m_hat, a_hat.clone(), p_node)?;
            analytic_solve(&node)?.0.values
        };

        let row_trees = rows.groups();
        let col_trees = cols.groups();
        for (k, rt) in row_trees.iter().enumerate() {
            for (l, ct) in col_trees.iter().enumerate() {
                let share = block[(k, l)];
                let mut a_child = DVector::zeros(a.len());
                let mut p_child = DVector::zeros(p.len());
                if a_hat[k] > 0.0 {
                    for &i in &row_groups[k] {
                        a_child[i] = a[i] * share / a_hat[k];
                    }
                }
                if p_hat[l] > 0.0 {
                    for &j in &col_groups[l] {
                        p_child[j] = p[j] * share / p_hat[l];
                    }
                }
                self.solve(rt, ct, a_child, p_child)?;
            }
        }
        Ok(())
    }
}
