//! Zero-pattern feasibility via maximum bipartite flow.

use std::collections::VecDeque;
use std::fmt;

use nalgebra::DMatrix;

use crate::problem::RebalanceProblem;

/// Relative shortfall of the maximum flow tolerated as feasible.
const FLOW_TOL: f64 = 1e-9;

/// A set of portfolios whose demand exceeds what their permitted asset classes hold.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityWitness {
    /// Portfolio indices `J` (0-based).
    pub portfolios: Vec<usize>,
    /// Asset classes `∪ I_j` allowed to fund `J` (0-based).
    pub asset_classes: Vec<usize>,
    /// `Σ a_i` over the asset classes.
    pub available: f64,
    /// `Σ p_j` over the portfolios.
    pub required: f64,
}

impl fmt::Display for FeasibilityWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "portfolios {} require {} but their asset classes {} hold {}",
            one_based(&self.portfolios),
            self.required,
            one_based(&self.asset_classes),
            self.available
        )
    }
}

fn one_based(indices: &[usize]) -> String {
    let items: Vec<String> = indices.iter().map(|i| (i + 1).to_string()).collect();
    format!("{{{}}}", items.join(","))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub zero_pattern_enforced: bool,
    pub witness: Option<FeasibilityWitness>,
    /// Flow routed through permitted cells; equals `Σa` when feasible.
    pub max_flow: f64,
}

/// Decides whether `(a, p)` can be met using only cells where `M > 0`.
///
/// Without zero-pattern enforcement every problem is feasible.
pub fn check_feasibility(problem: &RebalanceProblem, enforce_zero_pattern: bool) -> FeasibilityReport {
    let total = problem.total();
    if !enforce_zero_pattern {
        return FeasibilityReport {
            feasible: true,
            zero_pattern_enforced: false,
            witness: None,
            max_flow: total,
        };
    }
    let mut flow = BipartiteFlow::new(problem, DMatrix::zeros(problem.n_assets(), problem.n_portfolios()));
    flow.saturate();
    flow.report()
}

/// Flow network `source → asset i → portfolio j → sink` with capacities `a_i`,
/// unbounded on cells where `M_ij > 0`, and `p_j`.
pub(crate) struct BipartiteFlow<'a> {
    problem: &'a RebalanceProblem,
    pub(crate) flow: DMatrix<f64>,
    row_used: Vec<f64>,
    col_used: Vec<f64>,
    eps: f64,
}

#[derive(Clone, Copy)]
enum Node {
    Asset(usize),
    Portfolio(usize),
}

impl<'a> BipartiteFlow<'a> {
    /// Starts from an existing flow that respects the zero pattern and capacities.
    pub(crate) fn new(problem: &'a RebalanceProblem, flow: DMatrix<f64>) -> Self {
        let row_used = flow.row_iter().map(|r| r.sum()).collect();
        let col_used = flow.column_iter().map(|c| c.sum()).collect();
        let eps = 1e-15 * problem.total().max(f64::MIN_POSITIVE);
        BipartiteFlow {
            problem,
            flow,
            row_used,
            col_used,
            eps,
        }
    }

    fn row_slack(&self, i: usize) -> f64 {
        self.problem.assets()[i] - self.row_used[i]
    }

    fn col_slack(&self, j: usize) -> f64 {
        self.problem.portfolios()[j] - self.col_used[j]
    }

    /// Breadth-first search for a shortest augmenting path.
    ///
    /// Returns the path's terminal portfolio and the predecessor table, or the
    /// set of portfolios reachable in the residual graph when no path exists.
    fn search(&self) -> Search {
        let (m, n) = self.problem.shape();
        let target = self.problem.target();
        let mut asset_seen = vec![false; m];
        let mut port_pred: Vec<Option<usize>> = vec![None; n];
        let mut asset_pred: Vec<Option<usize>> = vec![None; m];
        let mut queue = VecDeque::new();
        for (i, seen) in asset_seen.iter_mut().enumerate() {
            if self.row_slack(i) > self.eps {
                *seen = true;
                queue.push_back(Node::Asset(i));
            }
        }
        while let Some(node) = queue.pop_front() {
            match node {
                Node::Asset(i) => {
                    for j in 0..n {
                        if port_pred[j].is_none() && target[(i, j)] > 0.0 {
                            port_pred[j] = Some(i);
                            if self.col_slack(j) > self.eps {
                                return Search::Path {
                                    end: j,
                                    port_pred,
                                    asset_pred,
                                };
                            }
                            queue.push_back(Node::Portfolio(j));
                        }
                    }
                }
                Node::Portfolio(j) => {
                    for i in 0..m {
                        if !asset_seen[i] && self.flow[(i, j)] > self.eps {
                            asset_seen[i] = true;
                            asset_pred[i] = Some(j);
                            queue.push_back(Node::Asset(i));
                        }
                    }
                }
            }
        }
        Search::Cut {
            reachable: port_pred.iter().map(Option::is_some).collect(),
        }
    }

    /// Augments along shortest paths until none remain.
    pub(crate) fn saturate(&mut self) {
        while let Search::Path {
            end,
            port_pred,
            asset_pred,
        } = self.search()
        {
            let mut steps = Vec::new();
            let mut j = end;
            let mut bottleneck = self.col_slack(end);
            loop {
                let i = port_pred[j].expect("portfolio on path has a predecessor");
                steps.push((i, j));
                match asset_pred[i] {
                    Some(prev) => {
                        bottleneck = bottleneck.min(self.flow[(i, prev)]);
                        j = prev;
                    }
                    None => {
                        bottleneck = bottleneck.min(self.row_slack(i));
                        break;
                    }
                }
            }
            if bottleneck <= self.eps {
                break;
            }
            // steps alternate forward cells (i, j) and backward cells (i, asset_pred[i]).
            for &(i, j) in &steps {
                self.flow[(i, j)] += bottleneck;
                if let Some(prev) = asset_pred[i] {
                    self.flow[(i, prev)] -= bottleneck;
                }
            }
            let (first_i, _) = *steps.last().expect("non-empty path");
            self.row_used[first_i] += bottleneck;
            self.col_used[end] += bottleneck;
        }
    }

    pub(crate) fn total_flow(&self) -> f64 {
        self.row_used.iter().sum()
    }

    pub(crate) fn report(&self) -> FeasibilityReport {
        let total = self.problem.total();
        let max_flow = self.total_flow();
        if max_flow >= total - FLOW_TOL * total {
            return FeasibilityReport {
                feasible: true,
                zero_pattern_enforced: true,
                witness: None,
                max_flow,
            };
        }
        let reachable = match self.search() {
            Search::Cut { reachable } => reachable,
            Search::Path { .. } => vec![false; self.problem.n_portfolios()],
        };
        FeasibilityReport {
            feasible: false,
            zero_pattern_enforced: true,
            witness: Some(self.witness(&reachable)),
            max_flow,
        }
    }

    /// Portfolios left unreached by the final search form a violated Hall set.
    fn witness(&self, reachable: &[bool]) -> FeasibilityWitness {
        let (m, _) = self.problem.shape();
        let target = self.problem.target();
        let portfolios: Vec<usize> = reachable
            .iter()
            .enumerate()
            .filter(|&(j, &r)| !r && self.problem.portfolios()[j] > 0.0)
            .map(|(j, _)| j)
            .collect();
        let asset_classes: Vec<usize> = (0..m)
            .filter(|&i| portfolios.iter().any(|&j| target[(i, j)] > 0.0))
            .collect();
        FeasibilityWitness {
            available: asset_classes.iter().map(|&i| self.problem.assets()[i]).sum(),
            required: portfolios.iter().map(|&j| self.problem.portfolios()[j]).sum(),
            portfolios,
            asset_classes,
        }
    }
}

enum Search {
    Path {
        end: usize,
        port_pred: Vec<Option<usize>>,
        asset_pred: Vec<Option<usize>>,
    },
    Cut {
        reachable: Vec<bool>,
    },
}
