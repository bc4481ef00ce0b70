use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Largest horizon the brute-force check accepts.
pub const MAX_PERIODS: usize = 8;
/// Largest number of asset classes the brute-force check accepts.
pub const MAX_ASSETS: usize = 4;
const EQUALITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PermutationReport {
    /// Every list satisfied `Σ_σ Π_t g(σ_t, t) ≥ |P|`.
    pub holds: bool,
    /// Every list met the bound with equality.
    pub equality: bool,
    /// Smallest `Σ_σ Π_t g(σ_t, t) / |P|` over all lists.
    pub min_ratio: f64,
    pub lists_checked: usize,
}

/// For every multiset of asset classes of size `T`, sums the compounded gross
/// return over its distinct orderings and compares with the number of orderings.
///
/// `returns` holds gross returns (asset classes × periods) and must be tethered.
pub fn permutation_inequality_check(returns: &DMatrix<f64>) -> Result<PermutationReport> {
    let (m, t) = returns.shape();
    if t == 0 || t > MAX_PERIODS || m == 0 || m > MAX_ASSETS {
        return Err(Error::InvalidConfig(format!(
            "brute force supports up to {MAX_ASSETS} asset classes and {MAX_PERIODS} periods, got {m}×{t}"
        )));
    }
    for (i, row) in returns.row_iter().enumerate() {
        let product: f64 = row.iter().product();
        if (product - 1.0).abs() > EQUALITY_TOL {
            return Err(Error::NotTethered {
                asset_class: i,
                product,
            });
        }
    }

    let mut report = PermutationReport {
        holds: true,
        equality: true,
        min_ratio: f64::INFINITY,
        lists_checked: 0,
    };
    let mut list = vec![0usize; t];
    loop {
        let (sum, count) = sum_over_orderings(returns, &list);
        let ratio = sum / count as f64;
        report.min_ratio = report.min_ratio.min(ratio);
        report.holds &= ratio >= 1.0 - EQUALITY_TOL;
        report.equality &= (ratio - 1.0).abs() <= EQUALITY_TOL;
        report.lists_checked += 1;
        if !next_multiset(&mut list, m) {
            break;
        }
    }
    Ok(report)
}

/// Advances a non-decreasing list over `0..m` to the next one.
fn next_multiset(list: &mut [usize], m: usize) -> bool {
    let Some(pos) = list.iter().rposition(|&v| v + 1 < m) else {
        return false;
    };
    let value = list[pos] + 1;
    for v in &mut list[pos..] {
        *v = value;
    }
    true
}

fn sum_over_orderings(returns: &DMatrix<f64>, sorted: &[usize]) -> (f64, usize) {
    let mut order = sorted.to_vec();
    let mut sum = 0.0;
    let mut count = 0;
    loop {
        sum += order.iter().enumerate().map(|(t, &i)| returns[(i, t)]).product::<f64>();
        count += 1;
        if !next_permutation(&mut order) {
            break;
        }
    }
    (sum, count)
}

/// Lexicographic successor; false once the last ordering has been visited.
fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = v.windows(2).rposition(|w| w[0] < w[1]) else {
        return false;
    };
    let j = v.iter().rposition(|&x| x > v[i]).expect("a larger element exists");
    v.swap(i, j);
    v[i + 1..].reverse();
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_returns_give_equality() {
        let returns = DMatrix::from_element(3, 5, 1.0);
        let report = permutation_inequality_check(&returns).unwrap();
        assert!(report.holds && report.equality);
    }

    #[test]
    fn two_by_two_strict() {
        // Asset 1 goes up then down, asset 2 the reverse.
        let returns = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 2.0]);
        let report = permutation_inequality_check(&returns).unwrap();
        assert!(report.holds);
        assert!(!report.equality);
        assert_eq!(report.lists_checked, 3);
        // Mixed list: (2·2 + 0.5·0.5)/2.
        assert!((report.min_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn distinct_orderings_counted_once() {
        let mut v = vec![0, 0, 1];
        let mut seen = vec![v.clone()];
        while next_permutation(&mut v) {
            seen.push(v.clone());
        }
        assert_eq!(seen, vec![vec![0, 0, 1], vec![0, 1, 0], vec![1, 0, 0]]);
    }

    #[test]
    fn multisets_enumerated() {
        let mut list = vec![0; 3];
        let mut count = 1;
        while next_multiset(&mut list, 3) {
            count += 1;
        }
        assert_eq!(count, 10);
    }

    #[test]
    fn rejects_untethered_and_oversized() {
        assert!(matches!(
            permutation_inequality_check(&DMatrix::from_element(2, 3, 1.1)),
            Err(Error::NotTethered { .. })
        ));
        assert!(permutation_inequality_check(&DMatrix::from_element(5, 3, 1.0)).is_err());
        assert!(permutation_inequality_check(&DMatrix::from_element(2, 9, 1.0)).is_err());
    }
}
