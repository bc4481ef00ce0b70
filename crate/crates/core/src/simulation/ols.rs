use std::fmt;

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use crate::error::{Error, Result};

/// Smallest p-value reported; anything below is clamped here.
pub const P_VALUE_FLOOR: f64 = 1e-300;

/// Ordinary least squares fit with an intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionResult {
    /// `"(Intercept)"` followed by the regressor names.
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub p_values: Vec<f64>,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub f_stat: f64,
    pub f_p_value: f64,
    pub rmse: f64,
    pub n_obs: usize,
    pub dof: usize,
}

/// Regresses `response` on an intercept plus the columns of `design`.
pub fn ols_regress(design: &DMatrix<f64>, response: &DVector<f64>, names: &[&str]) -> Result<RegressionResult> {
    let (n_obs, regressors) = design.shape();
    if response.len() != n_obs {
        return Err(Error::DimensionMismatch {
            what: "response",
            expected: n_obs,
            found: response.len(),
        });
    }
    if names.len() != regressors {
        return Err(Error::DimensionMismatch {
            what: "regressor names",
            expected: regressors,
            found: names.len(),
        });
    }
    let k = regressors + 1;
    if n_obs <= k {
        return Err(Error::RankDeficient);
    }
    let x = DMatrix::from_fn(n_obs, k, |r, c| if c == 0 { 1.0 } else { design[(r, c - 1)] });

    // Equilibrate XᵀX to unit diagonal before the Cholesky solve.
    let gram = x.transpose() * &x;
    let scale = DVector::from_fn(k, |c, _| {
        let d = gram[(c, c)];
        if d > 0.0 {
            1.0 / d.sqrt()
        } else {
            0.0
        }
    });
    if scale.iter().any(|&s| s == 0.0) {
        return Err(Error::RankDeficient);
    }
    let scaled = DMatrix::from_fn(k, k, |r, c| gram[(r, c)] * scale[r] * scale[c]);
    let chol = scaled.cholesky().ok_or(Error::RankDeficient)?;
    if chol.l().diagonal().iter().any(|&d| d * d < 1e-12) {
        return Err(Error::RankDeficient);
    }
    let rhs = (x.transpose() * response).component_mul(&scale);
    let beta = chol.solve(&rhs).component_mul(&scale);
    let inverse = {
        let inv = chol.inverse();
        DMatrix::from_fn(k, k, |r, c| inv[(r, c)] * scale[r] * scale[c])
    };

    let fitted = &x * &beta;
    let residuals = response - fitted;
    let sse = residuals.norm_squared();
    let mean = response.mean();
    let sst: f64 = response.iter().map(|y| (y - mean).powi(2)).sum();
    let dof = n_obs - k;
    let sigma2 = sse / dof as f64;

    let student = StudentsT::new(0.0, 1.0, dof as f64).expect("positive degrees of freedom");
    let std_errors: Vec<f64> = (0..k).map(|c| (sigma2 * inverse[(c, c)]).sqrt()).collect();
    let t_stats: Vec<f64> = (0..k).map(|c| beta[c] / std_errors[c]).collect();
    let p_values = t_stats
        .iter()
        .map(|t| {
            if t.is_nan() {
                f64::NAN
            } else {
                (2.0 * student.cdf(-t.abs())).max(P_VALUE_FLOOR)
            }
        })
        .collect();

    let r_squared = if sst > 0.0 { 1.0 - sse / sst } else { f64::NAN };
    let adj_r_squared = 1.0 - (1.0 - r_squared) * (n_obs - 1) as f64 / dof as f64;
    let (f_stat, f_p_value) = if regressors > 0 {
        let f = ((sst - sse) / regressors as f64) / sigma2;
        let dist = FisherSnedecor::new(regressors as f64, dof as f64).expect("positive degrees of freedom");
        let p = if f.is_finite() {
            dist.sf(f).max(P_VALUE_FLOOR)
        } else {
            P_VALUE_FLOOR
        };
        (f, p)
    } else {
        (f64::NAN, f64::NAN)
    };

    let mut all_names = vec!["(Intercept)".to_string()];
    all_names.extend(names.iter().map(|s| s.to_string()));
    Ok(RegressionResult {
        names: all_names,
        coefficients: beta.iter().copied().collect(),
        std_errors,
        t_stats,
        p_values,
        r_squared,
        adj_r_squared,
        f_stat,
        f_p_value,
        rmse: sigma2.sqrt(),
        n_obs,
        dof,
    })
}

fn format_p(p: f64) -> String {
    if p < 1e-100 {
        "< 1e-100".to_string()
    } else {
        format!("{p:.4e}")
    }
}

impl fmt::Display for RegressionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<&str> = self.names.iter().skip(1).map(String::as_str).collect();
        writeln!(f, "Linear regression model:")?;
        writeln!(f, "    y ~ 1 + {}", terms.join(" + "))?;
        writeln!(f)?;
        writeln!(f, "Estimated Coefficients:")?;
        writeln!(
            f,
            "    {:<14}{:>14}{:>14}{:>14}{:>14}",
            "", "Estimate", "SE", "tStat", "pValue"
        )?;
        for c in 0..self.names.len() {
            writeln!(
                f,
                "    {:<14}{:>14.6}{:>14.6}{:>14.4}{:>14}",
                self.names[c],
                self.coefficients[c],
                self.std_errors[c],
                self.t_stats[c],
                format_p(self.p_values[c])
            )?;
        }
        writeln!(f)?;
        writeln!(
            f,
            "Number of observations: {}, Error degrees of freedom: {}",
            self.n_obs, self.dof
        )?;
        writeln!(f, "Root Mean Squared Error: {:.4e}", self.rmse)?;
        writeln!(
            f,
            "R-squared: {:.4},  Adjusted R-Squared: {:.4}",
            self.r_squared, self.adj_r_squared
        )?;
        write!(
            f,
            "F-statistic vs. constant model: {:.4}, p-value = {}",
            self.f_stat,
            format_p(self.f_p_value)
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = DMatrix::from_fn(10, 1, |r, _| r as f64);
        let y = DVector::from_fn(10, |r, _| 2.0 + 3.0 * r as f64);
        let fit = ols_regress(&x, &y, &["x1"]).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-12);
        assert!((fit.coefficients[1] - 3.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!(fit.rmse < 1e-10);
    }

    #[test]
    fn textbook_values() {
        // Hand-computed: x̄ = 3, ȳ = 4, Sxx = 10, Sxy = 6, SSE = 2.4.
        let x = DMatrix::from_column_slice(5, 1, &[1.0, 2.0, 3.0, 4.0, 5.0]);
        let y = DVector::from_vec(vec![2.0, 4.0, 5.0, 4.0, 5.0]);
        let fit = ols_regress(&x, &y, &["x1"]).unwrap();
        assert!((fit.coefficients[1] - 0.6).abs() < 1e-12);
        assert!((fit.coefficients[0] - 2.2).abs() < 1e-12);
        assert!((fit.r_squared - 0.6).abs() < 1e-12);
        let se_slope = (2.4f64 / 3.0 / 10.0).sqrt();
        assert!((fit.std_errors[1] - se_slope).abs() < 1e-12);
        assert_eq!(fit.dof, 3);
        // F = t² for a single regressor.
        assert!((fit.f_stat - fit.t_stats[1].powi(2)).abs() < 1e-9);
        assert!((fit.f_p_value - fit.p_values[1]).abs() < 1e-9);
    }

    #[test]
    fn collinear_design_rejected() {
        let x = DMatrix::from_fn(8, 2, |r, c| (r as f64) * (c as f64 + 1.0));
        let y = DVector::from_fn(8, |r, _| r as f64);
        assert_eq!(ols_regress(&x, &y, &["a", "b"]), Err(Error::RankDeficient));
        let constant = DMatrix::from_element(8, 1, 3.0);
        assert_eq!(ols_regress(&constant, &y, &["c"]), Err(Error::RankDeficient));
    }

    #[test]
    fn report_format() {
        let x = DMatrix::from_column_slice(5, 1, &[1.0, 2.0, 3.0, 4.0, 5.0]);
        let y = DVector::from_vec(vec![2.0, 4.0, 5.0, 4.0, 5.0]);
        let text = ols_regress(&x, &y, &["x1"]).unwrap().to_string();
        assert!(text.contains("y ~ 1 + x1"));
        assert!(text.contains("R-squared: 0.6000"));
        assert_eq!(format_p(1e-200), "< 1e-100");
    }
}
