//! JSON documents and CSV records for problems, allocations, simulations and regressions.
//!
//! Indices in documents are 1-based; they are converted at this boundary.

use std::io::{self, Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::classic::BankerConfig;
use crate::error::{Error, Result};
use crate::market_invariant::ipf::IpfTrace;
use crate::market_invariant::scaling::ScalingSolution;
use crate::problem::{matrix_from_rows, matrix_to_rows, AllocationResult, RebalanceProblem};
use crate::simulation::config::{BankerInfeasibility, ProcessKind, ShadowMode, SimulationConfig, VarianceKind};
use crate::simulation::ols::{ols_regress, RegressionResult};
use crate::simulation::trial::TrialResult;

/// Writes floats with 17 significant digits.
struct PreciseFormatter;

impl serde_json::ser::Formatter for PreciseFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }
}

/// Serializes to compact JSON with 17 significant digits per number.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, PreciseFormatter);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDocument {
    #[serde(rename = "M")]
    pub target: Vec<Vec<f64>>,
    pub a: Vec<f64>,
    pub p: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub banker_index: Option<usize>,
    #[serde(default)]
    pub allow_negative: bool,
}

impl ProblemDocument {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_problem(&self) -> Result<RebalanceProblem> {
        let target = matrix_from_rows(&self.target)?;
        RebalanceProblem::new(
            target,
            DVector::from_column_slice(&self.a),
            DVector::from_column_slice(&self.p),
        )
    }

    /// Banker settings, with `fallback` (1-based) used when the document names none.
    pub fn banker_config(&self, fallback: Option<usize>) -> Result<BankerConfig> {
        let index = self
            .banker_index
            .or(fallback)
            .ok_or_else(|| Error::InvalidConfig("banker process needs a banker index".into()))?;
        Ok(BankerConfig {
            banker_index: from_one_based(index, "banker_index")?,
            allow_negative: self.allow_negative,
        })
    }
}

fn from_one_based(index: usize, what: &str) -> Result<usize> {
    index
        .checked_sub(1)
        .ok_or_else(|| Error::InvalidConfig(format!("{what} is 1-based; 0 is not a valid index")))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub row_max: f64,
    pub col_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationDocument {
    pub process: String,
    #[serde(rename = "A")]
    pub proportions: Vec<Vec<f64>>,
    #[serde(rename = "A_dollar")]
    pub values: Vec<Vec<f64>>,
    #[serde(default)]
    pub x_prime: Option<Vec<f64>>,
    #[serde(default)]
    pub p_prime: Option<Vec<f64>>,
    #[serde(default)]
    pub iterations: Option<usize>,
    #[serde(default)]
    pub max_gap: Option<f64>,
    pub residuals: Residuals,
    /// Marginal tolerance declared by the producing process.
    pub tolerance: f64,
}

impl AllocationDocument {
    pub fn new(result: &AllocationResult, scaling: Option<&ScalingSolution>, trace: Option<&IpfTrace>) -> Self {
        AllocationDocument {
            process: result.process.name().to_string(),
            proportions: matrix_to_rows(&result.proportions),
            values: matrix_to_rows(&result.values),
            x_prime: scaling.map(|s| s.x_prime.iter().copied().collect()),
            p_prime: scaling.map(|s| s.p_prime.iter().copied().collect()),
            iterations: trace.map(|t| t.iterations_used),
            max_gap: trace.map(|t| t.max_gap),
            residuals: Residuals {
                row_max: result.max_row_residual(),
                col_max: result.max_col_residual(),
            },
            tolerance: result.tolerance,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        to_json(self)
    }

    pub fn values_matrix(&self) -> Result<DMatrix<f64>> {
        matrix_from_rows(&self.values)
    }

    pub fn proportions_matrix(&self) -> Result<DMatrix<f64>> {
        matrix_from_rows(&self.proportions)
    }
}

/// Simulation settings; every field is optional and defaults to the reference study.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationDocument {
    #[serde(rename = "M", skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start_portfolios: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_periods: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tethered: Option<bool>,
    /// `market-invariant`, `banker` or `linear`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub process: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub banker_index: Option<usize>,
    /// Portfolio the shadow copies; defaults to the banker.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shadow_of: Option<usize>,
    /// Set to false to run without a shadow portfolio.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shadow: Option<bool>,
    /// `compound` or `joint`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shadow_mode: Option<String>,
    /// `allow-negative` or `resample`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub on_infeasible: Option<String>,
    /// `population` or `sample`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variance: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ipf_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl SimulationDocument {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_config(&self) -> Result<SimulationConfig> {
        let mut config = SimulationConfig::reference();
        if let Some(rows) = &self.target {
            config.target = matrix_from_rows(rows)?;
        }
        if let Some(start) = &self.start_portfolios {
            config.start_portfolios = DVector::from_column_slice(start);
        }
        if let Some(t) = self.n_periods {
            config.n_periods = t;
        }
        if let Some(n) = self.n_trials {
            config.n_trials = n;
        }
        if let Some(tethered) = self.tethered {
            config.tethered = tethered;
        }
        if let Some(process) = &self.process {
            config.process = match process.as_str() {
                "market-invariant" | "market_invariant" => ProcessKind::MarketInvariant,
                "banker" => ProcessKind::Banker,
                "linear" => ProcessKind::Linear,
                other => return Err(Error::InvalidConfig(format!("unknown process {other:?}"))),
            };
        }
        if let Some(b) = self.banker_index {
            config.banker_index = from_one_based(b, "banker_index")?;
        }
        config.shadow_of = match (self.shadow, self.shadow_of) {
            (Some(false), _) => None,
            (_, Some(s)) => Some(from_one_based(s, "shadow_of")?),
            (_, None) => Some(config.banker_index),
        };
        if let Some(mode) = &self.shadow_mode {
            config.shadow_mode = match mode.as_str() {
                "compound" => ShadowMode::Compound,
                "joint" => ShadowMode::Joint,
                other => return Err(Error::InvalidConfig(format!("unknown shadow mode {other:?}"))),
            };
        }
        if let Some(policy) = &self.on_infeasible {
            config.on_infeasible = match policy.as_str() {
                "allow-negative" => BankerInfeasibility::AllowNegative,
                "resample" => BankerInfeasibility::Resample,
                other => return Err(Error::InvalidConfig(format!("unknown infeasibility policy {other:?}"))),
            };
        }
        if let Some(variance) = &self.variance {
            config.variance = match variance.as_str() {
                "population" => VarianceKind::Population,
                "sample" => VarianceKind::Sample,
                other => return Err(Error::InvalidConfig(format!("unknown variance kind {other:?}"))),
            };
        }
        if let Some(tol) = self.ipf_tol {
            config.ipf_tol = tol;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        config.validate()?;
        Ok(config)
    }
}

/// Column names of the per-trial CSV.
pub const CSV_HEADER: [&str; 7] = [
    "trial",
    "process",
    "portfolio_index",
    "total_return",
    "weighted_return",
    "weighted_variance",
    "banker_minus_shadow",
];

/// One CSV row: a portfolio within a trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub process: String,
    pub portfolio_index: usize,
    pub total_return: f64,
    pub weighted_return: f64,
    pub weighted_variance: f64,
    pub banker_minus_shadow: Option<f64>,
}

/// Writes one row per (trial, portfolio) with 1-based indices.
pub fn write_trial_csv<W: Write>(writer: W, process: &str, results: &[TrialResult]) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    out.write_record(CSV_HEADER)?;
    for result in results {
        for (j, &total_return) in result.portfolio_returns.iter().enumerate() {
            out.serialize(TrialRow {
                trial: result.trial + 1,
                process: process.to_string(),
                portfolio_index: j + 1,
                total_return,
                weighted_return: result.weighted_return,
                weighted_variance: result.weighted_variance,
                banker_minus_shadow: result.banker_minus_shadow,
            })?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_trial_csv<R: Read>(reader: R) -> Result<Vec<TrialRow>> {
    let mut input = csv::Reader::from_reader(reader);
    let headers = input.headers()?.clone();
    for name in CSV_HEADER {
        if !headers.iter().any(|h| h == name) {
            return Err(Error::Parse(format!("missing column {name:?}")));
        }
    }
    input.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Regressors for explaining the shadow difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegressionModel {
    /// Weighted variance.
    V,
    /// Weighted return and weighted variance.
    VR,
    /// Weighted return, its square, and weighted variance.
    VRR2,
}

impl std::str::FromStr for RegressionModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "v" => Ok(RegressionModel::V),
            "v_r" => Ok(RegressionModel::VR),
            "v_r_r2" => Ok(RegressionModel::VRR2),
            other => Err(Error::InvalidConfig(format!("unknown model {other:?}"))),
        }
    }
}

impl RegressionModel {
    pub fn names(&self) -> &'static [&'static str] {
        match self {
            RegressionModel::V => &["v"],
            RegressionModel::VR => &["r", "v"],
            RegressionModel::VRR2 => &["r", "r^2", "v"],
        }
    }

    fn regressors(&self, r: f64, v: f64) -> Vec<f64> {
        match self {
            RegressionModel::V => vec![v],
            RegressionModel::VR => vec![r, v],
            RegressionModel::VRR2 => vec![r, r * r, v],
        }
    }
}

/// Regresses the shadow difference on per-trial statistics, one observation per trial.
pub fn regress_rows(rows: &[TrialRow], model: RegressionModel) -> Result<RegressionResult> {
    let mut seen = std::collections::BTreeMap::new();
    for row in rows {
        seen.entry(row.trial).or_insert(row);
    }
    let mut observations = Vec::with_capacity(seen.len());
    for row in seen.values() {
        let y = row
            .banker_minus_shadow
            .ok_or_else(|| Error::Parse(format!("trial {} has no banker_minus_shadow value", row.trial)))?;
        observations.push((y, model.regressors(row.weighted_return, row.weighted_variance)));
    }
    let k = model.names().len();
    let design = DMatrix::from_fn(observations.len(), k, |r, c| observations[r].1[c]);
    let response = DVector::from_iterator(observations.len(), observations.iter().map(|o| o.0));
    ols_regress(&design, &response, model.names())
}

/// Undefined statistics are written as `null` and read back as NaN.
mod nullable {
    use serde::{Deserialize, Deserializer};

    pub fn scalar<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }

    pub fn vector<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let values = Vec::<Option<f64>>::deserialize(d)?;
        Ok(values.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionDocument {
    pub model: String,
    pub names: Vec<String>,
    #[serde(deserialize_with = "nullable::vector")]
    pub coefficients: Vec<f64>,
    #[serde(deserialize_with = "nullable::vector")]
    pub std_errors: Vec<f64>,
    #[serde(deserialize_with = "nullable::vector")]
    pub t_stats: Vec<f64>,
    #[serde(deserialize_with = "nullable::vector")]
    pub p_values: Vec<f64>,
    #[serde(deserialize_with = "nullable::scalar")]
    pub r_squared: f64,
    #[serde(deserialize_with = "nullable::scalar")]
    pub adj_r_squared: f64,
    #[serde(deserialize_with = "nullable::scalar")]
    pub f_stat: f64,
    #[serde(deserialize_with = "nullable::scalar")]
    pub f_p_value: f64,
    #[serde(deserialize_with = "nullable::scalar")]
    pub rmse: f64,
    pub n_obs: usize,
    pub dof: usize,
}

impl RegressionDocument {
    pub fn new(model: &str, fit: &RegressionResult) -> Self {
        RegressionDocument {
            model: model.to_string(),
            names: fit.names.clone(),
            coefficients: fit.coefficients.clone(),
            std_errors: fit.std_errors.clone(),
            t_stats: fit.t_stats.clone(),
            p_values: fit.p_values.clone(),
            r_squared: fit.r_squared,
            adj_r_squared: fit.adj_r_squared,
            f_stat: fit.f_stat,
            f_p_value: fit.f_p_value,
            rmse: fit.rmse,
            n_obs: fit.n_obs,
            dof: fit.dof,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_invariant::ipf::{ipf_with, StopRule};

    const EXAMPLE: &str = r#"{"M": [[0.3, 0.5], [0.7, 0.5]], "a": [100, 200], "p": [120, 180]}"#;

    #[test]
    fn problem_document_parses() {
        let doc = ProblemDocument::parse(EXAMPLE).unwrap();
        let problem = doc.to_problem().unwrap();
        assert_eq!(problem.shape(), (2, 2));
        assert!(!doc.allow_negative);
        assert!(doc.banker_config(None).is_err());
        assert_eq!(doc.banker_config(Some(2)).unwrap().banker_index, 1);
        assert!(doc.banker_config(Some(0)).is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ProblemDocument::parse(r#"{"M": [[1]], "a": [1], "p": [1], "q": 3}"#).is_err());
    }

    #[test]
    fn allocation_round_trips_losslessly() {
        let problem = ProblemDocument::parse(EXAMPLE).unwrap().to_problem().unwrap();
        let (result, scaling, trace) = ipf_with(&problem, StopRule::default_for(&problem)).unwrap();
        let doc = AllocationDocument::new(&result, Some(&scaling), Some(&trace));
        let text = doc.to_json().unwrap();
        let back = AllocationDocument::parse(&text).unwrap();
        assert_eq!(back, doc);
        assert_eq!(back.values_matrix().unwrap(), result.values);
        assert!(text.contains("e1"));
    }

    #[test]
    fn precise_formatter_digits() {
        let text = to_json(&vec![0.1f64, 1.0 / 3.0]).unwrap();
        assert_eq!(text.trim(), "[1.0000000000000001e-1,3.3333333333333331e-1]");
    }

    #[test]
    fn simulation_document_defaults() {
        let config = SimulationDocument::parse(r#"{"process": "banker", "n_trials": 5}"#)
            .unwrap()
            .to_config()
            .unwrap();
        assert_eq!(config.process, ProcessKind::Banker);
        assert_eq!(config.n_trials, 5);
        assert_eq!(config.shadow_of, Some(1));
        let config = SimulationDocument::parse(r#"{"shadow": false}"#)
            .unwrap()
            .to_config()
            .unwrap();
        assert_eq!(config.shadow_of, None);
        assert!(SimulationDocument::parse(r#"{"process": "other"}"#)
            .unwrap()
            .to_config()
            .is_err());
    }

    #[test]
    fn csv_header_is_stable() {
        let mut buf = Vec::new();
        write_trial_csv(&mut buf, "banker", &[]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "trial,process,portfolio_index,total_return,weighted_return,weighted_variance,banker_minus_shadow\n"
        );
    }

    #[test]
    fn csv_round_trip() {
        let result = TrialResult {
            trial: 0,
            portfolio_returns: vec![0.1, -0.2],
            weighted_return: 0.01,
            weighted_variance: 0.02,
            shadow_return: None,
            banker_minus_shadow: None,
            attempts: 1,
            negative_periods: 0,
            max_conservation_error: 0.0,
        };
        let mut buf = Vec::new();
        write_trial_csv(&mut buf, "linear", &[result]).unwrap();
        let rows = read_trial_csv(buf.as_slice()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].portfolio_index, 2);
        assert_eq!(rows[1].total_return, -0.2);
        assert_eq!(rows[0].banker_minus_shadow, None);
        assert!(regress_rows(&rows, RegressionModel::V).is_err());
    }

    #[test]
    fn undefined_statistics_round_trip_as_nan() {
        let text = r#"{"model":"v","names":["(Intercept)","v"],"coefficients":[0.0,0.0],"std_errors":[0.0,0.0],
            "t_stats":[null,null],"p_values":[null,null],"r_squared":null,"adj_r_squared":null,"f_stat":null,
            "f_p_value":null,"rmse":0.0,"n_obs":3,"dof":1}"#;
        let doc: RegressionDocument = serde_json::from_str(text).unwrap();
        assert!(doc.p_values[1].is_nan() && doc.r_squared.is_nan());
        assert!(to_json(&doc).unwrap().contains("\"t_stats\":[null,null]"));
    }

    #[test]
    fn missing_column_reported() {
        let text = "trial,process\n1,banker\n";
        assert!(matches!(read_trial_csv(text.as_bytes()), Err(Error::Parse(_))));
    }
}
