use crate::simulation::trial::TrialResult;

/// Default number of histogram bins.
pub const DEFAULT_BINS: usize = 10;

/// Equal-width bins over the observed range.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `bins + 1` edges from the minimum to the maximum.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(values: &[f64], bins: usize) -> Self {
        let bins = bins.max(1);
        let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        if finite.is_empty() {
            return Histogram {
                edges: vec![0.0; bins + 1],
                counts: vec![0; bins],
            };
        }
        let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
        let mut hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi == lo {
            hi = lo + lo.abs().max(1.0) * 1e-9;
        }
        let width = (hi - lo) / bins as f64;
        let mut edges: Vec<f64> = (0..=bins).map(|k| lo + width * k as f64).collect();
        edges[bins] = hi;
        let mut counts = vec![0; bins];
        for v in finite {
            let k = (((v - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
        Histogram { edges, counts }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    pub histogram: Histogram,
}

impl SeriesSummary {
    fn new(name: String, values: &[f64], bins: usize) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        SeriesSummary {
            name,
            mean,
            sd,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            histogram: Histogram::new(values, bins),
        }
    }
}

/// Aggregate statistics of a study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudySummary {
    pub process: String,
    pub n_trials: usize,
    /// One series per portfolio, then the shadow difference if present.
    pub series: Vec<SeriesSummary>,
    /// Share of trials where the shadowed portfolio trailed its shadow.
    pub negative_difference_fraction: Option<f64>,
    /// Largest portfolio return magnitude across all trials.
    pub max_abs_return: f64,
}

/// One histogram bin as a flat row.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramRow {
    pub process: String,
    pub series: String,
    pub bin: usize,
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

pub fn summarize_study(process: &str, results: &[TrialResult]) -> StudySummary {
    summarize_with_bins(process, results, DEFAULT_BINS)
}

pub fn summarize_with_bins(process: &str, results: &[TrialResult], bins: usize) -> StudySummary {
    let n = results.first().map_or(0, |r| r.portfolio_returns.len());
    let mut series: Vec<SeriesSummary> = (0..n)
        .map(|j| {
            let values: Vec<f64> = results.iter().map(|r| r.portfolio_returns[j]).collect();
            SeriesSummary::new(format!("portfolio_{}", j + 1), &values, bins)
        })
        .collect();
    let differences: Vec<f64> = results.iter().filter_map(|r| r.banker_minus_shadow).collect();
    let negative_difference_fraction = if differences.is_empty() {
        None
    } else {
        series.push(SeriesSummary::new("banker_minus_shadow".into(), &differences, bins));
        Some(differences.iter().filter(|&&d| d < 0.0).count() as f64 / differences.len() as f64)
    };
    let max_abs_return = results
        .iter()
        .flat_map(|r| r.portfolio_returns.iter())
        .fold(0.0f64, |acc, r| acc.max(r.abs()));
    StudySummary {
        process: process.to_string(),
        n_trials: results.len(),
        series,
        negative_difference_fraction,
        max_abs_return,
    }
}

impl StudySummary {
    pub fn histogram_rows(&self) -> Vec<HistogramRow> {
        self.series
            .iter()
            .flat_map(|s| {
                s.histogram
                    .counts
                    .iter()
                    .enumerate()
                    .map(move |(bin, &count)| HistogramRow {
                        process: self.process.clone(),
                        series: s.name.clone(),
                        bin,
                        lower: s.histogram.edges[bin],
                        upper: s.histogram.edges[bin + 1],
                        count,
                    })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial(returns: Vec<f64>, diff: f64) -> TrialResult {
        TrialResult {
            trial: 0,
            portfolio_returns: returns,
            weighted_return: 0.0,
            weighted_variance: 0.0,
            shadow_return: Some(0.0),
            banker_minus_shadow: Some(diff),
            attempts: 1,
            negative_periods: 0,
            max_conservation_error: 0.0,
        }
    }

    #[test]
    fn histogram_covers_range() {
        let values = [-2.0, -1.0, 0.5, 3.0];
        let h = Histogram::new(&values, 5);
        assert_eq!(h.edges[0], -2.0);
        assert_eq!(*h.edges.last().unwrap(), 3.0);
        assert_eq!(h.counts.iter().sum::<usize>(), 4);
        assert_eq!(h.counts[4], 1);
    }

    #[test]
    fn constant_values_fit_one_bin() {
        let h = Histogram::new(&[1.0, 1.0], 4);
        assert!(h.edges[0] <= 1.0 && *h.edges.last().unwrap() >= 1.0);
        assert_eq!(h.counts[0], 2);
    }

    #[test]
    fn summary_fractions() {
        let results = vec![
            trial(vec![0.1, -0.1], -0.2),
            trial(vec![0.2, -0.3], -0.1),
            trial(vec![0.0, 0.05], 0.3),
            trial(vec![0.1, 0.0], -0.4),
        ];
        let summary = summarize_study("banker", &results);
        assert_eq!(summary.negative_difference_fraction, Some(0.75));
        assert_eq!(summary.series.len(), 3);
        assert!((summary.series[0].mean - 0.1).abs() < 1e-15);
        assert_eq!(summary.max_abs_return, 0.3);
        assert_eq!(summary.histogram_rows().len(), 30);
    }
}
