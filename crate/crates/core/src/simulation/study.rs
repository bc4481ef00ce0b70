use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::simulation::config::{BankerInfeasibility, SimulationConfig, MAX_ATTEMPTS};
use crate::simulation::returns::{gen_returns, trial_rng};
use crate::simulation::trial::{run_trial, TrialResult};

/// Results of a study, ordered by trial index.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub results: Vec<TrialResult>,
    /// Return paths discarded under [`BankerInfeasibility::Resample`].
    pub resampled: usize,
    /// Trials that could not be completed, with their indices.
    pub failures: Vec<(usize, Error)>,
}

/// Runs one trial on its own random stream, resampling if configured.
pub fn run_seeded_trial(config: &SimulationConfig, trial: usize) -> Result<TrialResult> {
    let mut rng = trial_rng(config.seed, trial as u64);
    let mut attempts = 0;
    loop {
        attempts += 1;
        let returns = gen_returns(config, &mut rng);
        match run_trial(config, &returns) {
            Ok(mut result) => {
                result.trial = trial;
                result.attempts = attempts;
                return Ok(result);
            }
            Err(err)
                if err.is_infeasible()
                    && config.on_infeasible == BankerInfeasibility::Resample
                    && attempts < MAX_ATTEMPTS => {}
            Err(err) => return Err(err),
        }
    }
}

/// Runs `n_trials` trials in parallel; output does not depend on thread count.
pub fn run_study(config: &SimulationConfig) -> Result<StudyReport> {
    config.validate()?;
    let outcomes: Vec<(usize, Result<TrialResult>)> = (0..config.n_trials)
        .into_par_iter()
        .map(|trial| (trial, run_seeded_trial(config, trial)))
        .collect();
    let mut report = StudyReport {
        results: Vec::with_capacity(config.n_trials),
        resampled: 0,
        failures: Vec::new(),
    };
    for (trial, outcome) in outcomes {
        match outcome {
            Ok(result) => {
                report.resampled += result.attempts - 1;
                report.results.push(result);
            }
            Err(err) => report.failures.push((trial, err)),
        }
    }
    Ok(report)
}
