use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::simulation::config::SimulationConfig;

/// Random stream for one trial: ChaCha8 keyed by `seed`, with the trial index
/// as the stream number. Resampled paths continue on the same stream.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Gross returns, one row per asset class and one column per period.
///
/// Draws are `exp((U − 0.5)/2)` with `U` uniform on `[0, 1)`. Tethered paths
/// replace the last two periods with `√(1/Π)` of the earlier draws so every
/// asset class ends where it started.
pub fn gen_returns<R: Rng + ?Sized>(config: &SimulationConfig, rng: &mut R) -> DMatrix<f64> {
    let m = config.n_assets();
    let t = config.n_periods;
    let drawn = if config.tethered { t - 2 } else { t };
    let mut returns = DMatrix::zeros(m, t);
    // Column-major draw order matches period-by-period generation.
    for period in 0..drawn {
        for i in 0..m {
            let u: f64 = rng.random();
            returns[(i, period)] = ((u - 0.5) / 2.0).exp();
        }
    }
    if config.tethered {
        tether(&mut returns);
    }
    returns
}

/// Overwrites the last two periods so each row multiplies to 1.
pub fn tether(returns: &mut DMatrix<f64>) {
    let t = returns.ncols();
    assert!(t >= 3, "tethering needs at least three periods");
    for i in 0..returns.nrows() {
        let product: f64 = returns.row(i).columns(0, t - 2).iter().product();
        let closing = (1.0 / product).sqrt();
        returns[(i, t - 2)] = closing;
        returns[(i, t - 1)] = closing;
    }
}

/// The first return path of a trial.
pub fn trial_returns(config: &SimulationConfig, trial: u64) -> DMatrix<f64> {
    gen_returns(config, &mut trial_rng(config.seed, trial))
}
