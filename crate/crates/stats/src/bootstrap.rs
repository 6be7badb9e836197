use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::describe::quantile_sorted;
use crate::StatsError;

pub const MAX_REDRAWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self { resamples: 2000, seed: 42 }
    }
}

/// Percentile 95% interval. Each resample draws `units` indices with
/// replacement (units are participants, so paired rows travel together)
/// from its own stream seeded with `seed + index`; the result does not
/// depend on thread count. A resample on which the estimator fails is
/// redrawn from the same stream up to `MAX_REDRAWS` times.
pub fn bootstrap_ci<F>(units: usize, estimator: F, config: BootstrapConfig) -> Result<(f64, f64), StatsError>
where
    F: Fn(&[usize]) -> Result<f64, StatsError> + Sync,
{
    if config.resamples < 100 {
        return Err(StatsError::TooFewResamples(config.resamples));
    }
    if units == 0 {
        return Err(StatsError::TooFewObservations { needed: 1, got: 0 });
    }
    let mut stats = (0..config.resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(b as u64));
            let mut idx = vec![0usize; units];
            let mut last = None;
            for _ in 0..=MAX_REDRAWS {
                for slot in idx.iter_mut() {
                    *slot = rng.random_range(0..units);
                }
                match estimator(&idx) {
                    Ok(v) if v.is_finite() => return Ok(v),
                    Ok(_) => last = Some(StatsError::ZeroTotalVariance),
                    Err(e) => last = Some(e),
                }
            }
            Err(StatsError::DegenerateResample {
                index: b,
                retries: MAX_REDRAWS,
                source: Box::new(last.expect("at least one attempt")),
            })
        })
        .collect::<Result<Vec<f64>, _>>()?;
    stats.sort_by(f64::total_cmp);
    Ok((quantile_sorted(&stats, 0.025), quantile_sorted(&stats, 0.975)))
}
