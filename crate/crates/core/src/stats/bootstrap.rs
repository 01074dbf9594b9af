use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{pearson, spearman, ConfidenceInterval, Result, StatResult, StatsError};

pub const DEFAULT_RESAMPLES: usize = 10_000;

/// Redraw budget for a single resample that keeps coming up degenerate.
const MAX_REDRAWS: usize = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationStat {
    Pearson,
    Spearman,
}

impl CorrelationStat {
    pub fn compute(self, xs: &[f64], ys: &[f64]) -> Result<StatResult> {
        match self {
            CorrelationStat::Pearson => pearson(xs, ys),
            CorrelationStat::Spearman => spearman(xs, ys),
        }
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// One resample, drawn from its own ChaCha stream so results do not depend
/// on how resamples are scheduled.
fn resample(xs: &[f64], ys: &[f64], stat: CorrelationStat, seed: u64, k: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    let n = xs.len();
    let mut bx = vec![0.0; n];
    let mut by = vec![0.0; n];
    for _ in 0..MAX_REDRAWS {
        for i in 0..n {
            let j = rng.random_range(0..n);
            bx[i] = xs[j];
            by[i] = ys[j];
        }
        match stat.compute(&bx, &by) {
            Ok(r) => return Ok(r.value),
            Err(StatsError::Degenerate(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(StatsError::BootstrapStuck)
}

/// Percentile bootstrap interval for a correlation, resampling pairs with
/// replacement. Zero-variance resamples are redrawn.
pub fn bootstrap_ci(
    xs: &[f64],
    ys: &[f64],
    stat: CorrelationStat,
    n_resamples: usize,
    level: f64,
    seed: u64,
) -> Result<StatResult> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 4 {
        return Err(StatsError::TooFew {
            needed: 4,
            got: xs.len(),
        });
    }
    if n_resamples == 0 {
        return Err(StatsError::TooFew { needed: 1, got: 0 });
    }
    let point = stat.compute(xs, ys)?;
    let mut values = (0..n_resamples as u64)
        .into_par_iter()
        .map(|k| resample(xs, ys, stat, seed, k))
        .collect::<Result<Vec<f64>>>()?;
    values.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok(StatResult {
        value: point.value,
        ci: Some(ConfidenceInterval {
            lo: quantile(&values, tail),
            hi: quantile(&values, 1.0 - tail),
            level,
        }),
        p_value: None,
        n: xs.len(),
    })
}
