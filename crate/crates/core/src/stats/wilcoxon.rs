use super::{ranks, Result, StatResult, StatsError};

/// Largest sample size (after dropping zeros) that uses the exact null distribution.
pub const EXACT_MAX_N: usize = 25;

/// Two-sided Wilcoxon signed-rank test. `value` is W+, the rank sum of the
/// positive differences.
///
/// Zero differences are dropped and tied magnitudes get mid-ranks. Up to
/// [`EXACT_MAX_N`] observations the p-value comes from the exact permutation
/// distribution of the (possibly tied) ranks; above that a normal
/// approximation with tie-corrected variance is used.
pub fn wilcoxon_signed_rank(diffs: &[f64]) -> Result<StatResult> {
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|&d| d != 0.0).collect();
    if nonzero.is_empty() {
        return Err(StatsError::AllZero);
    }
    let n = nonzero.len();
    if n < 5 {
        return Err(StatsError::TooFew { needed: 5, got: n });
    }
    let magnitudes: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    let r = ranks(&magnitudes);
    let w_plus: f64 = nonzero
        .iter()
        .zip(&r)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, rank)| rank)
        .sum();

    let p = if n <= EXACT_MAX_N {
        exact_p(&r, w_plus)
    } else {
        normal_p(&magnitudes, w_plus)
    };
    Ok(StatResult {
        value: w_plus,
        ci: None,
        p_value: Some(p),
        n,
    })
}

fn exact_p(ranks: &[f64], w_plus: f64) -> f64 {
    // mid-ranks are multiples of 1/2, so doubled ranks are integers
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0u64; total + 1];
    counts[0] = 1;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] > 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let w = (w_plus * 2.0).round() as usize;
    let all = (1u64 << ranks.len()) as f64;
    let lower: u64 = counts[..=w].iter().sum();
    let upper: u64 = counts[w..].iter().sum();
    (2.0 * lower.min(upper) as f64 / all).min(1.0)
}

fn normal_p(magnitudes: &[f64], w_plus: f64) -> f64 {
    let n = magnitudes.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut sorted = magnitudes.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&v| v == sorted[i]).count();
        let t = j as f64;
        tie_term += t * t * t - t;
        i += j;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    let z = (w_plus - mean) / var.sqrt();
    libm::erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
}
