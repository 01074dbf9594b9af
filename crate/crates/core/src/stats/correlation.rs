use super::{Result, StatResult, StatsError};

fn check_pair(xs: &[f64], ys: &[f64], min_n: usize) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < min_n {
        return Err(StatsError::TooFew {
            needed: min_n,
            got: xs.len(),
        });
    }
    Ok(())
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn centered(xs: &[f64]) -> Vec<f64> {
    let m = mean(xs);
    xs.iter().map(|x| x - m).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn r_of_centered(dx: &[f64], dy: &[f64]) -> Result<f64> {
    let (sxx, syy) = (dot(dx, dx), dot(dy, dy));
    if sxx == 0.0 {
        return Err(StatsError::Degenerate("xs"));
    }
    if syy == 0.0 {
        return Err(StatsError::Degenerate("ys"));
    }
    Ok((dot(dx, dy) / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Sample Pearson correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<StatResult> {
    check_pair(xs, ys, 3)?;
    let r = r_of_centered(&centered(xs), &centered(ys))?;
    Ok(StatResult::point(r, xs.len()))
}

/// 1-based ranks with ties given the mean of the positions they span.
pub fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
    let mut out = vec![0.0; xs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && xs[order[end]] == xs[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end
        let mid = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            out[i] = mid;
        }
        start = end;
    }
    out
}

/// Spearman rank correlation: Pearson on mid-ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<StatResult> {
    check_pair(xs, ys, 3)?;
    pearson(&ranks(xs), &ranks(ys))
}

/// Residuals of the least-squares fit `v ~ 1 + control`, given centred inputs.
fn residuals(dv: &[f64], dc: &[f64], scc: f64) -> Vec<f64> {
    let beta = if scc == 0.0 { 0.0 } else { dot(dc, dv) / scc };
    dv.iter().zip(dc).map(|(v, c)| v - beta * c).collect()
}

/// Pearson correlation of the residuals of `xs` and `ys` after regressing
/// each on `control` (with intercept). A constant control removes only the mean.
pub fn partial_correlation(xs: &[f64], ys: &[f64], control: &[f64]) -> Result<StatResult> {
    check_pair(xs, ys, 4)?;
    check_pair(xs, control, 4)?;
    let dc = centered(control);
    let scc = dot(&dc, &dc);
    let (dx, dy) = (centered(xs), centered(ys));
    let (rx, ry) = (residuals(&dx, &dc, scc), residuals(&dy, &dc, scc));
    // an exact fit leaves rounding noise only
    const EXACT_FIT: f64 = 1e-24;
    if dot(&rx, &rx) <= EXACT_FIT * dot(&dx, &dx) {
        return Err(StatsError::Degenerate("xs residuals"));
    }
    if dot(&ry, &ry) <= EXACT_FIT * dot(&dy, &dy) {
        return Err(StatsError::Degenerate("ys residuals"));
    }
    Ok(StatResult::point(r_of_centered(&rx, &ry)?, xs.len()))
}
