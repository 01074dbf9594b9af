//! Frame distances and dynamic time warping with path recovery.
//!
//! The step pattern is the symmetric unit step set {(1,0), (0,1), (1,1)}
//! without weights or band constraints. The normalized distance divides the
//! raw path cost by the number of path nodes, i.e. it is the mean local cost
//! along the optimal path.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureSequence;

#[derive(Debug, Error, PartialEq)]
pub enum DtwError {
    #[error("frame dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("cannot align an empty sequence")]
    Empty,
    #[error("trace alignments target X sequences of different lengths ({0} vs {1})")]
    TargetMismatch(usize, usize),
}

/// Frame-wise distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// `arccos(cos_sim) / π`, in `[0, 1]`.
    #[default]
    Angular,
    /// `1 - cos_sim`, in `[0, 2]`.
    CosineDistance,
    Euclidean,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Angular, Metric::CosineDistance, Metric::Euclidean];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Angular => "angular",
            Metric::CosineDistance => "cosine_distance",
            Metric::Euclidean => "euclidean",
        }
    }

    /// Distance between two frames of equal length. No dimension check.
    #[inline]
    pub fn distance(self, u: &[f64], v: &[f64]) -> f64 {
        match self {
            Metric::Angular => cosine_similarity(u, v).acos() / std::f64::consts::PI,
            Metric::CosineDistance => 1.0 - cosine_similarity(u, v),
            Metric::Euclidean => u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "angular" => Ok(Metric::Angular),
            "cosine" | "cosine_distance" => Ok(Metric::CosineDistance),
            "euclidean" => Ok(Metric::Euclidean),
            other => Err(format!(
                "unknown metric `{other}` (expected angular, cosine or euclidean)"
            )),
        }
    }
}

/// Cosine similarity clamped to `[-1, 1]`; zero when either frame is the zero vector.
#[inline]
fn cosine_similarity(u: &[f64], v: &[f64]) -> f64 {
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    // sqrt(nu * nu) == nu exactly, so identical frames give similarity 1
    (dot / (nu * nv).sqrt()).clamp(-1.0, 1.0)
}

pub fn frame_distance(u: &[f64], v: &[f64], metric: Metric) -> Result<f64, DtwError> {
    if u.len() != v.len() {
        return Err(DtwError::DimensionMismatch(u.len(), v.len()));
    }
    Ok(metric.distance(u, v))
}

/// Optimal DTW alignment between a first and a second sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub d_raw: f64,
    /// `(i, j)` pairs: `i` indexes the first sequence, `j` the second.
    pub path: Vec<(usize, usize)>,
    /// Local frame distance at each path node.
    pub local_costs: Vec<f64>,
    /// `d_raw / path.len()`.
    pub d: f64,
    /// Lengths of the two aligned sequences.
    pub lengths: (usize, usize),
}

// Backpointer codes.
const DIAG: u8 = 0;
const VERT: u8 = 1; // from (i-1, j)
const HORZ: u8 = 2; // from (i, j-1)

/// Aligns `first` against `second`.
///
/// Among equal-cost predecessors the backtrack prefers the diagonal step,
/// then `(i-1, j)`, then `(i, j-1)`.
pub fn dtw_align(first: &FeatureSequence, second: &FeatureSequence, metric: Metric) -> Result<Alignment, DtwError> {
    if first.dim() != second.dim() {
        return Err(DtwError::DimensionMismatch(first.dim(), second.dim()));
    }
    align_with(first.frames(), second.frames(), |i, j| {
        metric.distance(first.row(i), second.row(j))
    })
}

/// DTW over an arbitrary local cost function on an `n × m` grid.
pub fn align_with<F>(n: usize, m: usize, mut cost: F) -> Result<Alignment, DtwError>
where
    F: FnMut(usize, usize) -> f64,
{
    if n == 0 || m == 0 {
        return Err(DtwError::Empty);
    }
    let mut back = vec![DIAG; n * m];
    let mut prev = vec![0.0f64; m];
    let mut curr = vec![0.0f64; m];
    for i in 0..n {
        for j in 0..m {
            let c = cost(i, j);
            let (best, from) = match (i, j) {
                (0, 0) => (0.0, DIAG),
                (0, _) => (curr[j - 1], HORZ),
                (_, 0) => (prev[j], VERT),
                _ => {
                    let (diag, vert, horz) = (prev[j - 1], prev[j], curr[j - 1]);
                    if diag <= vert && diag <= horz {
                        (diag, DIAG)
                    } else if vert <= horz {
                        (vert, VERT)
                    } else {
                        (horz, HORZ)
                    }
                }
            };
            curr[j] = if i == 0 && j == 0 { c } else { best + c };
            back[i * m + j] = from;
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    let d_raw = prev[m - 1];

    let mut path = Vec::with_capacity(n + m - 1);
    let (mut i, mut j) = (n - 1, m - 1);
    loop {
        path.push((i, j));
        if i == 0 && j == 0 {
            break;
        }
        match back[i * m + j] {
            DIAG => {
                i -= 1;
                j -= 1;
            }
            VERT => i -= 1,
            _ => j -= 1,
        }
    }
    path.reverse();
    let local_costs: Vec<f64> = path.iter().map(|&(i, j)| cost(i, j)).collect();
    let d = d_raw / path.len() as f64;
    Ok(Alignment {
        d_raw,
        path,
        local_costs,
        d,
        lengths: (n, m),
    })
}

/// Per-frame local costs of the A→X and B→X alignments, indexed by X frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalTrace {
    pub a_local: Vec<f64>,
    pub b_local: Vec<f64>,
    /// Path nodes touching each X frame, per alignment.
    pub a_steps: Vec<usize>,
    pub b_steps: Vec<usize>,
}

impl LocalTrace {
    /// `b_local - a_local`: positive where B is further from X than A.
    pub fn difference(&self) -> Vec<f64> {
        self.b_local.iter().zip(&self.a_local).map(|(b, a)| b - a).collect()
    }

    /// CSV with header `x_frame,a_local,b_local`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x_frame,a_local,b_local")?;
        for (j, (a, b)) in self.a_local.iter().zip(&self.b_local).enumerate() {
            writeln!(out, "{j},{a},{b}")?;
        }
        Ok(())
    }
}

fn per_target_mean(alignment: &Alignment) -> (Vec<f64>, Vec<usize>) {
    let m = alignment.lengths.1;
    let mut sums = vec![0.0; m];
    let mut counts = vec![0usize; m];
    for (&(_, j), &c) in alignment.path.iter().zip(&alignment.local_costs) {
        sums[j] += c;
        counts[j] += 1;
    }
    let means = sums.iter().zip(&counts).map(|(s, &n)| s / n as f64).collect();
    (means, counts)
}

/// Builds the local-distance trace from alignments of A and B against the same X
/// (X is the second sequence of both).
pub fn local_trace(a_to_x: &Alignment, b_to_x: &Alignment) -> Result<LocalTrace, DtwError> {
    if a_to_x.lengths.1 != b_to_x.lengths.1 {
        return Err(DtwError::TargetMismatch(a_to_x.lengths.1, b_to_x.lengths.1));
    }
    let (a_local, a_steps) = per_target_mean(a_to_x);
    let (b_local, b_steps) = per_target_mean(b_to_x);
    Ok(LocalTrace {
        a_local,
        b_local,
        a_steps,
        b_steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FrameSpec;
    use proptest::prelude::*;

    fn seq(rows: &[Vec<f64>]) -> FeatureSequence {
        FeatureSequence::from_rows(rows, FrameSpec::default()).unwrap()
    }

    fn scalar(values: &[f64]) -> FeatureSequence {
        seq(&values.iter().map(|&v| vec![v]).collect::<Vec<_>>())
    }

    /// Exhaustive minimum over monotone contiguous paths, summing costs from (0,0).
    fn brute_force(a: &FeatureSequence, b: &FeatureSequence, metric: Metric) -> f64 {
        fn walk(a: &FeatureSequence, b: &FeatureSequence, m: Metric, i: usize, j: usize, acc: f64) -> f64 {
            let acc = if i == 0 && j == 0 {
                m.distance(a.row(0), b.row(0))
            } else {
                acc + m.distance(a.row(i), b.row(j))
            };
            if i + 1 == a.frames() && j + 1 == b.frames() {
                return acc;
            }
            let mut best = f64::INFINITY;
            if i + 1 < a.frames() && j + 1 < b.frames() {
                best = best.min(walk(a, b, m, i + 1, j + 1, acc));
            }
            if i + 1 < a.frames() {
                best = best.min(walk(a, b, m, i + 1, j, acc));
            }
            if j + 1 < b.frames() {
                best = best.min(walk(a, b, m, i, j + 1, acc));
            }
            best
        }
        walk(a, b, metric, 0, 0, 0.0)
    }

    #[test]
    fn frame_distance_cases() {
        for metric in Metric::ALL {
            assert_eq!(frame_distance(&[0.3, -2.0], &[0.3, -2.0], metric).unwrap(), 0.0);
        }
        assert_eq!(frame_distance(&[1.0, 0.0], &[0.0, 1.0], Metric::Angular).unwrap(), 0.5);
        assert_eq!(
            frame_distance(&[3.0, 4.0], &[0.0, 0.0], Metric::Euclidean).unwrap(),
            5.0
        );
        assert_eq!(frame_distance(&[1.0, 0.0], &[-1.0, 0.0], Metric::Angular).unwrap(), 1.0);
        assert_eq!(
            frame_distance(&[1.0, 0.0], &[-2.0, 0.0], Metric::CosineDistance).unwrap(),
            2.0
        );
        assert_eq!(
            frame_distance(&[1.0], &[1.0, 2.0], Metric::Euclidean),
            Err(DtwError::DimensionMismatch(1, 2))
        );
    }

    #[test]
    fn zero_frames_do_not_produce_nan() {
        assert_eq!(Metric::Angular.distance(&[0.0, 0.0], &[1.0, 2.0]), 0.5);
        assert_eq!(Metric::CosineDistance.distance(&[0.0, 0.0], &[1.0, 2.0]), 1.0);
        assert_eq!(Metric::Angular.distance(&[0.0, 0.0], &[0.0, 0.0]), 0.5);
    }

    #[test]
    fn identical_sequences_align_on_diagonal() {
        let a = seq(&[vec![1.0, 2.0], vec![0.5, -1.0], vec![3.0, 0.1]]);
        for metric in Metric::ALL {
            let al = dtw_align(&a, &a, metric).unwrap();
            assert_eq!(al.d_raw, 0.0);
            assert_eq!(al.d, 0.0);
            assert_eq!(al.path, vec![(0, 0), (1, 1), (2, 2)]);
        }
    }

    #[test]
    fn time_dilation_costs_nothing() {
        let a = seq(&[vec![1.0, 2.0], vec![0.5, -1.0], vec![3.0, 0.1]]);
        let dup = seq(&a.rows().flat_map(|r| [r.to_vec(), r.to_vec()]).collect::<Vec<_>>());
        for metric in Metric::ALL {
            let al = dtw_align(&a, &dup, metric).unwrap();
            assert_eq!(al.d_raw, 0.0);
            assert!(al.local_costs.iter().all(|&c| c == 0.0));
        }
    }

    #[test]
    fn three_by_two_example() {
        let al = dtw_align(&scalar(&[0.0, 1.0, 2.0]), &scalar(&[0.0, 2.0]), Metric::Euclidean).unwrap();
        assert_eq!(al.d_raw, 1.0);
        assert_eq!(al.path.len(), 3);
        assert_eq!(al.d, 1.0 / 3.0);
        // tie between (0,0)->(1,0)->(2,1) and (0,0)->(1,1)->(2,1); diagonal first on the backtrack
        assert_eq!(al.path, vec![(0, 0), (1, 0), (2, 1)]);
        assert_eq!(
            al.d_raw,
            brute_force(&scalar(&[0.0, 1.0, 2.0]), &scalar(&[0.0, 2.0]), Metric::Euclidean)
        );
    }

    #[test]
    fn errors() {
        let a = scalar(&[1.0]);
        let b = seq(&[vec![1.0, 2.0]]);
        assert_eq!(
            dtw_align(&a, &b, Metric::Angular),
            Err(DtwError::DimensionMismatch(1, 2))
        );
        assert_eq!(align_with(0, 3, |_, _| 0.0), Err(DtwError::Empty));
    }

    #[test]
    fn trace_identities() {
        let x = seq(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0], vec![0.2, 0.9]]);
        let b = seq(&[vec![1.0, 0.0], vec![-1.0, 0.3], vec![0.5, 1.0]]);
        let ax = dtw_align(&x, &x, Metric::Angular).unwrap();
        let bx = dtw_align(&b, &x, Metric::Angular).unwrap();
        let trace = local_trace(&ax, &bx).unwrap();
        assert!(trace.a_local.iter().all(|&v| v == 0.0));
        let reagg: f64 = trace
            .b_local
            .iter()
            .zip(&trace.b_steps)
            .map(|(c, &n)| c * n as f64)
            .sum::<f64>()
            / trace.b_steps.iter().sum::<usize>() as f64;
        assert!((reagg - bx.d).abs() < 1e-12);

        let short = dtw_align(&x, &b, Metric::Angular).unwrap();
        assert_eq!(local_trace(&ax, &short), Err(DtwError::TargetMismatch(4, 3)));

        let mut csv = Vec::new();
        trace.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("x_frame,a_local,b_local\n0,0,"));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn trace_localizes_difference() {
        // X frames point in well-separated directions; B equals X except
        // frames 10..20, which are rotated a little in the first plane.
        let x_rows: Vec<Vec<f64>> = (0..30)
            .map(|t| {
                let t = t as f64;
                vec![(1.7 * t).sin(), (2.3 * t).cos(), (0.9 * t + 1.0).sin(), (3.1 * t).cos()]
            })
            .collect();
        let mut b_rows = x_rows.clone();
        let (sin, cos) = 0.35f64.sin_cos();
        for row in &mut b_rows[10..20] {
            let (u, v) = (row[0], row[1]);
            row[0] = cos * u - sin * v;
            row[1] = sin * u + cos * v;
        }
        let x = seq(&x_rows);
        let b = seq(&b_rows);
        let a = x.clone();
        let trace = local_trace(
            &dtw_align(&a, &x, Metric::Angular).unwrap(),
            &dtw_align(&b, &x, Metric::Angular).unwrap(),
        )
        .unwrap();
        for (j, diff) in trace.difference().iter().enumerate() {
            if *diff > 1e-12 {
                assert!((8..=21).contains(&j), "frame {j} differs by {diff}");
            }
        }
        assert!(trace.difference()[10..20].iter().all(|&d| d > 0.0));
    }

    fn arb_seq(max_len: usize, dim: usize) -> impl Strategy<Value = FeatureSequence> {
        proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, dim), 1..=max_len).prop_map(|rows| seq(&rows))
    }

    fn arb_pair() -> impl Strategy<Value = (FeatureSequence, FeatureSequence)> {
        (1usize..=4).prop_flat_map(|dim| (arb_seq(6, dim), arb_seq(6, dim)))
    }

    proptest! {
        #[test]
        fn dp_matches_exhaustive((a, b) in arb_pair()) {
            for metric in Metric::ALL {
                let al = dtw_align(&a, &b, metric).unwrap();
                prop_assert_eq!(al.d_raw, brute_force(&a, &b, metric));
                prop_assert_eq!(al.d_raw, al.local_costs.iter().fold(0.0, |s, c| s + c));
                prop_assert_eq!(al.path[0], (0, 0));
                prop_assert_eq!(*al.path.last().unwrap(), (a.frames() - 1, b.frames() - 1));
                for w in al.path.windows(2) {
                    let (di, dj) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
                    prop_assert!(matches!((di, dj), (1, 0) | (0, 1) | (1, 1)));
                }
                prop_assert_eq!(al.d, al.d_raw / al.path.len() as f64);
            }
        }

        #[test]
        fn cost_is_symmetric((a, b) in arb_pair()) {
            for metric in Metric::ALL {
                let ab = dtw_align(&a, &b, metric).unwrap();
                let ba = dtw_align(&b, &a, metric).unwrap();
                prop_assert!((ab.d_raw - ba.d_raw).abs() <= 1e-12 * (1.0 + ab.d_raw));
            }
        }

        #[test]
        fn angular_costs_bounded((a, b) in arb_pair()) {
            let al = dtw_align(&a, &b, Metric::Angular).unwrap();
            prop_assert!(al.local_costs.iter().all(|c| (0.0..=1.0).contains(c)));
            prop_assert!((0.0..=1.0).contains(&al.d));
            prop_assert_eq!(dtw_align(&a, &a, Metric::Angular).unwrap().d, 0.0);
        }
    }
}
