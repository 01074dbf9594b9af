//! Triplet scoring and nested averaging into error rates.
//!
//! Averaging levels:
//! 1. mean over take combinations inside a cell
//!    `(contrast, speaker of A/B, speaker of X, direction)`;
//! 2. mean over the cells of a contrast;
//! 3. unweighted mean over contrasts. The error rate is `1 - score`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dtw::{dtw_align, DtwError, Metric};
use crate::features::{FeatureError, FeatureSequence, FeatureSource};
use crate::manifest::{enumerate_triplets, Dataset, Item, ItemIdx, Triplet};

#[derive(Debug, Error)]
pub enum AbxError {
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("item `{item_id}`: {source}")]
    Dtw {
        item_id: String,
        #[source]
        source: DtwError,
    },
    #[error("item `{item_id}` has no start_s/end_s, required for in-context evaluation")]
    MissingTimestamps { item_id: String },
    #[error("score references an invalid triplet ({a}, {b}, {x})")]
    UnknownTriplet { a: ItemIdx, b: ItemIdx, x: ItemIdx },
    #[error("no valid triplets to aggregate")]
    NoTriplets,
    #[error("worker pool: {0}")]
    Pool(String),
}

pub type Result<T, E = AbxError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextMode {
    /// Features were computed from clipped word audio.
    #[default]
    OutOfContext,
    /// Features cover the full utterance and are sliced to the word span.
    InContext,
}

impl fmt::Display for ContextMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ContextMode::OutOfContext => "out_of_context",
            ContextMode::InContext => "in_context",
        })
    }
}

impl FromStr for ContextMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "out" | "out_of_context" => Ok(ContextMode::OutOfContext),
            "in" | "in_context" => Ok(ContextMode::InContext),
            other => Err(format!("unknown context mode `{other}` (expected out or in)")),
        }
    }
}

/// Whether `(s1 -> s2)` and `(s2 -> s1)` form separate cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeakerPairs {
    #[default]
    Ordered,
    Unordered,
}

/// Whether the two category directions form separate cells or are pooled
/// (triplet-weighted) inside one speaker-pair cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Directions {
    #[default]
    Separate,
    Pooled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Averaging {
    pub speaker_pairs: SpeakerPairs,
    pub directions: Directions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub metric: Metric,
    pub context: ContextMode,
    pub averaging: Averaging,
    /// Worker threads for loading and scoring. Results do not depend on it.
    pub workers: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            metric: Metric::Angular,
            context: ContextMode::OutOfContext,
            averaging: Averaging::default(),
            workers: 1,
        }
    }
}

/// ABX score from the two normalized distances: 1 if X is closer to A,
/// 0.5 on an exact tie, 0 otherwise.
pub fn abx_score(d_ax: f64, d_bx: f64) -> f64 {
    if d_ax < d_bx {
        1.0
    } else if d_ax == d_bx {
        0.5
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripletScore {
    pub triplet: Triplet,
    pub d_ax: f64,
    pub d_bx: f64,
    pub score: f64,
}

pub fn score_triplet(
    triplet: Triplet,
    ra: &FeatureSequence,
    rb: &FeatureSequence,
    rx: &FeatureSequence,
    metric: Metric,
) -> Result<TripletScore, DtwError> {
    let d_ax = dtw_align(ra, rx, metric)?.d;
    let d_bx = dtw_align(rb, rx, metric)?.d;
    Ok(TripletScore {
        triplet,
        d_ax,
        d_bx,
        score: abx_score(d_ax, d_bx),
    })
}

/// Settings echoed into every report. Metric and context are `None` for
/// human listener reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub metric: Option<Metric>,
    pub context: Option<ContextMode>,
    pub averaging: Averaging,
    pub layer: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub speaker_ab: String,
    pub speaker_x: String,
    /// Category of A, or `None` when directions are pooled.
    pub category_a: Option<String>,
    pub score: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastReport {
    pub contrast_id: String,
    pub score: f64,
    pub error_rate: f64,
    pub n_triplets: usize,
    pub cells: Vec<CellReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub config: ReportConfig,
    pub score: f64,
    pub error_rate: f64,
    pub n_triplets: usize,
    pub n_cells: usize,
    pub n_contrasts: usize,
    pub contrasts: Vec<ContrastReport>,
    /// Contrasts of the dataset with no scored triplet.
    pub skipped_contrasts: Vec<String>,
}

/// Per-speaker-pair summary row (mean over the pair's direction cells).
#[derive(Debug, Clone, PartialEq)]
pub struct PairRow<'a> {
    pub contrast_id: &'a str,
    pub speaker_ab: &'a str,
    pub speaker_x: &'a str,
    pub score: f64,
    pub count: usize,
}

impl EvaluationReport {
    pub fn contrast(&self, contrast_id: &str) -> Option<&ContrastReport> {
        self.contrasts.iter().find(|c| c.contrast_id == contrast_id)
    }

    pub fn pair_rows(&self) -> Vec<PairRow<'_>> {
        let mut rows = Vec::new();
        for contrast in &self.contrasts {
            let mut pairs: BTreeMap<(&str, &str), (f64, usize, usize)> = BTreeMap::new();
            for cell in &contrast.cells {
                let entry = pairs
                    .entry((cell.speaker_ab.as_str(), cell.speaker_x.as_str()))
                    .or_default();
                entry.0 += cell.score;
                entry.1 += 1;
                entry.2 += cell.count;
            }
            for ((speaker_ab, speaker_x), (sum, cells, count)) in pairs {
                rows.push(PairRow {
                    contrast_id: &contrast.contrast_id,
                    speaker_ab,
                    speaker_x,
                    score: sum / cells as f64,
                    count,
                });
            }
        }
        rows
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    /// Flat CSV: `level,contrast_id,speaker_a,speaker_x,score,count`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "level,contrast_id,speaker_a,speaker_x,score,count")?;
        for row in self.pair_rows() {
            writeln!(
                out,
                "pair,{},{},{},{},{}",
                row.contrast_id, row.speaker_ab, row.speaker_x, row.score, row.count
            )?;
        }
        for c in &self.contrasts {
            writeln!(out, "contrast,{},,,{},{}", c.contrast_id, c.score, c.n_triplets)?;
        }
        writeln!(out, "overall,,,,{},{}", self.score, self.n_triplets)
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec");
        String::from_utf8(buf).expect("utf-8")
    }
}

type CellKey<'a> = (&'a str, &'a str, Option<usize>);

/// Nested average of `(triplet, score)` entries.
///
/// Within a cell, scores are summed in input order; cells and contrasts are
/// reduced in sorted key order.
pub fn aggregate_entries<I>(
    entries: I,
    dataset: &Dataset,
    averaging: Averaging,
    config: ReportConfig,
) -> Result<EvaluationReport>
where
    I: IntoIterator<Item = (Triplet, f64)>,
{
    let mut grouped: BTreeMap<&str, BTreeMap<CellKey<'_>, (f64, usize)>> = BTreeMap::new();
    let mut n_triplets = 0;
    for (t, score) in entries {
        if !t.is_valid(dataset) {
            return Err(AbxError::UnknownTriplet { a: t.a, b: t.b, x: t.x });
        }
        let (a, x) = (dataset.item(t.a), dataset.item(t.x));
        let (mut s1, mut s2) = (a.speaker_id.as_str(), x.speaker_id.as_str());
        if averaging.speaker_pairs == SpeakerPairs::Unordered && s2 < s1 {
            std::mem::swap(&mut s1, &mut s2);
        }
        let direction = match averaging.directions {
            Directions::Separate => dataset
                .contrast(&a.contrast_id)
                .and_then(|c| c.category_index(&a.category)),
            Directions::Pooled => None,
        };
        let cell = grouped
            .entry(a.contrast_id.as_str())
            .or_default()
            .entry((s1, s2, direction))
            .or_default();
        cell.0 += score;
        cell.1 += 1;
        n_triplets += 1;
    }
    if grouped.is_empty() {
        return Err(AbxError::NoTriplets);
    }

    let mut contrasts = Vec::with_capacity(grouped.len());
    let mut n_cells = 0;
    for (contrast_id, cells) in &grouped {
        let contrast = dataset.contrast(contrast_id).expect("validated triplet");
        let cells: Vec<CellReport> = cells
            .iter()
            .map(|(&(s1, s2, direction), &(sum, count))| CellReport {
                speaker_ab: s1.to_owned(),
                speaker_x: s2.to_owned(),
                category_a: direction.map(|d| contrast.categories[d].clone()),
                score: sum / count as f64,
                count,
            })
            .collect();
        let score = cells.iter().map(|c| c.score).sum::<f64>() / cells.len() as f64;
        n_cells += cells.len();
        contrasts.push(ContrastReport {
            contrast_id: (*contrast_id).to_owned(),
            score,
            error_rate: 1.0 - score,
            n_triplets: cells.iter().map(|c| c.count).sum(),
            cells,
        });
    }
    let score = contrasts.iter().map(|c| c.score).sum::<f64>() / contrasts.len() as f64;
    let skipped_contrasts = dataset
        .contrasts()
        .iter()
        .filter(|c| !grouped.contains_key(c.contrast_id.as_str()))
        .map(|c| c.contrast_id.clone())
        .collect();
    Ok(EvaluationReport {
        config,
        score,
        error_rate: 1.0 - score,
        n_triplets,
        n_cells,
        n_contrasts: contrasts.len(),
        contrasts,
        skipped_contrasts,
    })
}

pub fn aggregate(
    scores: &[TripletScore],
    dataset: &Dataset,
    averaging: Averaging,
    config: ReportConfig,
) -> Result<EvaluationReport> {
    aggregate_entries(scores.iter().map(|s| (s.triplet, s.score)), dataset, averaging, config)
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| AbxError::Pool(e.to_string()))
}

/// Scores every triplet. Each `(A or B, X)` distance is computed once and
/// shared by all triplets that need it.
pub fn score_triplets(
    dataset: &Dataset,
    triplets: &[Triplet],
    features: &HashMap<ItemIdx, FeatureSequence>,
    metric: Metric,
    workers: usize,
) -> Result<Vec<TripletScore>> {
    let pairs: Vec<(ItemIdx, ItemIdx)> = triplets
        .iter()
        .flat_map(|t| [(t.a, t.x), (t.b, t.x)])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let distances: Vec<Result<f64>> = pool(workers)?.install(|| {
        pairs
            .par_iter()
            .map(|&(i, x)| {
                dtw_align(&features[&i], &features[&x], metric)
                    .map(|al| al.d)
                    .map_err(|source| AbxError::Dtw {
                        item_id: dataset.item(i).item_id.clone(),
                        source,
                    })
            })
            .collect()
    });
    let mut cache = HashMap::with_capacity(pairs.len());
    for (pair, d) in pairs.into_iter().zip(distances) {
        cache.insert(pair, d?);
    }
    Ok(triplets
        .iter()
        .map(|&t| {
            let d_ax = cache[&(t.a, t.x)];
            let d_bx = cache[&(t.b, t.x)];
            TripletScore {
                triplet: t,
                d_ax,
                d_bx,
                score: abx_score(d_ax, d_bx),
            }
        })
        .collect())
}

/// Full pipeline with a caller-supplied feature loader (already clipped or
/// sliced as appropriate).
pub fn evaluate_with<L>(
    dataset: &Dataset,
    load: L,
    config: &EvalConfig,
    layer: Option<u32>,
) -> Result<(EvaluationReport, Vec<TripletScore>)>
where
    L: Fn(&Item) -> Result<FeatureSequence> + Sync,
{
    let triplets = enumerate_triplets(dataset);
    if triplets.is_empty() {
        return Err(AbxError::NoTriplets);
    }
    let needed: Vec<ItemIdx> = triplets
        .iter()
        .flat_map(|t| [t.a, t.b, t.x])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let loaded: Vec<Result<FeatureSequence>> =
        pool(config.workers)?.install(|| needed.par_iter().map(|&i| load(dataset.item(i))).collect());
    let mut features = HashMap::with_capacity(needed.len());
    for (idx, seq) in needed.into_iter().zip(loaded) {
        features.insert(idx, seq?);
    }
    let scores = score_triplets(dataset, &triplets, &features, config.metric, config.workers)?;
    let report_config = ReportConfig {
        metric: Some(config.metric),
        context: Some(config.context),
        averaging: config.averaging,
        layer,
    };
    let report = aggregate(&scores, dataset, config.averaging, report_config)?;
    Ok((report, scores))
}

/// Loads one item's features from `source` according to the context mode.
pub fn load_item(source: &FeatureSource, item: &Item, context: ContextMode) -> Result<FeatureSequence> {
    match context {
        ContextMode::OutOfContext => Ok(source.load(item)?),
        ContextMode::InContext => {
            let span = item.span.ok_or_else(|| AbxError::MissingTimestamps {
                item_id: item.item_id.clone(),
            })?;
            let full = source.load(item)?;
            full.slice_frames(span.start_s, span.end_s).map_err(|e| {
                AbxError::Feature(FeatureError::Item {
                    item_id: item.item_id.clone(),
                    source: Box::new(e),
                })
            })
        }
    }
}

/// Evaluates one layer of features.
pub fn evaluate(dataset: &Dataset, source: &FeatureSource, config: &EvalConfig) -> Result<EvaluationReport> {
    if config.context == ContextMode::InContext {
        if let Some(item) = dataset.items().iter().find(|i| i.span.is_none()) {
            return Err(AbxError::MissingTimestamps {
                item_id: item.item_id.clone(),
            });
        }
    }
    evaluate_with(
        dataset,
        |item| load_item(source, item, config.context),
        config,
        Some(source.layer),
    )
    .map(|(report, _)| report)
}
