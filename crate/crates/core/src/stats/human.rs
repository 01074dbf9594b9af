//! Human listener responses: parsing, catch-trial screening and the same
//! nested averaging used for machine scores.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{pearson, StatResult, StatsError};
use crate::abx::{aggregate_entries, AbxError, Averaging, EvaluationReport, ReportConfig};
use crate::manifest::{Dataset, Triplet};

#[derive(Debug, Error)]
pub enum HumanError {
    #[error("responses line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("response {index} (participant `{participant}`): unknown item `{item_id}`")]
    UnknownItem {
        index: usize,
        participant: String,
        item_id: String,
    },
    #[error("response {index} (participant `{participant}`): ({a}, {b}, {x}) is not a valid {kind} triplet")]
    InvalidTriplet {
        index: usize,
        participant: String,
        kind: &'static str,
        a: String,
        b: String,
        x: String,
    },
    #[error(transparent)]
    Aggregate(#[from] AbxError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

pub type Result<T, E = HumanError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripletIds {
    pub a: String,
    pub b: String,
    pub x: String,
}

/// Role chosen as matching X.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Choice {
    A,
    B,
}

/// Playback order of the A and B stimuli (X always plays last).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PresentedOrder {
    AB,
    BA,
}

/// One trial, as exported by the listening-test app (one JSON object per line).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanResponse {
    pub participant_id: String,
    pub triplet: TripletIds,
    pub presented_order: PresentedOrder,
    pub choice: Choice,
    pub is_catch: bool,
    pub response_ms: f64,
}

pub fn parse_responses(jsonl: &str) -> Result<Vec<HumanResponse>> {
    jsonl
        .lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| HumanError::Parse {
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}

pub fn write_responses(responses: &[HumanResponse]) -> String {
    responses
        .iter()
        .map(|r| serde_json::to_string(r).expect("serializable") + "\n")
        .collect()
}

/// Catch-trial error above which a participant is flagged for exclusion.
pub const DEFAULT_CATCH_THRESHOLD: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanConfig {
    pub catch_threshold: f64,
    /// Drop flagged participants from the error computation.
    pub exclude_flagged: bool,
    pub averaging: Averaging,
}

impl Default for HumanConfig {
    fn default() -> Self {
        Self {
            catch_threshold: DEFAULT_CATCH_THRESHOLD,
            exclude_flagged: true,
            averaging: Averaging::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantSummary {
    pub participant_id: String,
    pub n_trials: usize,
    pub n_catch: usize,
    pub catch_errors: usize,
    pub catch_error_rate: Option<f64>,
    pub test_error_rate: Option<f64>,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanReport {
    pub config: HumanConfig,
    pub participants: Vec<ParticipantSummary>,
    pub report: EvaluationReport,
}

impl HumanReport {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }
}

struct Resolved {
    triplet: Triplet,
    correct: bool,
}

fn resolve(dataset: &Dataset, index: usize, r: &HumanResponse) -> Result<Resolved> {
    let lookup = |id: &str| {
        dataset.item_by_id(id).ok_or_else(|| HumanError::UnknownItem {
            index,
            participant: r.participant_id.clone(),
            item_id: id.to_owned(),
        })
    };
    let triplet = Triplet {
        a: lookup(&r.triplet.a)?,
        b: lookup(&r.triplet.b)?,
        x: lookup(&r.triplet.x)?,
    };
    let invalid = |kind| HumanError::InvalidTriplet {
        index,
        participant: r.participant_id.clone(),
        kind,
        a: r.triplet.a.clone(),
        b: r.triplet.b.clone(),
        x: r.triplet.x.clone(),
    };
    let expected = if r.is_catch {
        // X is the very recording of A or B
        let (a, b) = (dataset.item(triplet.a), dataset.item(triplet.b));
        let pair_ok = a.speaker_id == b.speaker_id && a.contrast_id == b.contrast_id && a.category != b.category;
        match (pair_ok, triplet.x == triplet.a, triplet.x == triplet.b) {
            (true, true, _) => Choice::A,
            (true, _, true) => Choice::B,
            _ => return Err(invalid("catch")),
        }
    } else {
        if !triplet.is_valid(dataset) {
            return Err(invalid("test"));
        }
        Choice::A
    };
    Ok(Resolved {
        triplet,
        correct: r.choice == expected,
    })
}

/// Screens participants on catch trials and computes the nested-average
/// error over test trials. Cells hold response means.
pub fn human_error(responses: &[HumanResponse], dataset: &Dataset, config: &HumanConfig) -> Result<HumanReport> {
    let resolved = responses
        .iter()
        .enumerate()
        .map(|(i, r)| resolve(dataset, i, r))
        .collect::<Result<Vec<_>>>()?;

    #[derive(Default)]
    struct Tally {
        trials: usize,
        catch: usize,
        catch_errors: usize,
        test: usize,
        test_errors: usize,
    }
    let mut tallies: BTreeMap<&str, Tally> = BTreeMap::new();
    for (r, res) in responses.iter().zip(&resolved) {
        let t = tallies.entry(r.participant_id.as_str()).or_default();
        t.trials += 1;
        if r.is_catch {
            t.catch += 1;
            t.catch_errors += usize::from(!res.correct);
        } else {
            t.test += 1;
            t.test_errors += usize::from(!res.correct);
        }
    }
    let rate = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    let participants: Vec<ParticipantSummary> = tallies
        .iter()
        .map(|(id, t)| {
            let catch_error_rate = rate(t.catch_errors, t.catch);
            ParticipantSummary {
                participant_id: (*id).to_owned(),
                n_trials: t.trials,
                n_catch: t.catch,
                catch_errors: t.catch_errors,
                catch_error_rate,
                test_error_rate: rate(t.test_errors, t.test),
                flagged: catch_error_rate.is_some_and(|e| e > config.catch_threshold),
            }
        })
        .collect();

    let excluded: Vec<&str> = participants
        .iter()
        .filter(|p| config.exclude_flagged && p.flagged)
        .map(|p| p.participant_id.as_str())
        .collect();
    let entries = responses
        .iter()
        .zip(&resolved)
        .filter(|(r, _)| !r.is_catch && !excluded.contains(&r.participant_id.as_str()))
        .map(|(_, res)| (res.triplet, if res.correct { 1.0 } else { 0.0 }));
    let report = aggregate_entries(
        entries,
        dataset,
        config.averaging,
        ReportConfig {
            metric: None,
            context: None,
            averaging: config.averaging,
            layer: None,
        },
    )?;
    Ok(HumanReport {
        config: config.clone(),
        participants,
        report,
    })
}

/// Word-level comparison: per-contrast error rates present in both reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordLevelComparison {
    pub correlation: StatResult,
    /// `(contrast_id, human error, model error)`.
    pub words: Vec<(String, f64, f64)>,
}

pub fn word_level_correlation(human: &EvaluationReport, model: &EvaluationReport) -> Result<WordLevelComparison> {
    let words: Vec<(String, f64, f64)> = human
        .contrasts
        .iter()
        .filter_map(|h| {
            model
                .contrast(&h.contrast_id)
                .map(|m| (h.contrast_id.clone(), h.error_rate, m.error_rate))
        })
        .collect();
    let hs: Vec<f64> = words.iter().map(|w| w.1).collect();
    let ms: Vec<f64> = words.iter().map(|w| w.2).collect();
    Ok(WordLevelComparison {
        correlation: pearson(&hs, &ms)?,
        words,
    })
}
