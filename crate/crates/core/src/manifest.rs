//! Minimal-pair dataset model: items, contrasts, validation and triplet
//! enumeration.
//!
//! A dataset is read from two files: a CSV manifest with one row per
//! recording and a JSON sidecar listing the contrasts (minimal pairs).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Column order of the manifest header.
pub const MANIFEST_HEADER: [&str; 9] = [
    "item_id",
    "contrast_id",
    "category",
    "speaker_id",
    "phonemic_seq",
    "audio_path",
    "start_s",
    "end_s",
    "take",
];

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("manifest line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("manifest header must be `{}`, found `{found}`", MANIFEST_HEADER.join(","))]
    BadHeader { found: String },
    #[error(
        "manifest line {line}: item `{item_id}` duplicates (contrast, category, speaker, take) of line {first_line}"
    )]
    DuplicateIdentity {
        line: u64,
        first_line: u64,
        item_id: String,
    },
    #[error("manifest line {line}: item_id `{item_id}` already used on line {first_line}")]
    DuplicateItemId {
        line: u64,
        first_line: u64,
        item_id: String,
    },
    #[error("manifest line {line}: item `{item_id}` references unknown contrast `{contrast_id}`")]
    UnknownContrast {
        line: u64,
        item_id: String,
        contrast_id: String,
    },
    #[error("manifest line {line}: item `{item_id}` has category `{category}`, not one of {expected:?} for contrast `{contrast_id}`")]
    CategoryNotInContrast {
        line: u64,
        item_id: String,
        category: String,
        contrast_id: String,
        expected: Box<[String; 2]>,
    },
    #[error("manifest line {line}: item `{item_id}` phonemic_seq `{found}` differs from contrast `{contrast_id}` (`{expected}`)")]
    PhonemicMismatch {
        line: u64,
        item_id: String,
        contrast_id: String,
        expected: String,
        found: String,
    },
    #[error("contrast `{0}`: the two categories must differ")]
    SameCategories(String),
    #[error("contrast `{0}` is declared twice")]
    DuplicateContrast(String),
    #[error("contrast sidecar: {0}")]
    Sidecar(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = ManifestError> = std::result::Result<T, E>;

/// One recording of one word token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub item_id: String,
    pub contrast_id: String,
    pub category: String,
    pub speaker_id: String,
    pub phonemic_seq: String,
    pub audio_path: String,
    /// Word span inside the source utterance, for in-context slicing.
    pub span: Option<Span>,
    pub take: u32,
}

/// Half-open time interval in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub start_s: f64,
    pub end_s: f64,
}

impl Span {
    pub fn new(start_s: f64, end_s: f64) -> Option<Self> {
        (start_s.is_finite() && end_s.is_finite() && 0.0 <= start_s && start_s < end_s)
            .then_some(Self { start_s, end_s })
    }

    pub fn duration(&self) -> f64 {
        self.end_s - self.start_s
    }
}

/// A prosodic minimal pair: two categories over one phonemic sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contrast {
    pub contrast_id: String,
    pub phonemic_seq: String,
    pub categories: [String; 2],
    #[serde(default)]
    pub language: String,
}

impl Contrast {
    pub fn category_index(&self, category: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == category)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub name: String,
    pub language: String,
    pub source: String,
}

/// Index of an item inside [`Dataset::items`].
pub type ItemIdx = usize;

#[derive(Debug, Clone)]
pub struct Dataset {
    pub meta: DatasetMeta,
    items: Vec<Item>,
    contrasts: Vec<Contrast>,
    contrast_index: HashMap<String, usize>,
    item_index: HashMap<String, ItemIdx>,
}

impl Dataset {
    /// Builds a dataset from already-constructed parts, checking every
    /// invariant. Line numbers in errors count the header as line 1.
    pub fn new(meta: DatasetMeta, contrasts: Vec<Contrast>, items: Vec<Item>) -> Result<Self> {
        let mut contrast_index = HashMap::with_capacity(contrasts.len());
        for (idx, contrast) in contrasts.iter().enumerate() {
            if contrast.categories[0] == contrast.categories[1] {
                return Err(ManifestError::SameCategories(contrast.contrast_id.clone()));
            }
            if contrast_index.insert(contrast.contrast_id.clone(), idx).is_some() {
                return Err(ManifestError::DuplicateContrast(contrast.contrast_id.clone()));
            }
        }

        let mut item_index = HashMap::with_capacity(items.len());
        let mut identities: HashMap<(&str, &str, &str, u32), u64> = HashMap::new();
        for (idx, item) in items.iter().enumerate() {
            let line = idx as u64 + 2;
            let Some(&cidx) = contrast_index.get(&item.contrast_id) else {
                return Err(ManifestError::UnknownContrast {
                    line,
                    item_id: item.item_id.clone(),
                    contrast_id: item.contrast_id.clone(),
                });
            };
            let contrast = &contrasts[cidx];
            if contrast.category_index(&item.category).is_none() {
                return Err(ManifestError::CategoryNotInContrast {
                    line,
                    item_id: item.item_id.clone(),
                    category: item.category.clone(),
                    contrast_id: contrast.contrast_id.clone(),
                    expected: Box::new(contrast.categories.clone()),
                });
            }
            if item.phonemic_seq != contrast.phonemic_seq {
                return Err(ManifestError::PhonemicMismatch {
                    line,
                    item_id: item.item_id.clone(),
                    contrast_id: contrast.contrast_id.clone(),
                    expected: contrast.phonemic_seq.clone(),
                    found: item.phonemic_seq.clone(),
                });
            }
            if let Some(first) = item_index.insert(item.item_id.clone(), idx) {
                return Err(ManifestError::DuplicateItemId {
                    line,
                    first_line: first as u64 + 2,
                    item_id: item.item_id.clone(),
                });
            }
            let key = (
                item.contrast_id.as_str(),
                item.category.as_str(),
                item.speaker_id.as_str(),
                item.take,
            );
            if let Some(&first_line) = identities.get(&key) {
                return Err(ManifestError::DuplicateIdentity {
                    line,
                    first_line,
                    item_id: item.item_id.clone(),
                });
            }
            identities.insert(key, line);
        }

        Ok(Self {
            meta,
            items,
            contrasts,
            contrast_index,
            item_index,
        })
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn item(&self, idx: ItemIdx) -> &Item {
        &self.items[idx]
    }

    pub fn item_by_id(&self, item_id: &str) -> Option<ItemIdx> {
        self.item_index.get(item_id).copied()
    }

    pub fn contrasts(&self) -> &[Contrast] {
        &self.contrasts
    }

    pub fn contrast(&self, contrast_id: &str) -> Option<&Contrast> {
        self.contrast_index.get(contrast_id).map(|&idx| &self.contrasts[idx])
    }

    /// Keeps only the listed contrasts and their items.
    pub fn retain_contrasts(&self, keep: &BTreeSet<String>) -> Dataset {
        let contrasts = self
            .contrasts
            .iter()
            .filter(|c| keep.contains(&c.contrast_id))
            .cloned()
            .collect();
        let items = self
            .items
            .iter()
            .filter(|i| keep.contains(&i.contrast_id))
            .cloned()
            .collect();
        Dataset::new(self.meta.clone(), contrasts, items).expect("subset of a valid dataset is valid")
    }

    /// Cells of the contrast grid: contrast -> category slot -> speaker -> items sorted by take.
    fn grid(&self) -> BTreeMap<&str, [BTreeMap<&str, Vec<ItemIdx>>; 2]> {
        let mut grid: BTreeMap<&str, [BTreeMap<&str, Vec<ItemIdx>>; 2]> = BTreeMap::new();
        for contrast in &self.contrasts {
            grid.entry(contrast.contrast_id.as_str()).or_default();
        }
        for (idx, item) in self.items.iter().enumerate() {
            let contrast = self.contrast(&item.contrast_id).expect("validated");
            let slot = contrast.category_index(&item.category).expect("validated");
            grid.get_mut(item.contrast_id.as_str()).expect("validated")[slot]
                .entry(item.speaker_id.as_str())
                .or_default()
                .push(idx);
        }
        for slots in grid.values_mut() {
            for speakers in slots.iter_mut() {
                for takes in speakers.values_mut() {
                    takes.sort_by_key(|&idx| self.items[idx].take);
                }
            }
        }
        grid
    }
}

#[derive(Debug, Deserialize)]
struct ManifestRow {
    item_id: String,
    contrast_id: String,
    category: String,
    speaker_id: String,
    phonemic_seq: String,
    audio_path: String,
    start_s: String,
    end_s: String,
    take: String,
}

fn parse_row(row: ManifestRow, line: u64) -> Result<Item> {
    let malformed = |reason: String| ManifestError::MalformedRow { line, reason };
    for (name, value) in [
        ("item_id", &row.item_id),
        ("contrast_id", &row.contrast_id),
        ("category", &row.category),
        ("speaker_id", &row.speaker_id),
    ] {
        if value.trim().is_empty() {
            return Err(malformed(format!("empty {name}")));
        }
    }
    if row.item_id.contains(['/', '\\']) || row.item_id == "." || row.item_id == ".." {
        return Err(malformed(format!(
            "item_id `{}` is not usable as a file name",
            row.item_id
        )));
    }
    let take = if row.take.trim().is_empty() {
        0
    } else {
        row.take
            .trim()
            .parse::<u32>()
            .map_err(|_| malformed(format!("take `{}` is not a non-negative integer", row.take)))?
    };
    let parse_time = |name: &str, value: &str| -> Result<Option<f64>> {
        let value = value.trim();
        if value.is_empty() {
            return Ok(None);
        }
        value
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(Some)
            .ok_or_else(|| malformed(format!("{name} `{value}` is not a number")))
    };
    let span = match (parse_time("start_s", &row.start_s)?, parse_time("end_s", &row.end_s)?) {
        (None, None) => None,
        (Some(start), Some(end)) => Some(Span::new(start, end).ok_or_else(|| {
            malformed(format!(
                "timestamps must satisfy 0 <= start < end, got [{start}, {end})"
            ))
        })?),
        _ => return Err(malformed("start_s and end_s must both be set or both be empty".into())),
    };
    Ok(Item {
        item_id: row.item_id,
        contrast_id: row.contrast_id,
        category: row.category,
        speaker_id: row.speaker_id,
        phonemic_seq: row.phonemic_seq,
        audio_path: row.audio_path,
        span,
        take,
    })
}

/// Parses manifest CSV text against the contrast list.
pub fn parse_manifest(csv_text: &str, contrasts: Vec<Contrast>, meta: DatasetMeta) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::Headers)
        .from_reader(csv_text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| ManifestError::MalformedRow {
            line: 1,
            reason: e.to_string(),
        })?
        .clone();
    if headers.iter().ne(MANIFEST_HEADER.iter().copied()) {
        return Err(ManifestError::BadHeader {
            found: headers.iter().collect::<Vec<_>>().join(","),
        });
    }

    let mut items = Vec::new();
    for (idx, record) in reader.deserialize::<ManifestRow>().enumerate() {
        let line = idx as u64 + 2;
        let row = record.map_err(|e| ManifestError::MalformedRow {
            line: e.position().map_or(line, |p| p.line()),
            reason: e.to_string(),
        })?;
        items.push(parse_row(row, line)?);
    }
    Dataset::new(meta, contrasts, items)
}

pub fn parse_contrasts(json: &str) -> Result<Vec<Contrast>> {
    Ok(serde_json::from_str(json)?)
}

/// Renders items in manifest CSV form (inverse of [`parse_manifest`]).
pub fn write_manifest(items: &[Item]) -> String {
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(MANIFEST_HEADER).expect("in-memory write");
    for item in items {
        let (start, end) = item.span.map_or((String::new(), String::new()), |s| {
            (s.start_s.to_string(), s.end_s.to_string())
        });
        out.write_record([
            item.item_id.as_str(),
            &item.contrast_id,
            &item.category,
            &item.speaker_id,
            &item.phonemic_seq,
            &item.audio_path,
            &start,
            &end,
            &item.take.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(out.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

pub fn write_contrasts(contrasts: &[Contrast]) -> String {
    let mut text = serde_json::to_string_pretty(contrasts).expect("serializable");
    text.push('\n');
    text
}

/// Default sidecar location: `m.csv` -> `m.contrasts.json`.
pub fn default_contrasts_path(manifest: &Path) -> PathBuf {
    manifest.with_extension("contrasts.json")
}

/// Reads a manifest and its contrast sidecar from disk.
pub fn load_dataset(manifest: &Path, contrasts: Option<&Path>) -> Result<Dataset> {
    let read = |path: &Path| {
        std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
            path: path.to_owned(),
            source,
        })
    };
    let sidecar = contrasts
        .map(Path::to_owned)
        .unwrap_or_else(|| default_contrasts_path(manifest));
    let contrasts = parse_contrasts(&read(&sidecar)?)?;
    let language = contrasts.first().map(|c| c.language.clone()).unwrap_or_default();
    let meta = DatasetMeta {
        name: manifest
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        language,
        source: manifest.display().to_string(),
    };
    parse_manifest(&read(manifest)?, contrasts, meta)
}

/// An ABX triplet. A and B come from one speaker with different categories;
/// X comes from another speaker with A's category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triplet {
    pub a: ItemIdx,
    pub b: ItemIdx,
    pub x: ItemIdx,
}

impl Triplet {
    /// Checks the triplet invariants against `dataset`.
    pub fn is_valid(&self, dataset: &Dataset) -> bool {
        let (Some(a), Some(b), Some(x)) = (
            dataset.items.get(self.a),
            dataset.items.get(self.b),
            dataset.items.get(self.x),
        ) else {
            return false;
        };
        a.speaker_id == b.speaker_id
            && a.contrast_id == b.contrast_id
            && a.category != b.category
            && x.speaker_id != a.speaker_id
            && x.contrast_id == a.contrast_id
            && x.category == a.category
    }
}

/// Enumerates every valid triplet.
///
/// Order: contrast_id, speaker of A/B, speaker of X, direction (A in the
/// contrast's first category, then second), then take of A, B and X.
pub fn enumerate_triplets(dataset: &Dataset) -> Vec<Triplet> {
    let mut out = Vec::new();
    for slots in dataset.grid().values() {
        let speakers: BTreeSet<&str> = slots.iter().flat_map(|s| s.keys().copied()).collect();
        for &s_ab in &speakers {
            let (Some(first), Some(second)) = (slots[0].get(s_ab), slots[1].get(s_ab)) else {
                continue;
            };
            for &s_x in speakers.iter().filter(|&&s| s != s_ab) {
                for (a_takes, b_takes, slot) in [(first, second, 0), (second, first, 1)] {
                    let Some(x_takes) = slots[slot].get(s_x) else {
                        continue;
                    };
                    for &a in a_takes {
                        for &b in b_takes {
                            for &x in x_takes {
                                out.push(Triplet { a, b, x });
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageIssue {
    pub contrast_id: String,
    /// Distinct speakers per category, in contrast category order.
    pub speakers_per_category: [usize; 2],
    pub below_min_speakers: bool,
    pub zero_triplets: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub min_speakers: usize,
    pub n_contrasts: usize,
    pub n_items: usize,
    pub n_triplets: usize,
    pub issues: Vec<CoverageIssue>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.issues.is_empty()
    }

    /// Contrast ids with no issue.
    pub fn covered_contrasts(&self, dataset: &Dataset) -> BTreeSet<String> {
        let flagged: BTreeSet<&str> = self.issues.iter().map(|i| i.contrast_id.as_str()).collect();
        dataset
            .contrasts()
            .iter()
            .map(|c| c.contrast_id.clone())
            .filter(|id| !flagged.contains(id.as_str()))
            .collect()
    }
}

/// Smallest speaker count that admits any triplet.
pub const DEFAULT_MIN_SPEAKERS: usize = 2;

/// Flags contrasts where a category has fewer than `min_speakers` distinct
/// speakers, or where no triplet can be formed.
pub fn validate_speaker_coverage(dataset: &Dataset, min_speakers: usize) -> ValidationReport {
    let mut issues = Vec::new();
    let mut n_triplets = 0;
    for (contrast_id, slots) in dataset.grid() {
        let counts = [slots[0].len(), slots[1].len()];
        let mut triplets = 0;
        for (s_ab, a_takes) in &slots[0] {
            let Some(b_takes) = slots[1].get(s_ab) else {
                continue;
            };
            for (slot, own) in [(0, a_takes.len() * b_takes.len()), (1, a_takes.len() * b_takes.len())] {
                triplets += slots[slot]
                    .iter()
                    .filter(|(s_x, _)| *s_x != s_ab)
                    .map(|(_, x_takes)| own * x_takes.len())
                    .sum::<usize>();
            }
        }
        n_triplets += triplets;
        let below = counts.iter().any(|&c| c < min_speakers);
        if below || triplets == 0 {
            issues.push(CoverageIssue {
                contrast_id: contrast_id.to_owned(),
                speakers_per_category: counts,
                below_min_speakers: below,
                zero_triplets: triplets == 0,
            });
        }
    }
    ValidationReport {
        min_speakers,
        n_contrasts: dataset.contrasts().len(),
        n_items: dataset.items().len(),
        n_triplets,
        issues,
    }
}
