//! Synthetic corpora for tests, benches and smoke runs.
//!
//! Everything here is generated from a seed, so the same call always yields
//! the same dataset and feature values.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::features::{write_npy, FeatureError, FeatureSequence, FrameSpec, LayerIndex, StoreDtype};
use crate::manifest::{write_contrasts, write_manifest, Contrast, Dataset, DatasetMeta, Item, ItemIdx, Span};

/// Shape of a complete grid corpus: every speaker records every category of
/// every contrast `takes` times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub contrasts: usize,
    pub speakers: usize,
    pub takes: u32,
}

pub const CATEGORIES: [&str; 2] = ["HL", "LH"];

pub fn grid_dataset(spec: GridSpec) -> Dataset {
    let mut contrasts = Vec::with_capacity(spec.contrasts);
    let mut items = Vec::new();
    for c in 0..spec.contrasts {
        let contrast_id = format!("w{c:03}");
        for s in 0..spec.speakers {
            for category in CATEGORIES {
                for take in 0..spec.takes {
                    items.push(Item {
                        item_id: format!("{contrast_id}_{category}_s{s}_t{take}"),
                        contrast_id: contrast_id.clone(),
                        category: category.into(),
                        speaker_id: format!("s{s}"),
                        phonemic_seq: contrast_id.clone(),
                        audio_path: format!("wav/{contrast_id}_{category}_s{s}_t{take}.wav"),
                        span: None,
                        take,
                    });
                }
            }
        }
        contrasts.push(Contrast {
            contrast_id: contrast_id.clone(),
            phonemic_seq: contrast_id,
            categories: CATEGORIES.map(String::from),
            language: "synthetic".into(),
        });
    }
    let meta = DatasetMeta {
        name: "synthetic-grid".into(),
        language: "synthetic".into(),
        source: "fixtures".into(),
    };
    Dataset::new(meta, contrasts, items).expect("grid corpus is valid")
}

/// Features indexed like [`Dataset::items`].
pub type ItemFeatures = Vec<FeatureSequence>;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourParams {
    pub dim: usize,
    /// Inclusive frame-count range per item.
    pub frames: (usize, usize),
    /// Per-frame i.i.d. noise standard deviation.
    pub noise: f64,
    /// Contour amplitude along the contrast's direction vector.
    pub amplitude: f64,
}

impl Default for ContourParams {
    fn default() -> Self {
        Self {
            dim: 8,
            frames: (18, 30),
            noise: 0.3,
            amplitude: 1.0,
        }
    }
}

/// Class-distinct pitch-like contours: category 0 falls, category 1 rises,
/// both over a shared speaker-dependent baseline and i.i.d. frame noise.
pub fn contour_features(dataset: &Dataset, params: ContourParams, seed: u64) -> ItemFeatures {
    let d = params.dim;
    let mut shared = rng_for(seed, 0);
    let baseline: Vec<f64> = (0..d).map(|_| 1.0 + 0.2 * normal(&mut shared)).collect();
    let mut directions: HashMap<&str, Vec<f64>> = HashMap::new();
    for c in dataset.contrasts() {
        let v: Vec<f64> = (0..d).map(|_| normal(&mut shared)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        directions.insert(&c.contrast_id, v.into_iter().map(|x| x / norm).collect());
    }
    let mut speakers: HashMap<&str, Vec<f64>> = HashMap::new();

    dataset
        .items()
        .iter()
        .enumerate()
        .map(|(idx, item)| {
            let offset = speakers
                .entry(&item.speaker_id)
                .or_insert_with(|| (0..d).map(|_| 0.15 * normal(&mut shared)).collect())
                .clone();
            let mut rng = rng_for(seed, idx as u64 + 1);
            let frames = rng.random_range(params.frames.0..=params.frames.1);
            let dir = &directions[item.contrast_id.as_str()];
            let sign = if dataset
                .contrast(&item.contrast_id)
                .and_then(|c| c.category_index(&item.category))
                == Some(0)
            {
                1.0
            } else {
                -1.0
            };
            let mut data = Vec::with_capacity(frames * d);
            for t in 0..frames {
                let u = t as f64 / (frames - 1).max(1) as f64;
                let contour = sign * params.amplitude * (PI * u).cos();
                for k in 0..d {
                    data.push(baseline[k] + offset[k] + contour * dir[k] + params.noise * normal(&mut rng));
                }
            }
            FeatureSequence::new(data, frames, d, FrameSpec::default()).expect("finite")
        })
        .collect()
}

/// I.i.d. standard normal features with no class information.
pub fn noise_features(dataset: &Dataset, dim: usize, frames: (usize, usize), seed: u64) -> ItemFeatures {
    (0..dataset.items().len())
        .map(|idx| {
            let mut rng = rng_for(seed, idx as u64);
            let t = rng.random_range(frames.0..=frames.1);
            let data = (0..t * dim).map(|_| normal(&mut rng)).collect();
            FeatureSequence::new(data, t, dim, FrameSpec::default()).expect("finite")
        })
        .collect()
}

/// Embeds every clipped item into a longer "utterance" with random
/// context frames on both sides, and records the word span on the item.
/// Slicing each utterance at its span returns the clipped features exactly.
pub fn embed_in_context(dataset: &Dataset, clipped: &ItemFeatures, seed: u64) -> (Dataset, ItemFeatures) {
    let spec = FrameSpec::default();
    let mut items = Vec::with_capacity(clipped.len());
    let mut full = Vec::with_capacity(clipped.len());
    for (idx, (item, word)) in dataset.items().iter().zip(clipped).enumerate() {
        let mut rng = rng_for(seed, idx as u64);
        let before = rng.random_range(3..=12usize);
        let after = rng.random_range(3..=12usize);
        let d = word.dim();
        let mut data = Vec::with_capacity((before + word.frames() + after) * d);
        data.extend((0..before * d).map(|_| normal(&mut rng)));
        data.extend_from_slice(word.as_slice());
        data.extend((0..after * d).map(|_| normal(&mut rng)));
        let frames = before + word.frames() + after;
        full.push(FeatureSequence::new(data, frames, d, spec).expect("finite"));
        let start_s = before as f64 * spec.stride_s;
        let end_s = (before + word.frames()) as f64 * spec.stride_s;
        items.push(Item {
            span: Span::new(start_s, end_s),
            ..item.clone()
        });
    }
    let dataset = Dataset::new(dataset.meta.clone(), dataset.contrasts().to_vec(), items).expect("same shape");
    (dataset, full)
}

/// Locations of a corpus written by [`write_corpus`].
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusPaths {
    pub manifest: PathBuf,
    pub contrasts: PathBuf,
    pub features: PathBuf,
}

/// Writes `manifest.csv`, `manifest.contrasts.json` and
/// `features/layer<L>/<item_id>.npy` (float32) plus `features/layers.json`.
pub fn write_corpus(
    dir: &Path,
    dataset: &Dataset,
    layers: &[(u32, &ItemFeatures)],
) -> Result<CorpusPaths, FeatureError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| FeatureError::Io { path, source }
    };
    let paths = CorpusPaths {
        manifest: dir.join("manifest.csv"),
        contrasts: dir.join("manifest.contrasts.json"),
        features: dir.join("features"),
    };
    std::fs::create_dir_all(&paths.features).map_err(io(&paths.features))?;
    std::fs::write(&paths.manifest, write_manifest(dataset.items())).map_err(io(&paths.manifest))?;
    std::fs::write(&paths.contrasts, write_contrasts(dataset.contrasts())).map_err(io(&paths.contrasts))?;
    for (layer, features) in layers {
        let layer_dir = paths.features.join(format!("layer{layer}"));
        std::fs::create_dir_all(&layer_dir).map_err(io(&layer_dir))?;
        for (item, seq) in dataset.items().iter().zip(features.iter()) {
            write_npy(&layer_dir.join(format!("{}.npy", item.item_id)), seq, StoreDtype::F32)?;
        }
    }
    let spec = FrameSpec::default();
    LayerIndex {
        model_id: "synthetic".into(),
        stride_s: spec.stride_s,
        offset_s: spec.offset_s,
        layers: layers.iter().map(|(l, _)| *l).collect(),
    }
    .write(&paths.features)?;
    Ok(paths)
}

/// Rounds values through `f32` so in-memory features match what
/// [`write_corpus`] stores on disk.
pub fn quantize_f32(features: &ItemFeatures) -> ItemFeatures {
    features
        .iter()
        .map(|seq| {
            let data = seq.as_slice().iter().map(|&v| v as f32 as f64).collect();
            FeatureSequence::new(data, seq.frames(), seq.dim(), seq.frame_spec()).expect("finite")
        })
        .collect()
}

/// Looks up features by item index, for use with [`crate::abx::evaluate_with`].
pub fn by_item(features: &ItemFeatures) -> HashMap<ItemIdx, FeatureSequence> {
    features.iter().cloned().enumerate().collect()
}

const INITIALS: [&str; 21] = [
    "b", "p", "m", "f", "d", "t", "n", "l", "g", "k", "h", "j", "q", "x", "zh", "ch", "sh", "r", "z", "c", "s",
];
const FINALS: [&str; 31] = [
    "a", "o", "e", "ai", "ei", "ao", "ou", "an", "en", "ang", "eng", "ong", "i", "u", "v", "ia", "ie", "iao", "iu",
    "ian", "in", "iang", "ing", "iong", "ua", "uo", "uai", "ui", "uan", "un", "uang",
];

/// Monosyllable tone corpus: `well_covered` pinyin keys recorded by six
/// speakers and `sparse` keys recorded by only two. Every pair of the four
/// tones of a key is one contrast, so a key yields six contrasts.
pub fn tone_corpus(well_covered: usize, sparse: usize) -> (Vec<Contrast>, Vec<Item>) {
    let keys: Vec<String> = INITIALS
        .iter()
        .flat_map(|i| FINALS.iter().map(move |f| format!("{i}{f}")))
        .take(well_covered + sparse)
        .collect();
    assert_eq!(keys.len(), well_covered + sparse, "not enough pinyin keys");
    let mut contrasts = Vec::new();
    let mut items = Vec::new();
    for (k, key) in keys.iter().enumerate() {
        let speakers = if k < well_covered { 6 } else { 2 };
        for t1 in 1..=4 {
            for t2 in t1 + 1..=4 {
                let contrast_id = format!("{key}_{t1}{t2}");
                let categories = [format!("tone{t1}"), format!("tone{t2}")];
                for s in 0..speakers {
                    for category in &categories {
                        items.push(Item {
                            item_id: format!("{contrast_id}_{category}_spk{s}"),
                            contrast_id: contrast_id.clone(),
                            category: category.clone(),
                            speaker_id: format!("spk{s}"),
                            phonemic_seq: key.clone(),
                            audio_path: format!("wav/spk{s}/{key}{}.wav", &category[4..]),
                            span: None,
                            take: 0,
                        });
                    }
                }
                contrasts.push(Contrast {
                    contrast_id,
                    phonemic_seq: key.clone(),
                    categories,
                    language: "zh".into(),
                });
            }
        }
    }
    (contrasts, items)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::enumerate_triplets;

    #[test]
    fn grid_counts() {
        let ds = grid_dataset(GridSpec {
            contrasts: 2,
            speakers: 3,
            takes: 2,
        });
        assert_eq!(ds.items().len(), 2 * 3 * 2 * 2);
        assert_eq!(enumerate_triplets(&ds).len(), 2 * 3 * 2 * 2 * 8);
    }

    #[test]
    fn generators_are_seeded() {
        let ds = grid_dataset(GridSpec {
            contrasts: 2,
            speakers: 2,
            takes: 1,
        });
        let a = contour_features(&ds, ContourParams::default(), 3);
        assert_eq!(a, contour_features(&ds, ContourParams::default(), 3));
        assert_ne!(a, contour_features(&ds, ContourParams::default(), 4));
        assert_eq!(noise_features(&ds, 4, (5, 9), 1), noise_features(&ds, 4, (5, 9), 1));
        for seq in &a {
            assert!((18..=30).contains(&seq.frames()));
        }
    }

    #[test]
    fn context_slices_recover_clips() {
        let ds = grid_dataset(GridSpec {
            contrasts: 1,
            speakers: 2,
            takes: 2,
        });
        let clipped = contour_features(&ds, ContourParams::default(), 9);
        let (with_spans, full) = embed_in_context(&ds, &clipped, 9);
        for ((item, word), utt) in with_spans.items().iter().zip(&clipped).zip(&full) {
            let span = item.span.unwrap();
            assert!(utt.frames() > word.frames());
            let sliced = utt.slice_frames(span.start_s, span.end_s).unwrap();
            assert_eq!(sliced.as_slice(), word.as_slice());
        }
    }

    #[test]
    fn tone_corpus_shape() {
        let (contrasts, items) = tone_corpus(3, 1);
        assert_eq!(contrasts.len(), 4 * 6);
        assert_eq!(items.len(), 3 * 6 * 6 * 2 + 6 * 2 * 2);
    }
}
