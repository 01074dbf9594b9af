//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

mod common;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{prosabx, s, stderr};
use prosabx_core::abx::{
    abx_score, aggregate_entries, evaluate, score_triplet, Averaging, ContextMode, EvalConfig, ReportConfig,
};
use prosabx_core::dsp::{dct_ii, mel_spectrogram, mfcc, DspConfig, MelFilterbank, Waveform};
use prosabx_core::dtw::{dtw_align, Metric};
use prosabx_core::features::{FeatureSequence, FeatureSource, FrameSpec, LayerIndex};
use prosabx_core::fixtures::{
    contour_features, embed_in_context, grid_dataset, noise_features, quantize_f32, write_corpus, ContourParams,
    GridSpec,
};
use prosabx_core::manifest::{enumerate_triplets, Contrast, Dataset, DatasetMeta, Item, Triplet};
use prosabx_core::stats::{
    bootstrap_ci, partial_correlation, pearson, regret, spearman, wilcoxon_signed_rank, CorrelationStat, LayerCurve,
};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn random_seq(rng: &mut ChaCha8Rng, max_frames: usize, dim: usize) -> FeatureSequence {
    let frames = rng.random_range(1..=max_frames);
    let data = (0..frames * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    FeatureSequence::new(data, frames, dim, FrameSpec::default()).unwrap()
}

/// Minimum over every monotone path with unit steps, costs summed from (0, 0).
fn exhaustive_dtw(a: &FeatureSequence, b: &FeatureSequence, metric: Metric) -> f64 {
    fn walk(a: &FeatureSequence, b: &FeatureSequence, m: Metric, i: usize, j: usize, acc: f64) -> f64 {
        let acc = if i == 0 && j == 0 {
            m.distance(a.row(0), b.row(0))
        } else {
            acc + m.distance(a.row(i), b.row(j))
        };
        let (last_i, last_j) = (i + 1 == a.frames(), j + 1 == b.frames());
        if last_i && last_j {
            return acc;
        }
        let mut best = f64::INFINITY;
        if !last_i && !last_j {
            best = best.min(walk(a, b, m, i + 1, j + 1, acc));
        }
        if !last_i {
            best = best.min(walk(a, b, m, i + 1, j, acc));
        }
        if !last_j {
            best = best.min(walk(a, b, m, i, j + 1, acc));
        }
        best
    }
    walk(a, b, metric, 0, 0, 0.0)
}

fn dtw_oracle() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut compared = 0;
    for _ in 0..500 {
        let dim = rng.random_range(1..=4);
        let a = random_seq(&mut rng, 6, dim);
        let b = random_seq(&mut rng, 6, dim);
        for metric in Metric::ALL {
            let got = dtw_align(&a, &b, metric).unwrap().d_raw;
            let want = exhaustive_dtw(&a, &b, metric);
            ensure!(got == want, "{metric}: dp {got} vs exhaustive {want}");
            compared += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!("{compared} alignments exact in {elapsed:.2?}"))
}

fn score_branches() -> Check {
    let spec = FrameSpec::default();
    let t = Triplet { a: 0, b: 1, x: 2 };
    let x = FeatureSequence::from_rows(&[[1.0, 0.0], [0.8, 0.6]], spec).unwrap();
    let near = FeatureSequence::from_rows(&[[0.9, 0.1], [0.7, 0.7]], spec).unwrap();
    let far = FeatureSequence::from_rows(&[[-1.0, 0.2], [0.0, -1.0]], spec).unwrap();
    for metric in Metric::ALL {
        let closer_a = score_triplet(t, &near, &far, &x, metric).unwrap();
        ensure!(
            closer_a.d_ax < closer_a.d_bx && closer_a.score == 1.0,
            "{metric}: A closer scored {closer_a:?}"
        );
        let closer_b = score_triplet(t, &far, &near, &x, metric).unwrap();
        ensure!(
            closer_b.d_ax > closer_b.d_bx && closer_b.score == 0.0,
            "{metric}: B closer scored {closer_b:?}"
        );
        // A and B are different sequences at exactly the same distance from X
        let mirrored = FeatureSequence::from_rows(&[[0.9, -0.1], [0.7, 0.7]], spec).unwrap();
        let x_axis = FeatureSequence::from_rows(&[[1.0, 0.0], [0.7, 0.7]], spec).unwrap();
        let tie = score_triplet(t, &near, &mirrored, &x_axis, metric).unwrap();
        ensure!(tie.d_ax == tie.d_bx && tie.score == 0.5, "{metric}: tie scored {tie:?}");
    }
    ensure!(
        abx_score(0.1, 0.2) == 1.0 && abx_score(0.2, 0.2) == 0.5 && abx_score(0.3, 0.2) == 0.0,
        "abx_score"
    );
    Ok("1 / 0.5 / 0 branches for every metric".into())
}

fn dilation() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for n in 0..100 {
        let dim = rng.random_range(1..=6);
        let a = random_seq(&mut rng, 20, dim);
        let mut rows = Vec::new();
        for row in a.rows() {
            for _ in 0..rng.random_range(1..=3) {
                rows.push(row.to_vec());
            }
        }
        let dup = FeatureSequence::from_rows(&rows, FrameSpec::default()).unwrap();
        for metric in Metric::ALL {
            let same = dtw_align(&a, &a, metric).unwrap();
            ensure!(same.d == 0.0, "sequence {n} {metric}: d(a, a) = {}", same.d);
            let dilated = dtw_align(&a, &dup, metric).unwrap();
            ensure!(dilated.d == 0.0, "sequence {n} {metric}: d(a, dup(a)) = {}", dilated.d);
        }
    }
    Ok("100 sequences, all metrics".into())
}

/// Contrast `id` with `speakers` speakers and `takes` takes per category.
fn block(id: &str, speakers: usize, takes: u32, items: &mut Vec<Item>) -> Contrast {
    for sp in 0..speakers {
        for cat in ["c1", "c2"] {
            for take in 0..takes {
                items.push(Item {
                    item_id: format!("{id}-{cat}-s{sp}-{take}"),
                    contrast_id: id.into(),
                    category: cat.into(),
                    speaker_id: format!("s{sp}"),
                    phonemic_seq: id.into(),
                    audio_path: format!("{id}-{cat}-s{sp}-{take}.wav"),
                    span: None,
                    take,
                });
            }
        }
    }
    Contrast {
        contrast_id: id.into(),
        phonemic_seq: id.into(),
        categories: ["c1".into(), "c2".into()],
        language: "test".into(),
    }
}

/// Direct nested mean: cells keyed by (contrast, speaker A/B, speaker X, category A).
fn brute_force_error(ds: &Dataset, entries: &[(Triplet, f64)]) -> f64 {
    let mut cells: BTreeMap<(String, String, String, String), Vec<f64>> = BTreeMap::new();
    for (t, score) in entries {
        let (a, x) = (ds.item(t.a), ds.item(t.x));
        cells
            .entry((
                a.contrast_id.clone(),
                a.speaker_id.clone(),
                x.speaker_id.clone(),
                a.category.clone(),
            ))
            .or_default()
            .push(*score);
    }
    let mut per_contrast: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for ((contrast, ..), scores) in cells {
        per_contrast
            .entry(contrast)
            .or_default()
            .push(scores.iter().sum::<f64>() / scores.len() as f64);
    }
    let means: Vec<f64> = per_contrast
        .values()
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    1.0 - means.iter().sum::<f64>() / means.len() as f64
}

fn nested_averaging() -> Check {
    let mut items = Vec::new();
    // "a": 3 speakers x 1 take = 12 triplets; "b": 2 speakers x 2 takes = 32 triplets
    let contrasts = vec![block("a", 3, 1, &mut items), block("b", 2, 2, &mut items)];
    let ds = Dataset::new(DatasetMeta::default(), contrasts, items).unwrap();
    let triplets = enumerate_triplets(&ds);
    let config = ReportConfig {
        metric: None,
        context: None,
        averaging: Averaging::default(),
        layer: None,
    };
    // all of "a" correct; in "b" only triplets whose A/B speaker is s0
    let hand: Vec<(Triplet, f64)> = triplets
        .iter()
        .map(|&t| {
            let a = ds.item(t.a);
            let ok = a.contrast_id == "a" || a.speaker_id == "s0";
            (t, if ok { 1.0 } else { 0.0 })
        })
        .collect();
    let report = aggregate_entries(hand.clone(), &ds, Averaging::default(), config.clone()).unwrap();
    let counts = (
        report.contrast("a").unwrap().n_triplets,
        report.contrast("b").unwrap().n_triplets,
    );
    ensure!(counts == (12, 32), "triplet counts {counts:?}");
    // contrast errors 0 and 0.5; pooling triplets would give 16/44 instead
    ensure!(report.error_rate == 0.25, "hand fixture error {}", report.error_rate);
    ensure!(
        (brute_force_error(&ds, &hand) - 0.25).abs() < 1e-12,
        "brute force disagrees on the hand fixture"
    );

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for round in 0..50 {
        let entries: Vec<(Triplet, f64)> = triplets
            .iter()
            .map(|&t| (t, [0.0, 0.5, 1.0][rng.random_range(0..3)]))
            .collect();
        let report = aggregate_entries(entries.clone(), &ds, Averaging::default(), config.clone()).unwrap();
        let want = brute_force_error(&ds, &entries);
        ensure!(
            (report.error_rate - want).abs() < 1e-12,
            "round {round}: {} vs brute force {want}",
            report.error_rate
        );
    }
    Ok("hand fixture 0.25; 50 random score sets agree to 1e-12".into())
}

fn layer_source(root: &std::path::Path, layer: u32) -> FeatureSource {
    let spec = LayerIndex::read(root).unwrap().unwrap().frame_spec().unwrap();
    FeatureSource::new(root, layer, spec)
}

fn separable_pipeline() -> Check {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let ds = grid_dataset(GridSpec {
        contrasts: 4,
        speakers: 3,
        takes: 2,
    });
    let contours = contour_features(&ds, ContourParams::default(), 11);
    let paths = write_corpus(&dir.path().join("sep"), &ds, &[(0, &contours)]).unwrap();
    let sep = evaluate(&ds, &layer_source(&paths.features, 0), &EvalConfig::default()).unwrap();
    ensure!(sep.error_rate <= 0.02, "separable error {}", sep.error_rate);

    let noisy_ds = grid_dataset(GridSpec {
        contrasts: 10,
        speakers: 4,
        takes: 1,
    });
    let noise = noise_features(&noisy_ds, 6, (10, 20), 5);
    let paths = write_corpus(&dir.path().join("noise"), &noisy_ds, &[(0, &noise)]).unwrap();
    let noisy = evaluate(&noisy_ds, &layer_source(&paths.features, 0), &EvalConfig::default()).unwrap();
    ensure!(noisy.n_triplets >= 200, "only {} noise triplets", noisy.n_triplets);
    ensure!(
        (0.42..=0.58).contains(&noisy.error_rate),
        "noise error {}",
        noisy.error_rate
    );

    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    Ok(format!(
        "separable {:.4} over {} triplets, noise {:.4} over {} triplets, {elapsed:.2?}",
        sep.error_rate, sep.n_triplets, noisy.error_rate, noisy.n_triplets
    ))
}

fn context_modes() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let ds = grid_dataset(GridSpec {
        contrasts: 3,
        speakers: 3,
        takes: 2,
    });
    let clipped = quantize_f32(&contour_features(&ds, ContourParams::default(), 2));
    let (with_spans, full) = embed_in_context(&ds, &clipped, 3);
    let out_paths = write_corpus(&dir.path().join("clipped"), &with_spans, &[(0, &clipped)]).unwrap();
    let in_paths = write_corpus(&dir.path().join("full"), &with_spans, &[(0, &full)]).unwrap();

    let out = evaluate(
        &with_spans,
        &layer_source(&out_paths.features, 0),
        &EvalConfig::default(),
    )
    .unwrap();
    let in_cfg = EvalConfig {
        context: ContextMode::InContext,
        ..EvalConfig::default()
    };
    let mut inside = evaluate(&with_spans, &layer_source(&in_paths.features, 0), &in_cfg).unwrap();
    ensure!(
        inside.config.context == Some(ContextMode::InContext),
        "context not recorded"
    );
    inside.config.context = out.config.context;
    ensure!(inside == out, "reports differ");
    Ok(format!("identical reports over {} triplets", out.n_triplets))
}

/// Two-sided p from all 2^n sign assignments of the mid-ranked magnitudes.
fn sign_flip_p(diffs: &[f64]) -> f64 {
    let nz: Vec<f64> = diffs.iter().copied().filter(|&d| d != 0.0).collect();
    let mags: Vec<f64> = nz.iter().map(|d| d.abs()).collect();
    let ranks: Vec<f64> = mags
        .iter()
        .map(|&m| {
            let less = mags.iter().filter(|&&v| v < m).count() as f64;
            let equal = mags.iter().filter(|&&v| v == m).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect();
    let n = ranks.len();
    let mean = ranks.iter().sum::<f64>() / 2.0;
    let observed: f64 = nz.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let dev = (observed - mean).abs();
    let extreme = (0u64..1 << n)
        .filter(|mask| {
            let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
            (w - mean).abs() >= dev - 1e-9
        })
        .count();
    extreme as f64 / (1u64 << n) as f64
}

fn stats_oracles() -> Check {
    let r = pearson(&[1.0, 2.0, 3.0, 4.0], &[2.0, 1.0, 4.0, 3.0]).unwrap().value;
    ensure!((r - 0.6).abs() < 1e-12, "pearson {r}");
    // mid-ranks [1, 2.5, 2.5, 4] vs [1, 3, 2, 4]: 4.5 / sqrt(4.5 * 5)
    let rho = spearman(&[1.0, 2.0, 2.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap().value;
    ensure!((rho - 3.0 / 10f64.sqrt()).abs() < 1e-12, "spearman {rho}");
    let rho = spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap().value;
    ensure!(rho == -1.0, "reversed spearman {rho}");

    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut fixtures = vec![
        vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
        vec![1.1, -0.5, 2.3, 0.9, 1.7, 1.2, -0.4, 1.5],
        vec![1.0, -1.0, 2.0, -2.0, 3.0, -3.0],
    ];
    for n in 5..=12 {
        for _ in 0..10 {
            // rounding to a coarse grid produces tied magnitudes and zeros
            fixtures.push(
                (0..n)
                    .map(|_| (rng.random_range(-3.0..5.0f64) * 2.0).round() / 2.0)
                    .collect(),
            );
        }
    }
    let mut checked = 0;
    for diffs in &fixtures {
        if diffs.iter().filter(|&&d| d != 0.0).count() < 5 {
            continue;
        }
        let got = wilcoxon_signed_rank(diffs).unwrap().p_value.unwrap();
        let want = sign_flip_p(diffs);
        ensure!((got - want).abs() < 1e-12, "wilcoxon {diffs:?}: {got} vs {want}");
        checked += 1;
    }
    let p6 = wilcoxon_signed_rank(&fixtures[0]).unwrap().p_value.unwrap();
    ensure!(p6 == 0.03125, "all-positive n=6 p {p6}");

    let curve = LayerCurve::new("m", vec![(0, 0.3), (1, 0.2), (2, 0.25)]).unwrap();
    ensure!(regret(&curve, &curve).unwrap() == 0.0, "regret(c, c)");
    let natural = LayerCurve::new("m", vec![(0, 0.10), (1, 0.20)]).unwrap();
    let proxy = LayerCurve::new("m", vec![(0, 0.9), (1, 0.1)]).unwrap();
    let rg = regret(&natural, &proxy).unwrap();
    ensure!((rg - 0.10).abs() < 1e-12, "regret fixture {rg}");

    let xs: Vec<f64> = (0..17).map(|i| i as f64 + rng.random_range(-4.0..4.0)).collect();
    let ys: Vec<f64> = (0..17).map(|i| i as f64 + rng.random_range(-4.0..4.0)).collect();
    let first = bootstrap_ci(&xs, &ys, CorrelationStat::Spearman, 2000, 0.95, 99).unwrap();
    let second = bootstrap_ci(&xs, &ys, CorrelationStat::Spearman, 2000, 0.95, 99).unwrap();
    ensure!(first == second, "bootstrap not deterministic");
    let ci = first.ci.unwrap();
    ensure!(ci.lo <= ci.hi, "bootstrap interval {ci:?}");

    let control: Vec<f64> = (0..40).map(|i| i as f64 / 39.0).collect();
    let xs: Vec<f64> = control.iter().map(|c| c + 0.05 * rng.random_range(-1.7..1.7)).collect();
    let ys: Vec<f64> = control.iter().map(|c| c + 0.05 * rng.random_range(-1.7..1.7)).collect();
    let plain = pearson(&xs, &ys).unwrap().value;
    let partial = partial_correlation(&xs, &ys, &control).unwrap().value;
    ensure!(plain > 0.8 && partial.abs() < 0.3, "plain {plain}, partial {partial}");

    Ok(format!(
        "closed forms, {checked} wilcoxon fixtures, regret, bootstrap, partial ({plain:.3} -> {partial:.3})"
    ))
}

fn worker_determinism() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let (_, paths) = common::two_layer_corpus(
        &dir.path().join("corpus"),
        GridSpec {
            contrasts: 5,
            speakers: 3,
            takes: 2,
        },
    );
    let mut files = Vec::new();
    for workers in ["1", "8"] {
        let out = dir.path().join(format!("w{workers}"));
        let result = prosabx([
            "evaluate",
            "--manifest",
            &s(&paths.manifest),
            "--features",
            &s(&paths.features),
            "--layers",
            "0..1",
            "--workers",
            workers,
            "--out",
            &s(&out),
        ]);
        ensure!(result.status.success(), "workers {workers}: {}", stderr(&result));
        let mut contents = BTreeMap::new();
        for entry in fs::read_dir(&out).unwrap() {
            let path = entry.unwrap().path();
            contents.insert(path.file_name().unwrap().to_owned(), fs::read(&path).unwrap());
        }
        files.push(contents);
    }
    ensure!(files[0].len() == 5, "expected 5 report files, got {}", files[0].len());
    ensure!(files[0] == files[1], "report files differ between 1 and 8 workers");
    Ok(format!("{} files byte-identical", files[0].len()))
}

fn dsp() -> Check {
    const SR: u32 = 16_000;
    let cfg = DspConfig::default();
    let layout = cfg.layout(SR).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in [400, 401, 559, 560, 4_000, 16_000] {
        let w = Waveform::new((0..n).map(|_| rng.random_range(-0.5..0.5)).collect(), SR).unwrap();
        let frames = mel_spectrogram(&w, &cfg).unwrap().frames();
        ensure!(frames == 1 + (n - 400) / 160, "{n} samples gave {frames} frames");
        ensure!(layout.frame_count(n) == frames, "layout disagrees for {n} samples");
    }

    let silence = Waveform::new(vec![0.0; SR as usize], SR).unwrap();
    let mel = mel_spectrogram(&silence, &cfg).unwrap();
    let floor = cfg.log_floor.ln();
    ensure!(mel.as_slice().iter().all(|&v| v == floor), "silence above the floor");

    let tone = Waveform::new(
        (0..SR as usize)
            .map(|i| 0.5 * (2.0 * PI * 1000.0 * i as f64 / SR as f64).sin())
            .collect(),
        SR,
    )
    .unwrap();
    let fb = MelFilterbank::new(cfg.n_mels, layout.n_fft, SR, cfg.fmin_hz, SR as f64 / 2.0);
    let nearest = fb
        .center_frequencies()
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - 1000.0).abs().total_cmp(&(b.1 - 1000.0).abs()))
        .unwrap()
        .0;
    for (t, row) in mel_spectrogram(&tone, &cfg).unwrap().rows().enumerate() {
        let argmax = row.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        ensure!(argmax == nearest, "frame {t}: peak in bin {argmax}, expected {nearest}");
    }

    let full = DspConfig {
        n_mfcc: cfg.n_mels,
        ..cfg.clone()
    };
    let w = Waveform::new((0..8000).map(|_| rng.random_range(-0.5..0.5)).collect(), SR).unwrap();
    let mel = mel_spectrogram(&w, &full).unwrap();
    let cc = mfcc(&w, &full).unwrap();
    let mut worst = 0.0f64;
    for (m, c) in mel.rows().zip(cc.rows()) {
        let n = c.len() as f64;
        for (i, x) in m.iter().enumerate() {
            let back: f64 = c
                .iter()
                .enumerate()
                .map(|(k, v)| {
                    let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
                    scale * v * (PI * k as f64 * (2 * i + 1) as f64 / (2.0 * n)).cos()
                })
                .sum();
            worst = worst.max((back - x).abs());
        }
    }
    ensure!(worst < 1e-9, "DCT round trip error {worst:e}");
    let basis = dct_ii(&[1.0; 8], 8);
    ensure!((basis[0] - 8f64.sqrt()).abs() < 1e-12, "DCT of a constant");
    Ok(format!(
        "frame counts, floor, 1 kHz peak in bin {nearest}, round trip {worst:.1e}"
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("dtw matches exhaustive path enumeration", dtw_oracle),
        ("score branches including exact tie", score_branches),
        ("normalization and time dilation", dilation),
        ("nested averaging", nested_averaging),
        ("separable and noise pipeline", separable_pipeline),
        ("in- vs out-of-context reports", context_modes),
        ("statistics oracles", stats_oracles),
        ("evaluate determinism across workers", worker_determinism),
        ("dsp front end", dsp),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(reason) => {
                failed += 1;
                println!("FAIL  {name}: {reason}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
