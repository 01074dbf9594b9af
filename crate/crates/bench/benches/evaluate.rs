use std::collections::HashMap;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use prosabx_core::abx::{evaluate_with, EvalConfig};
use prosabx_core::fixtures::{by_item, contour_features, grid_dataset, ContourParams, GridSpec};

fn evaluate_grid(c: &mut Criterion) {
    let mut group = c.benchmark_group("evaluate");
    group.sample_size(10);
    let ds = grid_dataset(GridSpec {
        contrasts: 8,
        speakers: 4,
        takes: 2,
    });
    let params = ContourParams {
        dim: 256,
        frames: (20, 40),
        ..ContourParams::default()
    };
    let feats = by_item(&contour_features(&ds, params, 1));
    let ids: HashMap<&str, _> = ds
        .items()
        .iter()
        .map(|i| (i.item_id.as_str(), ds.item_by_id(&i.item_id).unwrap()))
        .collect();
    for workers in [1, 4] {
        let cfg = EvalConfig {
            workers,
            ..EvalConfig::default()
        };
        group.bench_with_input(BenchmarkId::new("workers", workers), &cfg, |bench, cfg| {
            bench.iter(|| evaluate_with(&ds, |item| Ok(feats[&ids[item.item_id.as_str()]].clone()), cfg, None).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, evaluate_grid);
criterion_main!(benches);
