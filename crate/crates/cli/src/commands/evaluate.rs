use std::collections::BTreeSet;

use prosabx_core::abx::{evaluate, Averaging, EvalConfig, EvaluationReport};
use prosabx_core::features::FeatureSource;
use prosabx_core::manifest::validate_speaker_coverage;
use prosabx_core::stats::{best_layer, write_curves_csv, LayerCurve};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{default_workers, invalid, load, resolve_features, Summary};
use crate::args::EvaluateArgs;
use crate::error::Result;
use crate::output::{create_dir, write_csv_report, write_file, write_json_report, RunConfig};
use crate::svg;

/// Body of `layer<L>.json`.
#[derive(Debug, Serialize, Deserialize)]
pub struct LayerReport {
    /// Contrasts removed before evaluation for insufficient speaker coverage.
    pub dropped_contrasts: Vec<String>,
    pub evaluation: EvaluationReport,
}

pub fn run(args: EvaluateArgs) -> Result<Summary> {
    let mut run = RunConfig::new("evaluate");
    let dataset = load(&args.dataset, &mut run)?;
    let (root, frame_spec, index_model) = resolve_features(&args.feature, &mut run)?;
    let averaging = Averaging {
        speaker_pairs: args.speaker_pairs.into(),
        directions: args.directions.into(),
    };
    let model_id = args.model_id.clone().or(index_model).unwrap_or_else(|| "model".into());
    let workers = args.workers.unwrap_or_else(default_workers);
    run.layers = args.layers.0.clone();
    run.metric = Some(args.metric);
    run.context = Some(args.context);
    run.averaging = Some(averaging);
    run.min_speakers = Some(args.min_speakers);
    run.workers = workers;
    run.out = Some(args.out.clone());
    run.param("model_id", &model_id);

    let coverage = validate_speaker_coverage(&dataset, args.min_speakers);
    let dropped: Vec<String> = coverage.issues.iter().map(|i| i.contrast_id.clone()).collect();
    let dataset = if dropped.is_empty() {
        dataset
    } else {
        eprintln!(
            "dropping {} contrast(s) with fewer than {} speakers per category or no triplets",
            dropped.len(),
            args.min_speakers
        );
        let keep: BTreeSet<String> = coverage.covered_contrasts(&dataset);
        dataset.retain_contrasts(&keep)
    };
    if dataset.contrasts().is_empty() {
        return Err(invalid("no contrast passes the speaker-coverage check"));
    }

    let config = EvalConfig {
        metric: args.metric,
        context: args.context,
        averaging,
        workers,
    };
    create_dir(&args.out)?;
    let mut points = Vec::with_capacity(args.layers.0.len());
    for &layer in &args.layers.0 {
        let source = FeatureSource::new(&root, layer, frame_spec);
        let evaluation = evaluate(&dataset, &source, &config)?;
        write_csv_report(&args.out.join(format!("layer{layer}.csv")), &run, &evaluation.to_csv())?;
        points.push((layer, evaluation.error_rate));
        let report = LayerReport {
            dropped_contrasts: dropped.clone(),
            evaluation,
        };
        write_json_report(&args.out.join(format!("layer{layer}.json")), &run, &report)?;
    }

    let curve = LayerCurve::new(model_id.clone(), points).map_err(|e| invalid(e.to_string()))?;
    let mut csv = Vec::new();
    write_curves_csv(&mut csv, std::slice::from_ref(&curve)).expect("in-memory write");
    write_csv_report(
        &args.out.join("curve.csv"),
        &run,
        &String::from_utf8(csv).expect("utf-8"),
    )?;
    if args.svg {
        let series = svg::Series {
            name: model_id.clone(),
            points: curve.points.iter().map(|&(l, e)| (l as f64, e)).collect(),
        };
        let chart = svg::line_chart(
            &format!("ABX error by layer ({})", args.metric),
            "layer",
            "error rate",
            &[series],
        );
        write_file(&args.out.join("curve.svg"), &chart)?;
    }
    let best = best_layer(&curve);
    Ok(json!({
        "command": "evaluate",
        "model_id": model_id,
        "layers": curve.points.iter().map(|p| p.0).collect::<Vec<_>>(),
        "error_rates": curve.errors(),
        "best_layer": best,
        "best_error": curve.best_error(),
        "dropped_contrasts": dropped.len(),
        "out": args.out,
    }))
}
