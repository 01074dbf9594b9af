use prosabx_core::features::{FeatureSource, LayerIndex};
use prosabx_core::manifest::validate_speaker_coverage;
use serde::Serialize;
use serde_json::json;

use super::{load, Summary};
use crate::args::ValidateArgs;
use crate::error::{CliError, Result};
use crate::output::{require_exists, write_json_report, RunConfig};

#[derive(Debug, Serialize)]
struct FeatureProblem {
    layer: u32,
    item_id: String,
    reason: String,
}

pub fn run(args: ValidateArgs) -> Result<Summary> {
    let mut run = RunConfig::new("validate");
    run.min_speakers = Some(args.min_speakers);
    let dataset = load(&args.dataset, &mut run)?;
    let coverage = validate_speaker_coverage(&dataset, args.min_speakers);

    let mut problems = Vec::new();
    if let (Some(root), Some(layers)) = (&args.features, &args.layers) {
        require_exists(root, "feature root")?;
        let spec = LayerIndex::read(root)?
            .map(|i| i.frame_spec())
            .transpose()?
            .unwrap_or_default();
        run.features = Some(root.clone());
        run.layers = layers.0.clone();
        for &layer in &layers.0 {
            let source = FeatureSource::new(root, layer, spec);
            for item in dataset.items() {
                if let Err(e) = source.load(item) {
                    problems.push(FeatureProblem {
                        layer,
                        item_id: item.item_id.clone(),
                        reason: e.to_string(),
                    });
                }
            }
        }
    }

    for issue in &coverage.issues {
        let mut reasons = Vec::new();
        if issue.below_min_speakers {
            reasons.push(format!(
                "speakers per category {:?} below {}",
                issue.speakers_per_category, coverage.min_speakers
            ));
        }
        if issue.zero_triplets {
            reasons.push("zero cross-speaker triplets".to_string());
        }
        eprintln!("contrast `{}`: {}", issue.contrast_id, reasons.join("; "));
    }
    for p in &problems {
        eprintln!("layer {}: {}", p.layer, p.reason);
    }

    if let Some(out) = &args.out {
        run.out = Some(out.clone());
        let report = json!({ "coverage": coverage, "feature_problems": problems });
        write_json_report(&out.join("validation.json"), &run, &report)?;
    }
    let ok = coverage.passed() && problems.is_empty();
    let summary = json!({
        "ok": ok,
        "contrasts": coverage.n_contrasts,
        "items": coverage.n_items,
        "triplets": coverage.n_triplets,
        "flagged_contrasts": coverage.issues.len(),
        "feature_problems": problems.len(),
    });
    if ok {
        Ok(summary)
    } else {
        println!("{summary}");
        Err(CliError::ValidationFailed)
    }
}
