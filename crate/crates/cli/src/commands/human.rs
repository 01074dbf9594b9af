use prosabx_core::abx::{Averaging, EvaluationReport};
use prosabx_core::stats::human::{human_error, parse_responses, word_level_correlation, HumanConfig};
use serde::Deserialize;
use serde_json::json;

use super::evaluate::LayerReport;
use super::{invalid, load, Summary};
use crate::args::HumanArgs;
use crate::error::Result;
use crate::output::{read_file, require_exists, write_csv_report, write_file, write_json_report, RunConfig};
use crate::svg;

#[derive(Deserialize)]
struct ModelReportFile {
    report: LayerReport,
}

fn read_model_report(path: &std::path::Path) -> Result<EvaluationReport> {
    let text = read_file(path)?;
    let file: ModelReportFile = serde_json::from_str(&text)
        .map_err(|e| invalid(format!("{}: not an evaluate layer report: {e}", path.display())))?;
    Ok(file.report.evaluation)
}

pub fn run(args: HumanArgs) -> Result<Summary> {
    let mut run = RunConfig::new("human");
    let dataset = load(&args.dataset, &mut run)?;
    require_exists(&args.responses, "response file")?;
    let averaging = Averaging {
        speaker_pairs: args.speaker_pairs.into(),
        directions: args.directions.into(),
    };
    let config = HumanConfig {
        catch_threshold: args.catch_threshold,
        exclude_flagged: !args.keep_flagged,
        averaging,
    };
    run.averaging = Some(averaging);
    run.param("responses", &args.responses);
    run.param("catch_threshold", args.catch_threshold);
    run.param("exclude_flagged", config.exclude_flagged);
    if let Some(model) = &args.model_report {
        run.param("model_report", model);
    }

    let responses = parse_responses(&read_file(&args.responses)?)?;
    let report = human_error(&responses, &dataset, &config)?;
    write_json_report(&args.out.join("human.json"), &run, &report)?;
    write_csv_report(&args.out.join("human.csv"), &run, &report.report.to_csv())?;

    let flagged: Vec<&str> = report
        .participants
        .iter()
        .filter(|p| p.flagged)
        .map(|p| p.participant_id.as_str())
        .collect();
    for p in &flagged {
        eprintln!("participant `{p}` exceeds the catch-trial error threshold");
    }
    let mut summary = json!({
        "command": "human",
        "error_rate": report.report.error_rate,
        "participants": report.participants.len(),
        "trials": responses.len(),
        "flagged": flagged,
        "contrasts": report.report.n_contrasts,
    });

    if let Some(path) = &args.model_report {
        let model = read_model_report(path)?;
        let comparison = word_level_correlation(&report.report, &model)?;
        let mut csv = String::from("contrast_id,human_error,model_error\n");
        for (word, h, m) in &comparison.words {
            csv.push_str(&format!("{word},{h},{m}\n"));
        }
        write_csv_report(&args.out.join("word_level.csv"), &run, &csv)?;
        write_json_report(&args.out.join("word_level.json"), &run, &comparison)?;
        if args.svg {
            let chart = svg::scatter("Word-level ABX error", "human error", "model error", &comparison.words);
            write_file(&args.out.join("word_level.svg"), &chart)?;
        }
        summary["word_level_r"] = json!(comparison.correlation.value);
        summary["words"] = json!(comparison.words.len());
    }
    Ok(summary)
}
