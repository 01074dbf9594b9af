use prosabx_core::stats::{
    best_layer, bootstrap_ci, lower_median, partial_correlation, pearson, read_curves_csv, regret, spearman,
    wilcoxon_signed_rank, CorrelationStat, LayerCurve, StatResult,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::{file_name, invalid, Summary};
use crate::args::{CorrelateArgs, StatArg};
use crate::error::Result;
use crate::output::{read_file, write_file, write_json_report, RunConfig};
use crate::svg;

const CI_LEVEL: f64 = 0.95;

/// One row of the summary table (`--stat table`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub label: String,
    pub n_models: usize,
    /// Median over models of the layer-wise Pearson r between the two curves.
    pub pearson_r_median: f64,
    /// Median over models of the regret of choosing layers on the second curves.
    pub regret_median: f64,
    /// Spearman correlation of best-layer errors across models, with CI.
    pub rho_model: StatResult,
}

struct Pair {
    first: LayerCurve,
    second: LayerCurve,
}

fn read_curves(path: &std::path::Path) -> Result<Vec<LayerCurve>> {
    read_curves_csv(&read_file(path)?).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn pair_models(first: Vec<LayerCurve>, mut second: Vec<LayerCurve>) -> Result<Vec<Pair>> {
    let mut pairs = Vec::new();
    for curve in first {
        match second.iter().position(|c| c.model_id == curve.model_id) {
            Some(pos) => pairs.push(Pair {
                first: curve,
                second: second.remove(pos),
            }),
            None => eprintln!("model `{}` only in the first curve file; skipped", curve.model_id),
        }
    }
    for curve in &second {
        eprintln!("model `{}` only in the second curve file; skipped", curve.model_id);
    }
    if pairs.is_empty() {
        return Err(invalid("the two curve files share no model_id"));
    }
    Ok(pairs)
}

fn same_layers(pair: &Pair) -> Result<()> {
    if pair.first.layers().eq(pair.second.layers()) {
        Ok(())
    } else {
        Err(invalid(format!(
            "model `{}`: the two curves cover different layers",
            pair.first.model_id
        )))
    }
}

fn median(values: &[f64]) -> f64 {
    lower_median(values).expect("at least one model")
}

fn per_model(pairs: &[Pair], values: &[f64]) -> Value {
    let map: Map<String, Value> = pairs
        .iter()
        .zip(values)
        .map(|(p, v)| (p.first.model_id.clone(), json!(v)))
        .collect();
    Value::Object(map)
}

fn layerwise_r(pairs: &[Pair]) -> Result<Vec<f64>> {
    pairs
        .iter()
        .map(|p| {
            same_layers(p)?;
            pearson(&p.first.errors(), &p.second.errors())
                .map(|r| r.value)
                .map_err(|e| invalid(format!("model `{}`: {e}", p.first.model_id)))
        })
        .collect()
}

fn regrets(pairs: &[Pair]) -> Result<Vec<f64>> {
    pairs
        .iter()
        .map(|p| regret(&p.first, &p.second).map_err(|e| invalid(format!("model `{}`: {e}", p.first.model_id))))
        .collect()
}

fn best_errors(pairs: &[Pair]) -> (Vec<f64>, Vec<f64>) {
    pairs
        .iter()
        .map(|p| (p.first.best_error(), p.second.best_error()))
        .unzip()
}

fn ci_json(r: &StatResult) -> Value {
    match r.ci {
        Some(ci) => json!([ci.lo, ci.hi]),
        None => Value::Null,
    }
}

fn rho_with_ci(xs: &[f64], ys: &[f64], args: &CorrelateArgs) -> Result<StatResult> {
    let point = spearman(xs, ys)?;
    let ci = bootstrap_ci(xs, ys, CorrelationStat::Spearman, args.resamples, CI_LEVEL, args.seed)?;
    Ok(StatResult {
        value: point.value,
        ci: ci.ci,
        p_value: None,
        n: point.n,
    })
}

pub fn run(args: CorrelateArgs) -> Result<Summary> {
    let mut run = RunConfig::new("correlate");
    let stat_name = format!("{:?}", args.stat).to_lowercase();
    run.param("curves", &args.curves);
    run.param("stat", &stat_name);
    if matches!(args.stat, StatArg::Spearman | StatArg::Cross | StatArg::Table) {
        run.seed = Some(args.seed);
        run.param("resamples", args.resamples);
        run.param("ci_level", CI_LEVEL);
    }
    let pairs = pair_models(read_curves(&args.curves[0])?, read_curves(&args.curves[1])?)?;
    let (name_a, name_b) = (file_name(&args.curves[0]), file_name(&args.curves[1]));

    let (summary, detail) = match args.stat {
        StatArg::Pearson => {
            let rs = layerwise_r(&pairs)?;
            let summary = json!({ "r": median(&rs), "n_models": pairs.len() });
            (summary, json!({ "per_model": per_model(&pairs, &rs) }))
        }
        StatArg::Regret => {
            let rs = regrets(&pairs)?;
            let best: Vec<Value> = pairs
                .iter()
                .map(|p| json!({ "model_id": p.first.model_id, "best_first": best_layer(&p.first), "best_second": best_layer(&p.second) }))
                .collect();
            let summary = json!({ "regret": median(&rs), "n_models": pairs.len() });
            (
                summary,
                json!({ "per_model": per_model(&pairs, &rs), "best_layers": best }),
            )
        }
        StatArg::Spearman => {
            let (xs, ys) = best_errors(&pairs);
            let rho = rho_with_ci(&xs, &ys, &args)?;
            let summary = json!({ "rho": rho.value, "ci": ci_json(&rho), "n_models": rho.n });
            (
                summary,
                json!({ "rho": rho, "best_first": per_model(&pairs, &xs), "best_second": per_model(&pairs, &ys) }),
            )
        }
        StatArg::Cross => {
            let (xs, ys) = best_errors(&pairs);
            let r = pearson(&xs, &ys)?;
            let rho = rho_with_ci(&xs, &ys, &args)?;
            let summary = json!({ "r": r.value, "rho": rho.value, "ci": ci_json(&rho), "n_models": r.n });
            (
                summary,
                json!({ "rho": rho, "best_first": per_model(&pairs, &xs), "best_second": per_model(&pairs, &ys) }),
            )
        }
        StatArg::Partial => {
            let (mut xs, mut ys, mut depth) = (Vec::new(), Vec::new(), Vec::new());
            for p in &pairs {
                same_layers(p)?;
                let last = p.first.layers().last().expect("non-empty curve").max(1) as f64;
                xs.extend(p.first.errors());
                ys.extend(p.second.errors());
                depth.extend(p.first.layers().map(|l| l as f64 / last));
            }
            let plain = pearson(&xs, &ys)?;
            let partial = partial_correlation(&xs, &ys, &depth)?;
            let summary = json!({ "r": plain.value, "partial_r": partial.value, "n": plain.n });
            (summary, json!({}))
        }
        StatArg::Wilcoxon => {
            let diffs: Vec<f64> = pairs
                .iter()
                .map(|p| p.first.best_error() - p.second.best_error())
                .collect();
            let test = wilcoxon_signed_rank(&diffs)?;
            let summary = json!({
                "delta_median": median(&diffs),
                "p": test.p_value,
                "w_plus": test.value,
                "n": test.n,
            });
            (summary, json!({ "per_model_delta": per_model(&pairs, &diffs) }))
        }
        StatArg::Table => {
            let rs = layerwise_r(&pairs)?;
            let regs = regrets(&pairs)?;
            let (xs, ys) = best_errors(&pairs);
            let row = TableRow {
                label: args.label.clone().unwrap_or_else(|| format!("{name_a} vs {name_b}")),
                n_models: pairs.len(),
                pearson_r_median: median(&rs),
                regret_median: median(&regs),
                rho_model: rho_with_ci(&xs, &ys, &args)?,
            };
            let summary = json!({
                "label": row.label,
                "r": row.pearson_r_median,
                "regret": row.regret_median,
                "rho": row.rho_model.value,
                "ci": ci_json(&row.rho_model),
                "n_models": row.n_models,
            });
            (summary, serde_json::to_value(&row).expect("serializable"))
        }
    };

    if let Some(out) = &args.out {
        let body = if args.stat == StatArg::Table {
            detail.clone()
        } else {
            json!({ "stat": stat_name, "summary": summary, "detail": detail })
        };
        write_json_report(out, &run, &body)?;
    }
    if let Some(path) = &args.svg {
        let chart = match args.stat {
            StatArg::Spearman | StatArg::Cross | StatArg::Wilcoxon | StatArg::Table => {
                let (xs, ys) = best_errors(&pairs);
                let points: Vec<(String, f64, f64)> = pairs
                    .iter()
                    .zip(xs.iter().zip(&ys))
                    .map(|(p, (&x, &y))| (p.first.model_id.clone(), x, y))
                    .collect();
                svg::scatter("Best-layer error per model", &name_a, &name_b, &points)
            }
            _ => {
                let mut series = Vec::new();
                for p in &pairs {
                    for (curve, file) in [(&p.first, &name_a), (&p.second, &name_b)] {
                        series.push(svg::Series {
                            name: format!("{} ({file})", curve.model_id),
                            points: curve.points.iter().map(|&(l, e)| (l as f64, e)).collect(),
                        });
                    }
                }
                svg::line_chart("Layer-wise ABX error", "layer", "error rate", &series)
            }
        };
        write_file(path, &chart)?;
    }
    Ok(summary)
}
