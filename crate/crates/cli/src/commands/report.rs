use serde::Deserialize;
use serde_json::json;

use super::correlate::TableRow;
use super::{invalid, Summary};
use crate::args::ReportArgs;
use crate::error::Result;
use crate::output::{read_file, write_csv_report, RunConfig};

#[derive(Deserialize)]
struct TableFile {
    report: TableRow,
}

const HEADER: &str = "label,n_models,pearson_r_median,regret_median,rho_model,rho_ci_lo,rho_ci_hi";

fn field(text: &str) -> String {
    if text.contains([',', '"', '\n']) {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text.to_string()
    }
}

pub fn run(args: ReportArgs) -> Result<Summary> {
    let mut run = RunConfig::new("report");
    run.param("inputs", &args.inputs);
    let mut rows = Vec::with_capacity(args.inputs.len());
    for path in &args.inputs {
        let file: TableFile = serde_json::from_str(&read_file(path)?).map_err(|e| {
            invalid(format!(
                "{}: not a `correlate --stat table` output: {e}",
                path.display()
            ))
        })?;
        rows.push(file.report);
    }
    let mut csv = format!("{HEADER}\n");
    for row in &rows {
        let (lo, hi) = row.rho_model.ci.map_or((String::new(), String::new()), |ci| {
            (ci.lo.to_string(), ci.hi.to_string())
        });
        csv.push_str(&format!(
            "{},{},{},{},{},{lo},{hi}\n",
            field(&row.label),
            row.n_models,
            row.pearson_r_median,
            row.regret_median,
            row.rho_model.value
        ));
    }
    write_csv_report(&args.out, &run, &csv)?;
    Ok(json!({ "command": "report", "rows": rows.len(), "out": args.out }))
}
