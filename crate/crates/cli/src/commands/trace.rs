use prosabx_core::abx::{abx_score, load_item};
use prosabx_core::dtw::{dtw_align, local_trace};
use prosabx_core::features::FeatureSource;
use prosabx_core::manifest::Triplet;
use serde_json::json;

use super::{invalid, load, resolve_features, Summary};
use crate::args::TraceArgs;
use crate::error::{CliError, Result};
use crate::output::{write_csv_report, write_file, RunConfig};
use crate::svg;

pub fn run(args: TraceArgs) -> Result<Summary> {
    let mut run = RunConfig::new("trace");
    let dataset = load(&args.dataset, &mut run)?;
    let (root, frame_spec, _) = resolve_features(&args.feature, &mut run)?;
    run.layers = vec![args.layer];
    run.metric = Some(args.metric);
    run.context = Some(args.context);
    run.param("triplet", json!({ "a": args.a, "b": args.b, "x": args.x }));

    let idx = |id: &str| {
        dataset
            .item_by_id(id)
            .ok_or_else(|| invalid(format!("unknown item `{id}`")))
    };
    let triplet = Triplet {
        a: idx(&args.a)?,
        b: idx(&args.b)?,
        x: idx(&args.x)?,
    };
    if !triplet.is_valid(&dataset) {
        return Err(invalid(format!(
            "({}, {}, {}) is not a valid triplet: A and B need the same speaker and contrast with different categories, X another speaker with A's category",
            args.a, args.b, args.x
        )));
    }
    let source = FeatureSource::new(&root, args.layer, frame_spec);
    let features = |i| load_item(&source, dataset.item(i), args.context);
    let (ra, rb, rx) = (features(triplet.a)?, features(triplet.b)?, features(triplet.x)?);
    let ax = dtw_align(&ra, &rx, args.metric).map_err(CliError::Dtw)?;
    let bx = dtw_align(&rb, &rx, args.metric).map_err(CliError::Dtw)?;
    let trace = local_trace(&ax, &bx)?;

    let mut csv = Vec::new();
    trace.write_csv(&mut csv).expect("in-memory write");
    write_csv_report(&args.out, &run, &String::from_utf8(csv).expect("utf-8"))?;
    let difference = trace.difference();
    if let Some(path) = &args.svg {
        let series = |name: &str, values: &[f64]| svg::Series {
            name: name.into(),
            points: values.iter().enumerate().map(|(j, &v)| (j as f64, v)).collect(),
        };
        let chart = svg::line_chart(
            &format!("Local DTW distance along X ({})", args.x),
            "X frame",
            "local distance",
            &[
                series("A to X", &trace.a_local),
                series("B to X", &trace.b_local),
                series("B - A", &difference),
            ],
        );
        write_file(path, &chart)?;
    }
    let peak = difference
        .iter()
        .enumerate()
        .max_by(|p, q| p.1.total_cmp(q.1))
        .map(|(j, _)| j);
    Ok(json!({
        "command": "trace",
        "d_ax": ax.d,
        "d_bx": bx.d,
        "score": abx_score(ax.d, bx.d),
        "x_frames": rx.frames(),
        "peak_x_frame": peak,
        "out": args.out,
    }))
}
