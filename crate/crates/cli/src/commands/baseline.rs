use prosabx_core::dsp::{read_wav, Baseline, DspConfig};
use prosabx_core::features::{write_npy, LayerIndex, StoreDtype};
use serde_json::json;

use super::{invalid, load, Summary};
use crate::args::BaselineArgs;
use crate::error::Result;
use crate::output::{create_dir, write_json_report, RunConfig};

pub fn run(args: BaselineArgs) -> Result<Summary> {
    let mut run = RunConfig::new("baseline");
    let dataset = load(&args.dataset, &mut run)?;
    let kind = Baseline::from(args.kind);
    let dtype = StoreDtype::from(args.dtype);
    let cfg = DspConfig {
        window_s: args.window_s,
        hop_s: args.hop_s,
        n_fft: args.n_fft,
        n_mels: args.n_mels,
        n_mfcc: args.n_mfcc,
        fmin_hz: args.fmin_hz,
        fmax_hz: args.fmax_hz,
        log_floor: args.log_floor,
    };
    let audio_root = args.audio_root.clone().unwrap_or_else(|| {
        args.dataset
            .manifest
            .parent()
            .map(|p| p.to_path_buf())
            .unwrap_or_default()
    });
    run.param("kind", kind);
    run.param("dsp", &cfg);
    run.param("clip", args.clip);
    run.param("audio_root", &audio_root);
    run.param("dtype", format!("{dtype:?}").to_lowercase());
    run.layers = vec![0];

    let layer_dir = args.out.join("layer0");
    create_dir(&layer_dir)?;
    let mut sample_rate = None;
    let mut frame_spec = None;
    let mut total_frames = 0usize;
    for item in dataset.items() {
        let path = audio_root.join(&item.audio_path);
        let mut wave = read_wav(&path)?;
        match sample_rate {
            None => sample_rate = Some(wave.sample_rate_hz()),
            Some(sr) if sr != wave.sample_rate_hz() => {
                return Err(invalid(format!(
                    "item `{}`: sample rate {} differs from {sr} Hz used by earlier items (resample first)",
                    item.item_id,
                    wave.sample_rate_hz()
                )));
            }
            Some(_) => {}
        }
        if args.clip {
            if let Some(span) = item.span {
                wave = wave.clip(span.start_s, span.end_s)?;
            }
        }
        let seq = kind
            .compute(&wave, &cfg)
            .map_err(|e| invalid(format!("item `{}`: {e}", item.item_id)))?;
        total_frames += seq.frames();
        frame_spec = Some(seq.frame_spec());
        write_npy(&layer_dir.join(format!("{}.npy", item.item_id)), &seq, dtype)?;
    }
    let frame_spec = frame_spec.ok_or_else(|| invalid("manifest has no items"))?;
    run.frame_spec = Some(frame_spec);
    let model_id = match kind {
        Baseline::Mel => "mel",
        Baseline::Mfcc => "mfcc",
    };
    LayerIndex {
        model_id: model_id.into(),
        stride_s: frame_spec.stride_s,
        offset_s: frame_spec.offset_s,
        layers: vec![0],
    }
    .write(&args.out)?;
    let report = json!({
        "items": dataset.items().len(),
        "frames": total_frames,
        "sample_rate_hz": sample_rate,
    });
    write_json_report(&args.out.join("baseline.json"), &run, &report)?;
    Ok(json!({
        "command": "baseline",
        "kind": model_id,
        "items": dataset.items().len(),
        "frames": total_frames,
        "out": args.out,
    }))
}
