use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use prosabx_core::abx::{ContextMode, Directions, SpeakerPairs};
use prosabx_core::dsp::Baseline;
use prosabx_core::features::StoreDtype;
use prosabx_core::Metric;

#[derive(Debug, Parser)]
#[command(
    name = "prosabx",
    version,
    about = "Prosodic ABX evaluation of speech representations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a manifest, its speaker coverage and (optionally) feature files.
    Validate(ValidateArgs),
    /// Compute mel spectrogram or MFCC features from WAV audio.
    Baseline(BaselineArgs),
    /// Run the ABX evaluation for each requested layer.
    Evaluate(EvaluateArgs),
    /// Export per-frame local DTW distances for one triplet.
    Trace(TraceArgs),
    /// Compare two sets of layer curves.
    Correlate(CorrelateArgs),
    /// Summarize human ABX responses and compare them with a model report.
    Human(HumanArgs),
    /// Merge `correlate --stat table` outputs into one table.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DatasetArgs {
    /// Manifest CSV.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Contrast list JSON (default: `<manifest stem>.contrasts.json`).
    #[arg(long)]
    pub contrasts: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct FeatureArgs {
    /// Feature root holding `layer<L>/<item_id>.npy`.
    #[arg(long)]
    pub features: PathBuf,
    /// Seconds per frame; read from `layers.json` when omitted.
    #[arg(long)]
    pub stride_s: Option<f64>,
    /// Seconds from waveform start to the center of frame 0 (default: half the stride).
    #[arg(long)]
    pub offset_s: Option<f64>,
}

/// Sorted, de-duplicated layer indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerList(pub Vec<u32>);

/// Accepts `7`, `0..12` (inclusive), `0..=12` and comma-separated mixes.
pub fn parse_layers(text: &str) -> Result<LayerList, String> {
    let mut layers = Vec::new();
    for part in text.split(',').map(str::trim) {
        let num = |s: &str| {
            s.trim()
                .parse::<u32>()
                .map_err(|_| format!("`{s}` is not a layer index"))
        };
        if let Some((lo, hi)) = part.split_once("..") {
            let hi = hi.strip_prefix('=').unwrap_or(hi);
            let (lo, hi) = (num(lo)?, num(hi)?);
            if lo > hi {
                return Err(format!("empty layer range `{part}`"));
            }
            layers.extend(lo..=hi);
        } else {
            layers.push(num(part)?);
        }
    }
    layers.sort_unstable();
    layers.dedup();
    Ok(LayerList(layers))
}

fn positive(text: &str) -> Result<usize, String> {
    match text.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err(format!("`{text}` is not a positive integer")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PairsArg {
    Ordered,
    Unordered,
}

impl From<PairsArg> for SpeakerPairs {
    fn from(value: PairsArg) -> Self {
        match value {
            PairsArg::Ordered => SpeakerPairs::Ordered,
            PairsArg::Unordered => SpeakerPairs::Unordered,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionsArg {
    Separate,
    Pooled,
}

impl From<DirectionsArg> for Directions {
    fn from(value: DirectionsArg) -> Self {
        match value {
            DirectionsArg::Separate => Directions::Separate,
            DirectionsArg::Pooled => Directions::Pooled,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineArg {
    Mel,
    Mfcc,
}

impl From<BaselineArg> for Baseline {
    fn from(value: BaselineArg) -> Self {
        match value {
            BaselineArg::Mel => Baseline::Mel,
            BaselineArg::Mfcc => Baseline::Mfcc,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DtypeArg {
    F32,
    F64,
}

impl From<DtypeArg> for StoreDtype {
    fn from(value: DtypeArg) -> Self {
        match value {
            DtypeArg::F32 => StoreDtype::F32,
            DtypeArg::F64 => StoreDtype::F64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StatArg {
    /// Layer-wise Pearson r between the two curves of each model.
    Pearson,
    /// Spearman rank correlation of best-layer errors across models, with bootstrap CI.
    Spearman,
    /// Natural-speech regret of choosing the layer on the second (proxy) curves.
    Regret,
    /// Pooled layer-wise correlation, plain and controlling for relative depth.
    Partial,
    /// Signed-rank test on per-model best-error differences (first minus second).
    Wilcoxon,
    /// Pearson and Spearman of best-layer errors across models (e.g. two tasks).
    Cross,
    /// Median Pearson r, median regret and model-rank Spearman with CI.
    Table,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    /// Minimum distinct speakers per category.
    #[arg(long, default_value_t = 2)]
    pub min_speakers: usize,
    /// Also check that every item has a readable feature file.
    #[arg(long, requires = "layers")]
    pub features: Option<PathBuf>,
    #[arg(long, value_parser = parse_layers)]
    pub layers: Option<LayerList>,
    /// Write `validation.json` here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    /// Directory that `audio_path` is relative to (default: the manifest's directory).
    #[arg(long)]
    pub audio_root: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub kind: BaselineArg,
    /// Output feature root; features go to `<out>/layer0/`.
    #[arg(long)]
    pub out: PathBuf,
    /// Cut each waveform to its `start_s`/`end_s` span before analysis.
    #[arg(long)]
    pub clip: bool,
    #[arg(long, value_enum, default_value = "f32")]
    pub dtype: DtypeArg,
    #[arg(long, default_value_t = 0.025)]
    pub window_s: f64,
    #[arg(long, default_value_t = 0.010)]
    pub hop_s: f64,
    #[arg(long)]
    pub n_fft: Option<usize>,
    #[arg(long, default_value_t = 40)]
    pub n_mels: usize,
    #[arg(long, default_value_t = 13)]
    pub n_mfcc: usize,
    #[arg(long, default_value_t = 20.0)]
    pub fmin_hz: f64,
    #[arg(long)]
    pub fmax_hz: Option<f64>,
    #[arg(long, default_value_t = 1e-10)]
    pub log_floor: f64,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    #[command(flatten)]
    pub feature: FeatureArgs,
    /// Layers to evaluate, e.g. `0..12` (inclusive) or `0,6,12`.
    #[arg(long, value_parser = parse_layers)]
    pub layers: LayerList,
    #[arg(long, default_value = "angular", value_parser = clap::value_parser!(Metric))]
    pub metric: Metric,
    /// `out` (pre-clipped features) or `in` (slice full-utterance features).
    #[arg(long, default_value = "out", value_parser = clap::value_parser!(ContextMode))]
    pub context: ContextMode,
    /// Contrasts with fewer speakers per category are dropped.
    #[arg(long, default_value_t = 2)]
    pub min_speakers: usize,
    #[arg(long, value_enum, default_value = "ordered")]
    pub speaker_pairs: PairsArg,
    #[arg(long, value_enum, default_value = "separate")]
    pub directions: DirectionsArg,
    /// Model name for `curve.csv` (default: `model_id` from `layers.json`).
    #[arg(long)]
    pub model_id: Option<String>,
    /// Scoring threads (default: available cores).
    #[arg(long, env = "PROSABX_WORKERS", value_parser = positive)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write `curve.svg`.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    #[command(flatten)]
    pub feature: FeatureArgs,
    #[arg(long)]
    pub layer: u32,
    #[arg(long)]
    pub a: String,
    #[arg(long)]
    pub b: String,
    #[arg(long)]
    pub x: String,
    #[arg(long, default_value = "angular", value_parser = clap::value_parser!(Metric))]
    pub metric: Metric,
    #[arg(long, default_value = "out", value_parser = clap::value_parser!(ContextMode))]
    pub context: ContextMode,
    /// Trace CSV (`x_frame,a_local,b_local`).
    #[arg(long)]
    pub out: PathBuf,
    /// Also write an SVG plot of the difference series.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    /// Two curve CSVs (`model_id,layer,error_rate`): reference first, comparison second.
    #[arg(long, num_args = 2, value_names = ["FIRST", "SECOND"])]
    pub curves: Vec<PathBuf>,
    #[arg(long, value_enum)]
    pub stat: StatArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = prosabx_core::stats::DEFAULT_RESAMPLES, value_parser = positive)]
    pub resamples: usize,
    /// Row label for `--stat table`.
    #[arg(long)]
    pub label: Option<String>,
    /// Write the full result (JSON) here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write an SVG plot.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HumanArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    /// Response JSONL.
    #[arg(long)]
    pub responses: PathBuf,
    /// Participants whose catch-trial error exceeds this are flagged.
    #[arg(long, default_value_t = prosabx_core::stats::human::DEFAULT_CATCH_THRESHOLD)]
    pub catch_threshold: f64,
    /// Keep flagged participants in the error computation.
    #[arg(long)]
    pub keep_flagged: bool,
    #[arg(long, value_enum, default_value = "ordered")]
    pub speaker_pairs: PairsArg,
    #[arg(long, value_enum, default_value = "separate")]
    pub directions: DirectionsArg,
    /// A `layer<L>.json` written by `evaluate`, for word-level comparison.
    #[arg(long)]
    pub model_report: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write a human-vs-model scatter plot.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Files written by `correlate --stat table --out`.
    #[arg(long, num_args = 1.., required = true)]
    pub inputs: Vec<PathBuf>,
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn layer_lists() {
        assert_eq!(parse_layers("0..3").unwrap().0, vec![0, 1, 2, 3]);
        assert_eq!(parse_layers("0..=2").unwrap().0, vec![0, 1, 2]);
        assert_eq!(parse_layers("7").unwrap().0, vec![7]);
        assert_eq!(parse_layers("4, 0..1,4").unwrap().0, vec![0, 1, 4]);
        assert!(parse_layers("3..1").is_err());
        assert!(parse_layers("a").is_err());
        assert!(parse_layers("").is_err());
    }

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
