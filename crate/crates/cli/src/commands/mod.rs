pub mod baseline;
pub mod correlate;
pub mod evaluate;
pub mod human;
pub mod report;
pub mod trace;
pub mod validate;

use std::path::{Path, PathBuf};

use prosabx_core::features::{FrameSpec, LayerIndex};
use prosabx_core::manifest::{default_contrasts_path, load_dataset, Dataset};
use serde_json::Value;

use crate::args::{DatasetArgs, FeatureArgs};
use crate::error::{CliError, Result};
use crate::output::{require_exists, RunConfig};

/// One-line JSON printed on stdout.
pub type Summary = Value;

pub fn load(args: &DatasetArgs, run: &mut RunConfig) -> Result<Dataset> {
    require_exists(&args.manifest, "manifest")?;
    let contrasts = args
        .contrasts
        .clone()
        .unwrap_or_else(|| default_contrasts_path(&args.manifest));
    require_exists(&contrasts, "contrast list")?;
    run.manifest = Some(args.manifest.clone());
    run.contrasts = Some(contrasts.clone());
    Ok(load_dataset(&args.manifest, Some(&contrasts))?)
}

/// Frame spec from flags, else `layers.json`, else the 20 ms default.
/// Also returns the sidecar's model id when there is one.
pub fn resolve_features(args: &FeatureArgs, run: &mut RunConfig) -> Result<(PathBuf, FrameSpec, Option<String>)> {
    require_exists(&args.features, "feature root")?;
    let index = LayerIndex::read(&args.features)?;
    let from_index = index.as_ref().map(LayerIndex::frame_spec).transpose()?;
    let spec = match (args.stride_s, args.offset_s, from_index) {
        (Some(stride), offset, _) => FrameSpec::new(stride, offset.unwrap_or(stride / 2.0))?,
        (None, Some(offset), Some(spec)) => FrameSpec::new(spec.stride_s, offset)?,
        (None, Some(offset), None) => FrameSpec::new(FrameSpec::default().stride_s, offset)?,
        (None, None, Some(spec)) => spec,
        (None, None, None) => FrameSpec::default(),
    };
    run.features = Some(args.features.clone());
    run.frame_spec = Some(spec);
    Ok((args.features.clone(), spec, index.map(|i| i.model_id)))
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

pub fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn invalid(message: impl Into<String>) -> CliError {
    CliError::Invalid(message.into())
}
