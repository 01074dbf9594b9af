//! Frame-level feature matrices, `.npy` persistence and time slicing.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use npyz::{DType, Order, WriterBuilder};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manifest::{Item, Span};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: expected a 2-D array, found shape {shape:?}")]
    WrongRank { path: PathBuf, shape: Vec<u64> },
    #[error("{path}: unsupported dtype `{dtype}` (expected <f4, >f4, <f8 or >f8)")]
    UnsupportedDtype { path: PathBuf, dtype: String },
    #[error("{path}: Fortran-ordered arrays are not supported")]
    FortranOrder { path: PathBuf },
    #[error("non-finite value at frame {frame}, dim {dim}")]
    NonFinite { frame: usize, dim: usize },
    #[error("feature matrix must have at least one frame and one dimension, got {frames}x{dim}")]
    Empty { frames: usize, dim: usize },
    #[error("data length {len} does not match {frames}x{dim}")]
    ShapeMismatch { len: usize, frames: usize, dim: usize },
    #[error("invalid slice interval [{start_s}, {end_s})")]
    InvalidInterval { start_s: f64, end_s: f64 },
    #[error("frame stride must be positive and finite, got {0}")]
    InvalidStride(f64),
    #[error("item `{item_id}`: feature file {path} not found")]
    MissingItem { item_id: String, path: PathBuf },
    #[error("item `{item_id}`: {source}")]
    Item {
        item_id: String,
        #[source]
        source: Box<FeatureError>,
    },
}

pub type Result<T, E = FeatureError> = std::result::Result<T, E>;

/// Timing of frame rows: frame `i` is centred at `offset_s + i * stride_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameSpec {
    pub stride_s: f64,
    pub offset_s: f64,
}

impl FrameSpec {
    /// Typical self-supervised speech model stride.
    pub const DEFAULT_STRIDE_S: f64 = 0.02;

    pub fn new(stride_s: f64, offset_s: f64) -> Result<Self> {
        if !(stride_s.is_finite() && stride_s > 0.0) {
            return Err(FeatureError::InvalidStride(stride_s));
        }
        Ok(Self { stride_s, offset_s })
    }

    /// Offset defaults to half a stride.
    pub fn with_stride(stride_s: f64) -> Result<Self> {
        Self::new(stride_s, stride_s / 2.0)
    }

    pub fn center(&self, frame: usize) -> f64 {
        self.offset_s + frame as f64 * self.stride_s
    }
}

impl Default for FrameSpec {
    fn default() -> Self {
        Self {
            stride_s: Self::DEFAULT_STRIDE_S,
            offset_s: Self::DEFAULT_STRIDE_S / 2.0,
        }
    }
}

/// A T×D matrix of finite values, stored row-major in f64.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    data: Vec<f64>,
    frames: usize,
    dim: usize,
    frame_spec: FrameSpec,
}

impl FeatureSequence {
    pub fn new(data: Vec<f64>, frames: usize, dim: usize, frame_spec: FrameSpec) -> Result<Self> {
        if frames == 0 || dim == 0 {
            return Err(FeatureError::Empty { frames, dim });
        }
        if data.len() != frames * dim {
            return Err(FeatureError::ShapeMismatch {
                len: data.len(),
                frames,
                dim,
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite {
                frame: pos / dim,
                dim: pos % dim,
            });
        }
        Ok(Self {
            data,
            frames,
            dim,
            frame_spec,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], frame_spec: FrameSpec) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(FeatureError::ShapeMismatch {
                    len: row.len(),
                    frames: 1,
                    dim,
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(data, rows.len(), dim, frame_spec)
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frame_spec(&self) -> FrameSpec {
        self.frame_spec
    }

    pub fn row(&self, frame: usize) -> &[f64] {
        &self.data[frame * self.dim..(frame + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Selects the rows whose centre lies in `[start_s, end_s)`. Falls back to
    /// the single frame nearest the interval midpoint when no centre does.
    pub fn slice_frames(&self, start_s: f64, end_s: f64) -> Result<FeatureSequence> {
        let (first, last) = self.frame_range(start_s, end_s)?;
        let data = self.data[first * self.dim..last * self.dim].to_vec();
        let spec = FrameSpec {
            stride_s: self.frame_spec.stride_s,
            offset_s: self.frame_spec.center(first),
        };
        Ok(Self {
            data,
            frames: last - first,
            dim: self.dim,
            frame_spec: spec,
        })
    }

    /// Half-open frame index range selected by [`Self::slice_frames`].
    pub fn frame_range(&self, start_s: f64, end_s: f64) -> Result<(usize, usize)> {
        if Span::new(start_s, end_s).is_none() {
            return Err(FeatureError::InvalidInterval { start_s, end_s });
        }
        let spec = self.frame_spec;
        let first = (0..self.frames).find(|&i| spec.center(i) >= start_s);
        let range = first.and_then(|first| {
            let last = (first..self.frames)
                .find(|&i| spec.center(i) >= end_s)
                .unwrap_or(self.frames);
            (last > first).then_some((first, last))
        });
        Ok(range.unwrap_or_else(|| {
            let mid = (start_s + end_s) / 2.0;
            let nearest = (0..self.frames)
                .min_by(|&i, &j| {
                    let di = (spec.center(i) - mid).abs();
                    let dj = (spec.center(j) - mid).abs();
                    di.total_cmp(&dj)
                })
                .expect("at least one frame");
            (nearest, nearest + 1)
        }))
    }
}

/// On-disk element type for [`write_npy`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StoreDtype {
    F32,
    F64,
}

/// Reads a 2-D float32/float64 C-order `.npy` array.
pub fn load_feature_sequence(path: &Path, frame_spec: FrameSpec) -> Result<FeatureSequence> {
    let file = File::open(path).map_err(|source| FeatureError::Io {
        path: path.to_owned(),
        source,
    })?;
    read_npy(BufReader::new(file), path, frame_spec)
}

pub fn read_npy<R: Read>(reader: R, path: &Path, frame_spec: FrameSpec) -> Result<FeatureSequence> {
    let io_err = |source| FeatureError::Io {
        path: path.to_owned(),
        source,
    };
    let npy = npyz::NpyFile::new(reader).map_err(io_err)?;
    let shape = npy.shape().to_vec();
    if shape.len() != 2 {
        return Err(FeatureError::WrongRank {
            path: path.to_owned(),
            shape,
        });
    }
    if npy.order() == Order::Fortran {
        return Err(FeatureError::FortranOrder { path: path.to_owned() });
    }
    let dtype = match npy.dtype() {
        DType::Plain(ts) => ts.to_string(),
        other => format!("{other:?}"),
    };
    let data: Vec<f64> = match dtype.as_str() {
        "<f4" | ">f4" => npy
            .into_vec::<f32>()
            .map_err(io_err)?
            .into_iter()
            .map(f64::from)
            .collect(),
        "<f8" | ">f8" => npy.into_vec::<f64>().map_err(io_err)?,
        _ => {
            return Err(FeatureError::UnsupportedDtype {
                path: path.to_owned(),
                dtype,
            })
        }
    };
    FeatureSequence::new(data, shape[0] as usize, shape[1] as usize, frame_spec)
}

/// Writes a C-order 2-D `.npy` file.
pub fn write_npy(path: &Path, seq: &FeatureSequence, dtype: StoreDtype) -> Result<()> {
    let io_err = |source| FeatureError::Io {
        path: path.to_owned(),
        source,
    };
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io_err)?;
    }
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    encode_npy(&mut out, seq, dtype).map_err(io_err)?;
    out.flush().map_err(io_err)
}

pub fn encode_npy<W: Write>(out: W, seq: &FeatureSequence, dtype: StoreDtype) -> std::io::Result<()> {
    let shape = [seq.frames as u64, seq.dim as u64];
    match dtype {
        StoreDtype::F32 => {
            let mut w = npyz::WriteOptions::<f32>::new()
                .default_dtype()
                .shape(&shape)
                .writer(out)
                .begin_nd()?;
            w.extend(seq.data.iter().map(|&v| v as f32))?;
            w.finish()
        }
        StoreDtype::F64 => {
            let mut w = npyz::WriteOptions::<f64>::new()
                .default_dtype()
                .shape(&shape)
                .writer(out)
                .begin_nd()?;
            w.extend(seq.data.iter().copied())?;
            w.finish()
        }
    }
}

/// Sidecar describing a feature directory (`layers.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerIndex {
    pub model_id: String,
    pub stride_s: f64,
    pub offset_s: f64,
    pub layers: Vec<u32>,
}

impl LayerIndex {
    pub const FILE_NAME: &'static str = "layers.json";

    pub fn frame_spec(&self) -> Result<FrameSpec> {
        FrameSpec::new(self.stride_s, self.offset_s)
    }

    /// Reads `<root>/layers.json` if present.
    pub fn read(root: &Path) -> Result<Option<Self>> {
        let path = root.join(Self::FILE_NAME);
        let text = match std::fs::read_to_string(&path) {
            Ok(text) => text,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(source) => return Err(FeatureError::Io { path, source }),
        };
        serde_json::from_str(&text).map(Some).map_err(|e| FeatureError::Io {
            path,
            source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
        })
    }

    pub fn write(&self, root: &Path) -> Result<()> {
        let path = root.join(Self::FILE_NAME);
        let mut text = serde_json::to_string_pretty(self).expect("serializable");
        text.push('\n');
        std::fs::write(&path, text).map_err(|source| FeatureError::Io { path, source })
    }
}

/// Per-layer feature files under `<root>/layer<L>/<item_id>.npy`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSource {
    pub root: PathBuf,
    pub layer: u32,
    pub frame_spec: FrameSpec,
}

impl FeatureSource {
    pub fn new(root: impl Into<PathBuf>, layer: u32, frame_spec: FrameSpec) -> Self {
        Self {
            root: root.into(),
            layer,
            frame_spec,
        }
    }

    pub fn layer_dir(&self) -> PathBuf {
        self.root.join(format!("layer{}", self.layer))
    }

    pub fn path_for(&self, item_id: &str) -> PathBuf {
        self.layer_dir().join(format!("{item_id}.npy"))
    }

    pub fn load(&self, item: &Item) -> Result<FeatureSequence> {
        let path = self.path_for(&item.item_id);
        if !path.is_file() {
            return Err(FeatureError::MissingItem {
                item_id: item.item_id.clone(),
                path,
            });
        }
        load_feature_sequence(&path, self.frame_spec).map_err(|e| FeatureError::Item {
            item_id: item.item_id.clone(),
            source: Box::new(e),
        })
    }
}
