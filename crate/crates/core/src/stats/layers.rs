use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{Result, StatsError};

/// Error rate per layer for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCurve {
    pub model_id: String,
    pub points: Vec<(u32, f64)>,
}

impl LayerCurve {
    /// Checks that layers strictly increase and errors lie in `[0, 1]`.
    pub fn new(model_id: impl Into<String>, points: Vec<(u32, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(StatsError::InvalidCurve("no layers".into()));
        }
        if points.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(StatsError::InvalidCurve("layer indices must strictly increase".into()));
        }
        if let Some((layer, e)) = points.iter().find(|(_, e)| !(0.0..=1.0).contains(e)) {
            return Err(StatsError::InvalidCurve(format!(
                "layer {layer}: error {e} outside [0, 1]"
            )));
        }
        Ok(Self {
            model_id: model_id.into(),
            points,
        })
    }

    pub fn layers(&self) -> impl Iterator<Item = u32> + '_ {
        self.points.iter().map(|p| p.0)
    }

    pub fn errors(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }

    pub fn error_at(&self, layer: u32) -> Option<f64> {
        self.points.iter().find(|p| p.0 == layer).map(|p| p.1)
    }

    pub fn best_error(&self) -> f64 {
        self.error_at(best_layer(self)).expect("best layer is on the curve")
    }
}

/// Layer with the lowest error; ties go to the lowest layer index.
pub fn best_layer(curve: &LayerCurve) -> u32 {
    let mut best = curve.points[0];
    for &p in &curve.points[1..] {
        if p.1 < best.1 {
            best = p;
        }
    }
    best.0
}

/// Extra natural-speech error from picking the layer on the proxy curve.
pub fn regret(natural: &LayerCurve, proxy: &LayerCurve) -> Result<f64> {
    if natural.layers().ne(proxy.layers()) {
        return Err(StatsError::LayerMismatch);
    }
    let chosen = natural.error_at(best_layer(proxy)).expect("same layer sets");
    Ok(chosen - natural.best_error())
}

/// Reads `model_id,layer,error_rate` rows, grouping by model in
/// first-appearance order. Rows may be in any layer order; lines starting
/// with `#` are ignored.
pub fn read_curves_csv(text: &str) -> Result<Vec<LayerCurve>, String> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| e.to_string())?.clone();
    let expected = ["model_id", "layer", "error_rate"];
    if headers.iter().ne(expected) {
        return Err(format!(
            "curve CSV header must be `{}`, found `{}`",
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        ));
    }
    let mut order = Vec::new();
    let mut grouped: BTreeMap<String, BTreeMap<u32, f64>> = BTreeMap::new();
    for (i, row) in reader.deserialize::<(String, u32, f64)>().enumerate() {
        let (model, layer, error) = row.map_err(|e| format!("curve CSV row {}: {e}", i + 2))?;
        if !grouped.contains_key(&model) {
            order.push(model.clone());
        }
        if grouped.entry(model.clone()).or_default().insert(layer, error).is_some() {
            return Err(format!(
                "curve CSV row {}: duplicate layer {layer} for `{model}`",
                i + 2
            ));
        }
    }
    order
        .into_iter()
        .map(|model| {
            let points = grouped.remove(&model).unwrap_or_default().into_iter().collect();
            LayerCurve::new(model.clone(), points).map_err(|e| format!("model `{model}`: {e}"))
        })
        .collect()
}

pub fn write_curves_csv<W: Write>(mut out: W, curves: &[LayerCurve]) -> std::io::Result<()> {
    writeln!(out, "model_id,layer,error_rate")?;
    for curve in curves {
        for (layer, error) in &curve.points {
            writeln!(out, "{},{layer},{error}", curve.model_id)?;
        }
    }
    Ok(())
}
