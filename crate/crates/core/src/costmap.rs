//! Behavioral cost maps: per-target segmentation likelihoods weighted by
//! action undesirability and fused by pointwise maximum.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{BackendError, GatewayClient};
use crate::geometry::Pixel;
use crate::instruction::BehaviorRule;
use crate::simulator::SensorFrame;

#[derive(Debug, Error)]
pub enum CostMapError {
    #[error("segmentation backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("no cost maps to fuse")]
    EmptyList,
    #[error("no labels to segment")]
    NoLabels,
    #[error("raster io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad raster file: {0}")]
    Format(String),
}

impl From<BackendError> for CostMapError {
    fn from(e: BackendError) -> Self {
        CostMapError::BackendUnavailable(e.to_string())
    }
}

/// Row-major raster of probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl Raster {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            values,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn clamp_unit(mut self) -> Self {
        for v in &mut self.values {
            // NaN becomes 0
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        self
    }
}

/// Likelihood that each pixel belongs to `label`.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationMap {
    pub label: String,
    pub raster: Raster,
}

/// Image-aligned behavioral cost in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct CostMap {
    pub raster: Raster,
}

impl CostMap {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            raster: Raster::zeros(width, height),
        }
    }

    pub fn width(&self) -> usize {
        self.raster.width
    }

    pub fn height(&self) -> usize {
        self.raster.height
    }
}

/// Which probability scales a segmentation map into a cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMultiplier {
    /// `c = (1 - p) * S`: undesirable actions produce high cost.
    #[default]
    Undesirability,
    /// `c = p * S`, the literal product.
    Desirability,
}

/// Produces one likelihood map per label for a sensor frame.
pub trait SegmentationBackend: Send + Sync {
    fn segment(&self, frame: &SensorFrame, labels: &[String]) -> Result<Vec<SegmentationMap>, CostMapError>;
}

/// Runs `backend` and checks its output: one map per label, in order,
/// sized like the frame and clamped to [0, 1].
pub fn segment(
    frame: &SensorFrame,
    labels: &[String],
    backend: &dyn SegmentationBackend,
) -> Result<Vec<SegmentationMap>, CostMapError> {
    if labels.is_empty() {
        return Err(CostMapError::NoLabels);
    }
    let maps = backend.segment(frame, labels)?;
    if maps.len() != labels.len() {
        return Err(CostMapError::BackendUnavailable(format!(
            "expected {} maps, got {}",
            labels.len(),
            maps.len()
        )));
    }
    let expected = (frame.width, frame.height);
    maps.into_iter()
        .zip(labels)
        .map(|(m, label)| {
            if m.raster.dims() != expected {
                return Err(CostMapError::DimensionMismatch {
                    expected,
                    got: m.raster.dims(),
                });
            }
            Ok(SegmentationMap {
                label: label.clone(),
                raster: m.raster.clamp_unit(),
            })
        })
        .collect()
}

/// Per-target cost `(1 - p) * S`.
pub fn target_cost(s: &SegmentationMap, rule: &BehaviorRule) -> CostMap {
    target_cost_with(s, rule, CostMultiplier::Undesirability)
}

pub fn target_cost_with(s: &SegmentationMap, rule: &BehaviorRule, mult: CostMultiplier) -> CostMap {
    let k = match mult {
        CostMultiplier::Undesirability => rule.undesirability,
        CostMultiplier::Desirability => rule.desirability,
    };
    CostMap {
        raster: Raster {
            width: s.raster.width,
            height: s.raster.height,
            values: s.raster.values.iter().map(|v| k * v).collect(),
        },
    }
}

/// Pointwise maximum.
pub fn fuse(maps: &[CostMap]) -> Result<CostMap, CostMapError> {
    let first = maps.first().ok_or(CostMapError::EmptyList)?;
    let mut out = first.clone();
    for m in &maps[1..] {
        if m.raster.dims() != out.raster.dims() {
            return Err(CostMapError::DimensionMismatch {
                expected: out.raster.dims(),
                got: m.raster.dims(),
            });
        }
        for (o, v) in out.raster.values.iter_mut().zip(&m.raster.values) {
            *o = o.max(*v);
        }
    }
    Ok(out)
}

/// Global maximum; 0 for an empty or all-zero map.
pub fn max_cost(c: &CostMap) -> f64 {
    c.raster.values.iter().fold(0.0, |m, v| m.max(*v))
}

/// Axis-aligned pixel window, `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Roi {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

/// Maximum inside `roi`, clipped to the raster.
pub fn max_cost_in(c: &CostMap, roi: &Roi) -> f64 {
    let (w, h) = c.raster.dims();
    let mut m = 0.0_f64;
    for y in roi.y0.min(h)..roi.y1.min(h) {
        for x in roi.x0.min(w)..roi.x1.min(w) {
            m = m.max(c.raster.get(x, y));
        }
    }
    m
}

/// Bilinear interpolation with stored values at integer coordinates.
/// Coordinates outside `[0, width) x [0, height)` sample as 0.
pub fn sample(c: &CostMap, px: Pixel) -> f64 {
    let (w, h) = c.raster.dims();
    if !(px.x >= 0.0 && px.y >= 0.0 && px.x < w as f64 && px.y < h as f64) {
        return 0.0;
    }
    let x0 = px.x.floor() as usize;
    let y0 = px.y.floor() as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = px.x - x0 as f64;
    let fy = px.y - y0 as f64;
    let r = &c.raster;
    let top = r.get(x0, y0) * (1.0 - fx) + r.get(x1, y0) * fx;
    let bottom = r.get(x0, y1) * (1.0 - fx) + r.get(x1, y1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Writes a binary PGM (P5, maxval 255) with `round(255 * c)`.
pub fn write_pgm<W: Write>(c: &CostMap, mut w: W) -> Result<(), CostMapError> {
    write!(w, "P5\n{} {}\n255\n", c.width(), c.height())?;
    let bytes: Vec<u8> = c
        .raster
        .values
        .iter()
        .map(|v| (255.0 * v.clamp(0.0, 1.0)).round() as u8)
        .collect();
    w.write_all(&bytes)?;
    Ok(())
}

/// Writes width and height as u32 LE followed by f32 LE values.
pub fn write_f32<W: Write>(c: &CostMap, mut w: W) -> Result<(), CostMapError> {
    let dim = |n: usize| u32::try_from(n).map_err(|_| CostMapError::Format("dimension exceeds u32".into()));
    w.write_all(&dim(c.width())?.to_le_bytes())?;
    w.write_all(&dim(c.height())?.to_le_bytes())?;
    for v in &c.raster.values {
        w.write_all(&(*v as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn read_f32<R: Read>(mut r: R) -> Result<CostMap, CostMapError> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    if buf.len() < 8 {
        return Err(CostMapError::Format("missing header".into()));
    }
    let u32_at = |i: usize| u32::from_le_bytes(buf[i..i + 4].try_into().expect("4 bytes")) as usize;
    let (width, height) = (u32_at(0), u32_at(4));
    let body = &buf[8..];
    if body.len() != width * height * 4 {
        return Err(CostMapError::Format(format!(
            "expected {} value bytes, found {}",
            width * height * 4,
            body.len()
        )));
    }
    let values = body
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64)
        .collect();
    Ok(CostMap {
        raster: Raster {
            width,
            height,
            values,
        },
    })
}

/// Open-vocabulary segmenter behind an HTTP endpoint.
///
/// Request: `{"labels": [...], "width", "height", "image_png_base64"}`.
/// Response: `{"maps": [[row-major values], ...]}`, one per label.
#[derive(Debug)]
pub struct RemoteSegmenter {
    client: GatewayClient,
}

impl RemoteSegmenter {
    pub fn new(client: GatewayClient) -> Self {
        Self { client }
    }
}

/// Parses a segmentation response for `labels` at the given size.
pub fn parse_maps(
    body: &serde_json::Value,
    labels: &[String],
    width: usize,
    height: usize,
) -> Result<Vec<SegmentationMap>, CostMapError> {
    let bad = |p: String| CostMapError::BackendUnavailable(format!("malformed response at {p}"));
    let maps = body
        .get("maps")
        .and_then(|m| m.as_array())
        .ok_or_else(|| bad("maps".into()))?;
    if maps.len() != labels.len() {
        return Err(bad("maps".into()));
    }
    maps.iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (m, label))| {
            let arr = m.as_array().ok_or_else(|| bad(format!("maps[{i}]")))?;
            if arr.len() != width * height {
                return Err(CostMapError::DimensionMismatch {
                    expected: (width, height),
                    got: (arr.len(), 1),
                });
            }
            let values = arr
                .iter()
                .enumerate()
                .map(|(j, v)| v.as_f64().ok_or_else(|| bad(format!("maps[{i}][{j}]"))))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(SegmentationMap {
                label: label.clone(),
                raster: Raster {
                    width,
                    height,
                    values,
                }
                .clamp_unit(),
            })
        })
        .collect()
}

impl SegmentationBackend for RemoteSegmenter {
    fn segment(&self, frame: &SensorFrame, labels: &[String]) -> Result<Vec<SegmentationMap>, CostMapError> {
        let png = frame.to_png();
        let request = serde_json::json!({
            "labels": labels,
            "width": frame.width,
            "height": frame.height,
            "image_png_base64": base64_png(&png),
        });
        let resp = self.client.call(&request)?;
        parse_maps(&resp.body, labels, frame.width, frame.height)
    }
}

fn base64_png(png: &[u8]) -> String {
    use base64::Engine as _;
    base64::engine::general_purpose::STANDARD.encode(png)
}
