use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::costmap::{CostMapError, Raster, SegmentationBackend, SegmentationMap};
use crate::exec::Exec;
use crate::instruction::normalize_text;

use super::{SensorFrame, SKY_LABEL};

/// Whether a world label answers a text query: either normalized string
/// contains the other. The sky never matches.
pub fn label_matches(label: &str, query: &str) -> bool {
    let (l, q) = (normalize_text(label), normalize_text(query));
    if l == SKY_LABEL || l.is_empty() || q.is_empty() {
        return false;
    }
    l.contains(&q) || q.contains(&l)
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.into_iter().map(|v| v / sum).collect()
}

/// Separable Gaussian blur with clamp-to-edge borders.
pub(crate) fn blur(r: &Raster, sigma: f64) -> Raster {
    if sigma <= 0.0 {
        return r.clone();
    }
    let k = gaussian_kernel(sigma);
    let rad = (k.len() / 2) as isize;
    let (w, h) = (r.width as isize, r.height as isize);
    let mut tmp = vec![0.0; r.values.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (t, kv) in k.iter().enumerate() {
                let xx = (x + t as isize - rad).clamp(0, w - 1);
                acc += kv * r.values[(y * w + xx) as usize];
            }
            tmp[(y * w + x) as usize] = acc;
        }
    }
    let mut out = vec![0.0; r.values.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (t, kv) in k.iter().enumerate() {
                let yy = (y + t as isize - rad).clamp(0, h - 1);
                acc += kv * tmp[(yy * w + x) as usize];
            }
            out[(y * w + x) as usize] = acc;
        }
    }
    Raster {
        width: r.width,
        height: r.height,
        values: out,
    }
}

/// Ground-truth likelihood map for `query`: the hard label mask, blurred
/// by `blur_sigma` pixels, plus uniform noise in `[-noise_amp, noise_amp]`,
/// clamped to [0, 1].
#[allow(clippy::too_many_arguments)]
pub fn oracle_segment(
    label_image: &[u16],
    labels: &[String],
    width: usize,
    height: usize,
    query: &str,
    blur_sigma: f64,
    noise_amp: f64,
    seed: u64,
) -> SegmentationMap {
    let hits: Vec<bool> = labels.iter().map(|l| label_matches(l, query)).collect();
    let mask = Raster {
        width,
        height,
        values: label_image
            .iter()
            .map(|&id| if hits[id as usize] { 1.0 } else { 0.0 })
            .collect(),
    };
    let mut r = blur(&mask, blur_sigma);
    if noise_amp > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in &mut r.values {
            *v += rng.random_range(-noise_amp..=noise_amp);
        }
    }
    SegmentationMap {
        label: normalize_text(query),
        raster: r.clamp_unit(),
    }
}

/// Segmentation from the simulator's ground-truth label image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSegmenter {
    pub blur_sigma: f64,
    pub noise_amp: f64,
    pub seed: u64,
    pub exec: Exec,
}

impl OracleSegmenter {
    /// Noise seed for label `k` of the frame captured at `t`.
    fn frame_seed(&self, t: f64, k: usize) -> u64 {
        let tick = (t * 1000.0).round() as u64;
        self.seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(tick.wrapping_mul(1_000_003))
            .wrapping_add(k as u64)
    }
}

impl SegmentationBackend for OracleSegmenter {
    fn segment(&self, frame: &SensorFrame, labels: &[String]) -> Result<Vec<SegmentationMap>, CostMapError> {
        Ok(self.exec.map_range(labels.len(), |k| {
            oracle_segment(
                &frame.label_image,
                &frame.labels,
                frame.width,
                frame.height,
                &labels[k],
                self.blur_sigma,
                self.noise_amp,
                self.frame_seed(frame.t, k),
            )
        }))
    }
}
