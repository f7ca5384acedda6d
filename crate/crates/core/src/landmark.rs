//! Landmark goal estimation: pixel detections, their odometry-frame goals,
//! the goal lock, and detection-quality metrics.

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{self, BackendError, GatewayClient, Provider, SchemaId, Validated};
use crate::geometry::{ground_to_pixel, pixel_to_ground, CameraModel, Pixel, Point2, Pose2D};
use crate::instruction::PromptSet;
use crate::simulator::{label_matches, Landmark, SensorFrame};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LandmarkError {
    #[error("landmark backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("malformed landmark response: {0}")]
    MalformedResponse(String),
    #[error("length mismatch: {0} predictions, {1} ground-truth entries")]
    LengthMismatch(usize, usize),
    #[error("landmark text is empty")]
    EmptyText,
}

impl From<BackendError> for LandmarkError {
    fn from(e: BackendError) -> Self {
        match e {
            BackendError::Malformed(m) => LandmarkError::MalformedResponse(m.0),
            other => LandmarkError::BackendUnavailable(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelGoal {
    pub x: f64,
    pub y: f64,
    pub timestamp: f64,
}

impl PixelGoal {
    pub fn pixel(&self) -> Pixel {
        Pixel::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdomGoal {
    pub position: Point2,
    /// Placed at a default range along the pixel azimuth because the ray
    /// misses the ground.
    pub bearing_only: bool,
    pub source_timestamp: f64,
}

/// A backend answer and how long it took.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub pixel: Option<PixelGoal>,
    pub latency_s: f64,
}

pub trait LandmarkBackend: Send + Sync {
    fn detect(&self, frame: &SensorFrame, landmark_text: &str, prompts: &PromptSet) -> Result<Detection, LandmarkError>;
}

/// Queries `backend` and checks that any returned pixel is inside the
/// frame.
pub fn detect(
    frame: &SensorFrame,
    landmark_text: &str,
    prompts: &PromptSet,
    backend: &dyn LandmarkBackend,
) -> Result<Detection, LandmarkError> {
    if landmark_text.trim().is_empty() {
        return Err(LandmarkError::EmptyText);
    }
    let d = backend.detect(frame, landmark_text, prompts)?;
    if let Some(p) = d.pixel {
        let inside = p.x >= 0.0 && p.y >= 0.0 && p.x < frame.width as f64 && p.y < frame.height as f64;
        if !inside {
            return Err(LandmarkError::MalformedResponse(format!(
                "pixel ({}, {}) outside the {}x{} image",
                p.x, p.y, frame.width, frame.height
            )));
        }
    }
    Ok(d)
}

/// Detector that projects the true landmark position, with optional
/// Gaussian pixel noise.
#[derive(Debug, Clone)]
pub struct OracleLandmarks {
    pub landmarks: Vec<Landmark>,
    pub camera: CameraModel,
    pub noise_px: f64,
    pub seed: u64,
    pub latency_s: f64,
}

impl OracleLandmarks {
    fn find(&self, text: &str) -> Option<&Landmark> {
        self.landmarks.iter().find(|l| label_matches(&l.text, text))
    }
}

impl LandmarkBackend for OracleLandmarks {
    fn detect(&self, frame: &SensorFrame, landmark_text: &str, _prompts: &PromptSet) -> Result<Detection, LandmarkError> {
        let not_found = Detection {
            pixel: None,
            latency_s: self.latency_s,
        };
        let Some(lm) = self.find(landmark_text) else {
            return Ok(not_found);
        };
        let Ok(px) = ground_to_pixel(&self.camera, &frame.pose, lm.position) else {
            return Ok(not_found);
        };
        let (mut x, mut y) = (px.x, px.y);
        if self.noise_px > 0.0 {
            let tick = (frame.t * 1000.0).round() as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ tick.wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let n = Normal::new(0.0, self.noise_px).expect("positive sigma");
            x += n.sample(&mut rng);
            y += n.sample(&mut rng);
            // keep the answer inside the frame
            x = x.clamp(0.0, self.camera.width as f64 - 1e-6);
            y = y.clamp(0.0, self.camera.height as f64 - 1e-6);
        }
        Ok(Detection {
            pixel: Some(PixelGoal {
                x,
                y,
                timestamp: frame.t,
            }),
            latency_s: self.latency_s,
        })
    }
}

/// Vision-language detector behind an HTTP endpoint.
#[derive(Debug)]
pub struct RemoteLandmarkDetector {
    client: GatewayClient,
}

impl RemoteLandmarkDetector {
    pub fn new(client: GatewayClient) -> Self {
        Self { client }
    }

    pub fn provider(&self) -> &Provider {
        &self.client.endpoint().provider
    }

    /// Queries the detector with an encoded PNG.
    pub fn detect_png(&self, png: &[u8], landmark_text: &str, prompts: &PromptSet, t: f64) -> Result<Detection, LandmarkError> {
        let prompt = prompts.render_frontier(landmark_text);
        let request = gateway::build_request(self.provider(), SchemaId::Landmark, &prompt, Some(png));
        let resp = self.client.call(&request)?;
        let payload = gateway::extract_payload(self.provider(), resp.body).map_err(BackendError::Malformed)?;
        let pixel = match gateway::validate(&payload, SchemaId::Landmark).map_err(BackendError::Malformed)? {
            Validated::Landmark(p) => p,
            _ => unreachable!("landmark schema yields a pixel"),
        };
        Ok(Detection {
            pixel: pixel.map(|p| PixelGoal {
                x: p.x,
                y: p.y,
                timestamp: t,
            }),
            latency_s: resp.latency_s,
        })
    }
}

impl LandmarkBackend for RemoteLandmarkDetector {
    fn detect(&self, frame: &SensorFrame, landmark_text: &str, prompts: &PromptSet) -> Result<Detection, LandmarkError> {
        self.detect_png(&frame.to_png(), landmark_text, prompts, frame.t)
    }
}

/// Converts a pixel detection into an odometry-frame goal, seen from the
/// pose the image was captured at.
pub fn pixel_goal_to_odom(px: &PixelGoal, cam: &CameraModel, robot: &Pose2D, default_range: f64) -> OdomGoal {
    match pixel_to_ground(cam, robot, px.pixel()) {
        Ok(position) => OdomGoal {
            position,
            bearing_only: false,
            source_timestamp: px.timestamp,
        },
        Err(_) => {
            let az = robot.heading + cam.pixel_azimuth(px.pixel());
            OdomGoal {
                position: robot.position() + Point2::new(az.cos(), az.sin()) * default_range,
                bearing_only: true,
                source_timestamp: px.timestamp,
            }
        }
    }
}

/// The committed goal and progress through the landmark sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalLock {
    pub current: Option<OdomGoal>,
    pub landmark_index: usize,
    pub n_landmarks: usize,
    pub reached_threshold: f64,
}

impl GoalLock {
    pub fn new(n_landmarks: usize, reached_threshold: f64) -> Self {
        Self {
            current: None,
            landmark_index: 0,
            n_landmarks,
            reached_threshold,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.landmark_index >= self.n_landmarks
    }
}

/// Applies a detection (if any) and advances to the next landmark when
/// the robot is within the reached threshold of the locked goal.
pub fn update_goal_lock(lock: &GoalLock, detection: Option<OdomGoal>, robot: &Pose2D) -> GoalLock {
    let mut next = lock.clone();
    if next.is_complete() {
        return next;
    }
    if detection.is_some() {
        next.current = detection;
    }
    if let Some(g) = next.current {
        if robot.position().distance(g.position) < next.reached_threshold {
            next.landmark_index += 1;
            next.current = None;
        }
    }
    next
}

/// Mean Euclidean distance between predicted and true pixels.
pub fn eval_pixel_error(predictions: &[PixelGoal], ground_truth: &[Pixel]) -> Result<f64, LandmarkError> {
    if predictions.len() != ground_truth.len() {
        return Err(LandmarkError::LengthMismatch(predictions.len(), ground_truth.len()));
    }
    if predictions.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = predictions.iter().zip(ground_truth).map(|(p, g)| p.pixel().distance(*g)).sum();
    Ok(total / predictions.len() as f64)
}

/// Axis-aligned pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelRect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl PixelRect {
    pub fn contains(&self, p: Pixel) -> bool {
        p.x >= self.x && p.x <= self.x + self.w && p.y >= self.y && p.y <= self.y + self.h
    }
}

/// Per-image single-detection F-score. A prediction inside the region is
/// a true positive; outside it, or with no region, a false positive; no
/// prediction while a region exists is a false negative.
pub fn eval_fscore(predictions: &[Option<PixelGoal>], regions: &[Option<PixelRect>]) -> Result<f64, LandmarkError> {
    if predictions.len() != regions.len() {
        return Err(LandmarkError::LengthMismatch(predictions.len(), regions.len()));
    }
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (p, r) in predictions.iter().zip(regions) {
        match (p, r) {
            (Some(p), Some(r)) if r.contains(p.pixel()) => tp += 1,
            (Some(_), _) => fp += 1,
            (None, Some(_)) => fn_ += 1,
            (None, None) => {}
        }
    }
    let precision = if tp + fp > 0 { tp as f64 / (tp + fp) as f64 } else { 0.0 };
    let recall = if tp + fn_ > 0 { tp as f64 / (tp + fn_) as f64 } else { 0.0 };
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

/// One line of a landmark evaluation dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRecord {
    pub image: PathBuf,
    pub landmark: String,
    /// `[x, y, w, h]` in pixels; absent when the landmark is not visible.
    #[serde(default)]
    pub rect: Option<[f64; 4]>,
}

impl DatasetRecord {
    pub fn region(&self) -> Option<PixelRect> {
        self.rect.map(|[x, y, w, h]| PixelRect { x, y, w, h })
    }
}

/// Mean pixel error (over images with both a prediction and a region,
/// measured to the region center) and F-score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub images: usize,
    pub pixel_error: f64,
    pub fscore: f64,
}

pub fn evaluate_detections(records: &[DatasetRecord], predictions: &[Option<PixelGoal>]) -> Result<DetectionReport, LandmarkError> {
    let regions: Vec<Option<PixelRect>> = records.iter().map(DatasetRecord::region).collect();
    let fscore = eval_fscore(predictions, &regions)?;
    let (preds, truth): (Vec<PixelGoal>, Vec<Pixel>) = predictions
        .iter()
        .zip(&regions)
        .filter_map(|(p, r)| match (p, r) {
            (Some(p), Some(r)) => Some((*p, Pixel::new(r.x + r.w / 2.0, r.y + r.h / 2.0))),
            _ => None,
        })
        .unzip();
    Ok(DetectionReport {
        images: records.len(),
        pixel_error: eval_pixel_error(&preds, &truth)?,
        fscore,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    fn frame(pose: Pose2D, t: f64) -> SensorFrame {
        let cam = CameraModel::default();
        SensorFrame {
            t,
            pose,
            width: cam.width,
            height: cam.height,
            label_image: vec![1; cam.width * cam.height],
            labels: Arc::from(vec!["sky".to_string(), "dirt".to_string()]),
            lidar_points: vec![],
        }
    }

    fn oracle(noise_px: f64) -> OracleLandmarks {
        OracleLandmarks {
            landmarks: vec![Landmark {
                text: "blue building".into(),
                position: Point2::new(4.0, 0.5),
                half_size: 0.5,
            }],
            camera: CameraModel::default(),
            noise_px,
            seed: 42,
            latency_s: 0.0,
        }
    }

    fn gp(x: f64, y: f64) -> PixelGoal {
        PixelGoal { x, y, timestamp: 0.0 }
    }

    #[test]
    fn oracle_detection() {
        let prompts = PromptSet::with_instruction("go");
        let f = frame(Pose2D::default(), 0.0);
        let d = detect(&f, "the blue building", &prompts, &oracle(0.0)).unwrap();
        let px = d.pixel.unwrap();
        let expected = ground_to_pixel(&CameraModel::default(), &Pose2D::default(), Point2::new(4.0, 0.5)).unwrap();
        assert_eq!(px.pixel(), expected);
        // recovers the ground position
        let g = pixel_goal_to_odom(&px, &CameraModel::default(), &Pose2D::default(), 10.0);
        assert!(!g.bearing_only);
        assert!(g.position.distance(Point2::new(4.0, 0.5)) < 1e-6);

        let behind = frame(Pose2D::new(0.0, 0.0, std::f64::consts::PI), 0.0);
        assert_eq!(detect(&behind, "blue building", &prompts, &oracle(0.0)).unwrap().pixel, None);
        assert_eq!(detect(&f, "red door", &prompts, &oracle(0.0)).unwrap().pixel, None);
        assert_eq!(detect(&f, " ", &prompts, &oracle(0.0)), Err(LandmarkError::EmptyText));
    }

    #[test]
    fn oracle_noise_is_pinned() {
        let prompts = PromptSet::with_instruction("go");
        let f = frame(Pose2D::default(), 0.0);
        let a = detect(&f, "blue building", &prompts, &oracle(5.0)).unwrap().pixel.unwrap();
        let b = detect(&f, "blue building", &prompts, &oracle(5.0)).unwrap().pixel.unwrap();
        assert_eq!(a, b);
        let exact = ground_to_pixel(&CameraModel::default(), &Pose2D::default(), Point2::new(4.0, 0.5)).unwrap();
        let off = (a.x - exact.x, a.y - exact.y);
        assert!(off.0 != 0.0 && off.0.abs() < 25.0 && off.1.abs() < 25.0);
        let pinned = PINNED_OFFSET;
        assert_abs_diff_eq!(off.0, pinned.0, epsilon = 1e-9);
        assert_abs_diff_eq!(off.1, pinned.1, epsilon = 1e-9);
    }

    const PINNED_OFFSET: (f64, f64) = (2.389_906_191_755_102_3, 6.670_353_051_159_04);

    #[test]
    fn pixel_goal_conversion() {
        let cam = CameraModel::default();
        let robot = Pose2D::new(1.0, 2.0, 0.5);
        let axis = pixel_goal_to_odom(&gp(cam.cx, cam.cy), &cam, &robot, 10.0);
        assert!(!axis.bearing_only);
        let expected = robot.to_world(cam.axis_ground_point().unwrap());
        assert!(axis.position.distance(expected) < 1e-9);

        let top = pixel_goal_to_odom(&gp(120.0, 0.0), &cam, &robot, 10.0);
        assert!(top.bearing_only);
        assert_abs_diff_eq!(top.position.distance(robot.position()), 10.0, epsilon = 1e-9);
        let az = robot.heading + cam.pixel_azimuth(Pixel::new(120.0, 0.0));
        assert_abs_diff_eq!(robot.position().bearing_to(top.position), az, epsilon = 1e-9);

        let p = gp(37.5, 101.25);
        let g = pixel_goal_to_odom(&p, &cam, &robot, 10.0);
        assert_eq!(g.position, pixel_to_ground(&cam, &robot, p.pixel()).unwrap());
    }

    #[test]
    fn goal_lock_rules() {
        let robot = Pose2D::default();
        let goal = |x: f64| OdomGoal {
            position: Point2::new(x, 0.0),
            bearing_only: false,
            source_timestamp: 0.0,
        };
        let empty = GoalLock::new(2, 0.5);
        let locked = update_goal_lock(&empty, Some(goal(5.0)), &robot);
        assert_eq!(locked.current, Some(goal(5.0)));
        assert_eq!(update_goal_lock(&locked, None, &robot), locked);
        let near = update_goal_lock(&locked, None, &Pose2D::new(4.8, 0.0, 0.0));
        assert_eq!((near.landmark_index, near.current), (1, None));
        let done = update_goal_lock(&GoalLock { landmark_index: 1, ..near.clone() }, Some(goal(0.2)), &robot);
        assert!(done.is_complete());
        assert_eq!(update_goal_lock(&done, Some(goal(3.0)), &robot), done);
    }

    #[test]
    fn pixel_error_examples() {
        assert_eq!(eval_pixel_error(&[gp(1.0, 2.0)], &[Pixel::new(1.0, 2.0)]).unwrap(), 0.0);
        assert_eq!(eval_pixel_error(&[gp(0.0, 0.0)], &[Pixel::new(3.0, 4.0)]).unwrap(), 5.0);
        let preds = [gp(0.0, 0.0), gp(1.0, 1.0), gp(10.0, 0.0), gp(2.0, 2.0)];
        let truth = [Pixel::new(6.0, 8.0), Pixel::new(1.0, 1.0), Pixel::new(10.0, 12.0), Pixel::new(5.0, 6.0)];
        // 10 + 0 + 12 + 5 over 4
        assert_eq!(eval_pixel_error(&preds, &truth).unwrap(), 6.75);
        assert!(eval_pixel_error(&preds, &truth[..2]).is_err());
    }

    #[test]
    fn fscore_examples() {
        let r = Some(PixelRect { x: 0.0, y: 0.0, w: 10.0, h: 10.0 });
        let inside = Some(gp(5.0, 5.0));
        let outside = Some(gp(50.0, 5.0));
        assert_eq!(eval_fscore(&[inside, inside], &[r, r]).unwrap(), 1.0);
        assert_eq!(eval_fscore(&[None, None], &[r, r]).unwrap(), 0.0);
        let f = eval_fscore(&[inside, inside, outside, None], &[r, r, r, r]).unwrap();
        assert_abs_diff_eq!(f, 2.0 / 3.0, epsilon = 1e-12);
        assert!(eval_fscore(&[inside], &[]).is_err());
    }
}
