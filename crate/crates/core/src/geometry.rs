//! Planar frames, pose algebra, egocentric goal parameterization and the
//! pitched pinhole camera that links the ground plane to the image.
//!
//! Conventions: the odometry and robot frames are right-handed with x
//! forward and y left; angles are counter-clockwise and wrapped to
//! (-pi, pi]. The image frame has its origin at the top-left corner with x
//! across columns and y down rows. The world is the z = 0 plane.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Distance below which the line of sight is undefined.
pub const DEGENERATE_RANGE: f64 = 1e-9;

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(angle: f64) -> f64 {
    let r = angle.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Bearing of `other` as seen from `self`.
    pub fn bearing_to(self, other: Point2) -> f64 {
        (other.y - self.y).atan2(other.x - self.x)
    }

    pub fn lerp(self, other: Point2, s: f64) -> Point2 {
        self + (other - self) * s
    }
}

impl From<[f64; 2]> for Point2 {
    fn from(a: [f64; 2]) -> Self {
        Point2::new(a[0], a[1])
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

/// A planar pose in the odometry frame. The heading is kept wrapped.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            x,
            y,
            heading: wrap_angle(heading),
        }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    /// Transform taking robot-frame points into the odometry frame.
    pub fn robot_to_odom(&self) -> FrameTransform {
        FrameTransform::new(Frame::Robot, Frame::Odom, self.heading, Point2::new(self.x, self.y))
    }

    /// Maps a robot-frame point into the odometry frame.
    pub fn to_world(&self, p: Point2) -> Point2 {
        let (s, c) = self.heading.sin_cos();
        Point2::new(self.x + c * p.x - s * p.y, self.y + s * p.x + c * p.y)
    }

    /// Maps an odometry-frame point into this pose's robot frame.
    pub fn to_local(&self, p: Point2) -> Point2 {
        let (s, c) = self.heading.sin_cos();
        let d = Point2::new(p.x - self.x, p.y - self.y);
        Point2::new(c * d.x + s * d.y, -s * d.x + c * d.y)
    }

    /// Exact unicycle arc integration over `dt` at constant `(v, omega)`.
    pub fn advance(&self, v: f64, omega: f64, dt: f64) -> Pose2D {
        let psi = self.heading;
        if omega.abs() < 1e-9 {
            Pose2D::new(
                self.x + v * psi.cos() * dt,
                self.y + v * psi.sin() * dt,
                psi + omega * dt,
            )
        } else {
            let psi1 = psi + omega * dt;
            let k = v / omega;
            Pose2D::new(
                self.x + k * (psi1.sin() - psi.sin()),
                self.y + k * (psi.cos() - psi1.cos()),
                psi1,
            )
        }
    }
}

/// Target pose expressed relative to the line of sight from the robot.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EgocentricGoal {
    /// Distance to the target.
    pub r: f64,
    /// Target heading minus line-of-sight bearing.
    pub theta: f64,
    /// Robot heading minus line-of-sight bearing.
    pub delta: f64,
}

/// Egocentric parameterization of `target` seen from `robot`.
///
/// When the two positions coincide the line of sight is undefined and both
/// angles are reported as zero.
pub fn to_egocentric(robot: &Pose2D, target: &Pose2D) -> EgocentricGoal {
    let r = robot.position().distance(target.position());
    if r < DEGENERATE_RANGE {
        return EgocentricGoal {
            r,
            theta: 0.0,
            delta: 0.0,
        };
    }
    let b = robot.position().bearing_to(target.position());
    EgocentricGoal {
        r,
        theta: wrap_angle(target.heading - b),
        delta: wrap_angle(robot.heading - b),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frame {
    Odom,
    Robot,
    Image,
}

/// Rigid planar transform mapping points from `source` to `target`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameTransform {
    pub source: Frame,
    pub target: Frame,
    pub rotation: f64,
    pub translation: Point2,
}

impl FrameTransform {
    pub fn new(source: Frame, target: Frame, rotation: f64, translation: Point2) -> Self {
        Self {
            source,
            target,
            rotation: wrap_angle(rotation),
            translation,
        }
    }

    pub fn identity(frame: Frame) -> Self {
        Self::new(frame, frame, 0.0, Point2::default())
    }

    pub fn apply(&self, p: Point2) -> Point2 {
        let (s, c) = self.rotation.sin_cos();
        Point2::new(c * p.x - s * p.y, s * p.x + c * p.y) + self.translation
    }

    pub fn apply_pose(&self, pose: &Pose2D) -> Pose2D {
        let p = self.apply(pose.position());
        Pose2D::new(p.x, p.y, pose.heading + self.rotation)
    }

    pub fn inverse(&self) -> FrameTransform {
        let (s, c) = self.rotation.sin_cos();
        let t = self.translation;
        FrameTransform::new(
            self.target,
            self.source,
            -self.rotation,
            Point2::new(-(c * t.x + s * t.y), s * t.x - c * t.y),
        )
    }

    /// `self ∘ inner`: applies `inner` first. Returns `None` when the frames
    /// do not chain.
    pub fn compose(&self, inner: &FrameTransform) -> Option<FrameTransform> {
        if inner.target != self.source {
            return None;
        }
        Some(FrameTransform::new(
            inner.source,
            self.target,
            self.rotation + inner.rotation,
            self.apply(inner.translation),
        ))
    }
}

/// A continuous image-plane coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pixel {
    pub x: f64,
    pub y: f64,
}

impl Pixel {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Pixel) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ProjectionError {
    #[error("point is behind the camera or outside the image")]
    OutOfView,
    #[error("pixel ray does not meet the ground ahead of the camera")]
    AboveHorizon,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid camera model: {0}")]
pub struct InvalidCamera(pub String);

/// Pitched pinhole camera mounted on the robot at a fixed height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    /// Height of the optical center above the ground, meters.
    pub mount_height: f64,
    /// Downward pitch of the optical axis, radians.
    pub mount_pitch: f64,
    /// Forward offset of the optical center along robot x, meters.
    #[serde(default)]
    pub mount_offset: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            fx: 90.0,
            fy: 90.0,
            cx: 80.0,
            cy: 60.0,
            width: 160,
            height: 120,
            mount_height: 0.8,
            mount_pitch: 0.35,
            mount_offset: 0.2,
        }
    }
}

// Minimum depth along the optical axis for a projectable point.
const MIN_DEPTH: f64 = 1e-9;

impl CameraModel {
    pub fn validate(&self) -> Result<(), InvalidCamera> {
        let bad = |m: &str| Err(InvalidCamera(m.to_string()));
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return bad("focal lengths must be positive");
        }
        if self.width == 0 || self.height == 0 {
            return bad("image dimensions must be non-zero");
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64) {
            return bad("cx must lie in [0, width)");
        }
        if !(self.cy >= 0.0 && self.cy < self.height as f64) {
            return bad("cy must lie in [0, height)");
        }
        if !(self.mount_height > 0.0) {
            return bad("mount_height must be positive");
        }
        if !(self.mount_pitch.is_finite() && self.mount_offset.is_finite()) {
            return bad("mount extrinsics must be finite");
        }
        Ok(())
    }

    pub fn contains(&self, px: Pixel) -> bool {
        px.x >= 0.0 && px.x < self.width as f64 && px.y >= 0.0 && px.y < self.height as f64
    }

    /// Camera axes (right, down, forward) expressed in the robot frame, as
    /// 3-vectors.
    fn axes(&self) -> ([f64; 3], [f64; 3], [f64; 3]) {
        let (sp, cp) = self.mount_pitch.sin_cos();
        let right = [0.0, -1.0, 0.0];
        let down = [-sp, 0.0, -cp];
        let forward = [cp, 0.0, -sp];
        (right, down, forward)
    }

    /// Projects a robot-frame ground point onto the (unbounded) image plane.
    /// `None` when the point is not in front of the camera.
    pub fn project_robot_point(&self, p: Point2) -> Option<Pixel> {
        let d = [p.x - self.mount_offset, p.y, -self.mount_height];
        let (right, down, forward) = self.axes();
        let dot = |a: [f64; 3]| a[0] * d[0] + a[1] * d[1] + a[2] * d[2];
        let zc = dot(forward);
        if zc <= MIN_DEPTH {
            return None;
        }
        Some(Pixel::new(
            self.fx * dot(right) / zc + self.cx,
            self.fy * dot(down) / zc + self.cy,
        ))
    }

    /// Back-projects a pixel onto the ground, in the robot frame.
    pub fn pixel_to_robot_ground(&self, px: Pixel) -> Result<Point2, ProjectionError> {
        let dir = self.pixel_ray(px);
        // Ray must descend to meet z = 0 in front of the camera.
        if dir[2] >= -1e-12 {
            return Err(ProjectionError::AboveHorizon);
        }
        let s = self.mount_height / -dir[2];
        Ok(Point2::new(self.mount_offset + s * dir[0], s * dir[1]))
    }

    /// Robot-frame direction of the ray through `px`.
    pub fn pixel_ray(&self, px: Pixel) -> [f64; 3] {
        let xn = (px.x - self.cx) / self.fx;
        let yn = (px.y - self.cy) / self.fy;
        let (right, down, forward) = self.axes();
        [
            xn * right[0] + yn * down[0] + forward[0],
            xn * right[1] + yn * down[1] + forward[1],
            xn * right[2] + yn * down[2] + forward[2],
        ]
    }

    /// Azimuth of the ray through `px`, in the robot frame.
    pub fn pixel_azimuth(&self, px: Pixel) -> f64 {
        let d = self.pixel_ray(px);
        d[1].atan2(d[0])
    }

    /// Ground point (robot frame) where the optical axis meets the ground.
    pub fn axis_ground_point(&self) -> Option<Point2> {
        self.pixel_to_robot_ground(Pixel::new(self.cx, self.cy)).ok()
    }
}

/// Projects an odometry-frame ground point into the image of a camera on
/// a robot at `robot`.
pub fn ground_to_pixel(
    cam: &CameraModel,
    robot: &Pose2D,
    p: Point2,
) -> Result<Pixel, ProjectionError> {
    let px = cam
        .project_robot_point(robot.to_local(p))
        .ok_or(ProjectionError::OutOfView)?;
    if cam.contains(px) {
        Ok(px)
    } else {
        Err(ProjectionError::OutOfView)
    }
}

/// Intersects the ray through `px` with the ground; result in odometry
/// frame.
pub fn pixel_to_ground(
    cam: &CameraModel,
    robot: &Pose2D,
    px: Pixel,
) -> Result<Point2, ProjectionError> {
    cam.pixel_to_robot_ground(px).map(|p| robot.to_world(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn wrap_edges() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert_abs_diff_eq!(wrap_angle(TAU), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(-TAU), 0.0, epsilon = 1e-12);
        for a in [1e6, -1e6, 3.0 * PI, -3.0 * PI, 1e-300, -1e-17] {
            let w = wrap_angle(a);
            assert!(w > -PI && w <= PI, "{a} -> {w}");
            assert_abs_diff_eq!((a - w).rem_euclid(TAU).min(TAU - (a - w).rem_euclid(TAU)), 0.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn egocentric_examples() {
        let o = Pose2D::new(0.0, 0.0, 0.0);
        let e = to_egocentric(&o, &Pose2D::new(1.0, 0.0, 0.0));
        assert_eq!((e.r, e.theta, e.delta), (1.0, 0.0, 0.0));

        let e = to_egocentric(&o, &Pose2D::new(0.0, 1.0, PI / 2.0));
        assert_abs_diff_eq!(e.r, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.theta, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.delta, -PI / 2.0, epsilon = 1e-12);

        // b = atan2(3, 3) = pi/4; r = sqrt(18)
        let e = to_egocentric(&Pose2D::new(2.0, 1.0, 0.3), &Pose2D::new(5.0, 4.0, 1.0));
        assert_abs_diff_eq!(e.r, 4.242640687119285, epsilon = 1e-12);
        assert_abs_diff_eq!(e.theta, 0.21460183660255172, epsilon = 1e-12);
        assert_abs_diff_eq!(e.delta, -0.4853981633974483, epsilon = 1e-12);
    }

    #[test]
    fn egocentric_degenerate() {
        let p = Pose2D::new(1.0, 1.0, 2.0);
        let e = to_egocentric(&p, &Pose2D::new(1.0, 1.0, -1.0));
        assert_eq!((e.r, e.theta, e.delta), (0.0, 0.0, 0.0));
    }

    fn test_cam() -> CameraModel {
        CameraModel {
            fx: 300.0,
            fy: 300.0,
            cx: 320.0,
            cy: 240.0,
            width: 640,
            height: 480,
            mount_height: 0.5,
            mount_pitch: 0.3,
            mount_offset: 0.0,
        }
    }

    #[test]
    fn projection_axis_and_behind() {
        let cam = test_cam();
        let robot = Pose2D::default();
        let axis = cam.axis_ground_point().unwrap();
        // the optical axis meets the ground h / tan(pitch) ahead
        assert_abs_diff_eq!(axis.x, 0.5 / 0.3f64.tan(), epsilon = 1e-12);
        let px = ground_to_pixel(&cam, &robot, axis).unwrap();
        assert!(px.distance(Pixel::new(cam.cx, cam.cy)) < 0.5);
        assert_eq!(
            ground_to_pixel(&cam, &robot, Point2::new(-1.0, 0.0)),
            Err(ProjectionError::OutOfView)
        );
        let g = pixel_to_ground(&cam, &robot, Pixel::new(cam.cx, cam.cy)).unwrap();
        assert_abs_diff_eq!(g.x, axis.x, epsilon = 1e-9);
        assert_abs_diff_eq!(g.y, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn projection_matches_frozen_oracle() {
        // Frozen from a look-at rotation-matrix construction (numpy),
        // independent of the axis algebra used here.
        let px = ground_to_pixel(&test_cam(), &Pose2D::default(), Point2::new(3.0, 0.0)).unwrap();
        assert_abs_diff_eq!(px.x, 320.0, epsilon = 1e-6);
        assert_abs_diff_eq!(px.y, 199.29758073787698, epsilon = 1e-6);

        let robot = Pose2D::new(1.0, -2.0, 0.4);
        let px = ground_to_pixel(&test_cam(), &robot, Point2::new(4.0, 0.5)).unwrap();
        assert_abs_diff_eq!(px.x, 228.45711444161142, epsilon = 1e-6);
        assert_abs_diff_eq!(px.y, 189.43417306483013, epsilon = 1e-6);
    }

    #[test]
    fn top_row_is_above_horizon() {
        let mut cam = test_cam();
        cam.mount_pitch = 0.1;
        assert_eq!(
            pixel_to_ground(&cam, &Pose2D::default(), Pixel::new(100.0, 0.0)),
            Err(ProjectionError::AboveHorizon)
        );
    }

    #[test]
    fn frame_transform_inverse_and_compose() {
        let a = FrameTransform::new(Frame::Robot, Frame::Odom, 0.7, Point2::new(1.0, -3.0));
        let id = a.compose(&a.inverse()).unwrap();
        assert_abs_diff_eq!(id.rotation, 0.0, epsilon = 1e-12);
        assert!(id.translation.norm() < 1e-9);
        assert!(a.compose(&a).is_none());
    }

    #[test]
    fn camera_validation() {
        assert!(CameraModel::default().validate().is_ok());
        let mut c = CameraModel {
            cx: 160.0,
            ..CameraModel::default()
        };
        assert!(c.validate().is_err());
        c = CameraModel::default();
        c.mount_height = 0.0;
        assert!(c.validate().is_err());
    }

    proptest! {
        #[test]
        fn egocentric_rigid_invariance(
            rx in -10.0..10.0f64, ry in -10.0..10.0f64, rh in -4.0..4.0f64,
            tx in -10.0..10.0f64, ty in -10.0..10.0f64, th in -4.0..4.0f64,
            rot in -4.0..4.0f64, dx in -20.0..20.0f64, dy in -20.0..20.0f64,
        ) {
            let robot = Pose2D::new(rx, ry, rh);
            let target = Pose2D::new(tx, ty, th);
            prop_assume!(robot.position().distance(target.position()) > 1e-3);
            let t = FrameTransform::new(Frame::Odom, Frame::Odom, rot, Point2::new(dx, dy));
            let a = to_egocentric(&robot, &target);
            let b = to_egocentric(&t.apply_pose(&robot), &t.apply_pose(&target));
            prop_assert!((a.r - b.r).abs() < 1e-9);
            prop_assert!(wrap_angle(a.theta - b.theta).abs() < 1e-9);
            prop_assert!(wrap_angle(a.delta - b.delta).abs() < 1e-9);
        }

        #[test]
        fn compose_is_associative(
            r1 in -4.0..4.0f64, r2 in -4.0..4.0f64, r3 in -4.0..4.0f64,
            t in proptest::array::uniform6(-5.0..5.0f64), px in -5.0..5.0f64, py in -5.0..5.0f64,
        ) {
            let a = FrameTransform::new(Frame::Odom, Frame::Odom, r1, Point2::new(t[0], t[1]));
            let b = FrameTransform::new(Frame::Odom, Frame::Odom, r2, Point2::new(t[2], t[3]));
            let c = FrameTransform::new(Frame::Odom, Frame::Odom, r3, Point2::new(t[4], t[5]));
            let left = a.compose(&b).unwrap().compose(&c).unwrap();
            let right = a.compose(&b.compose(&c).unwrap()).unwrap();
            let p = Point2::new(px, py);
            prop_assert!(left.apply(p).distance(right.apply(p)) < 1e-9);
            prop_assert!(wrap_angle(left.rotation - right.rotation).abs() < 1e-9);
        }

        #[test]
        fn advance_with_zero_speed_stays_put(x in -5.0..5.0f64, y in -5.0..5.0f64, h in -3.0..3.0f64, w in -3.0..3.0f64) {
            let p = Pose2D::new(x, y, h).advance(0.0, w, 0.1);
            prop_assert_eq!((p.x, p.y), (x, y));
        }
    }
}
