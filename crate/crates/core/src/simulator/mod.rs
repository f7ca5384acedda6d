//! Deterministic planar world: labeled terrain, obstacles, scripted
//! actors and landmarks, with a label-image camera and a planar LiDAR.

mod lidar;
mod oracle;
mod render;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point2, Pose2D};
use crate::instruction::normalize_text;

pub use lidar::lidar_scan;
pub use oracle::{label_matches, oracle_segment, OracleSegmenter};
pub use render::{render_label_image, GroundLut};

/// Label id reserved for pixels whose ray never meets the ground.
pub const SKY: u16 = 0;
pub const SKY_LABEL: &str = "sky";
pub const ROBOT_RADIUS: f64 = 0.3;
pub const LIDAR_BEAMS: usize = 360;
pub const LIDAR_MAX_RANGE: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorldError {
    #[error("terrain region {0:?} needs at least 3 vertices")]
    DegeneratePolygon(String),
    #[error("terrain region {0:?} is self-intersecting")]
    SelfIntersecting(String),
    #[error("actor {0:?}: waypoint times must be strictly increasing")]
    Waypoints(String),
    #[error("actor {0:?}: active window is reversed")]
    ActiveWindow(String),
    #[error("world bounds are empty")]
    Bounds,
    #[error("{0} must be positive")]
    NonPositive(&'static str),
}

/// Axis-aligned rectangle in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Bounds {
    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerrainRegion {
    pub label: String,
    pub polygon: Vec<Point2>,
    /// Higher draws on top.
    #[serde(default)]
    pub order: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum Obstacle {
    Circle { center: Point2, radius: f64 },
    Polygon { points: Vec<Point2> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActorKind {
    Pedestrian,
    Sign,
    Gesture,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedActor {
    pub kind: ActorKind,
    pub label: String,
    pub waypoints: Vec<Waypoint>,
    /// `[t_start, t_end]` in seconds.
    #[serde(default = "always")]
    pub active_window: [f64; 2],
    pub footprint_radius: f64,
}

fn always() -> [f64; 2] {
    [0.0, f64::MAX]
}

impl ScriptedActor {
    /// Position by linear interpolation, clamped to the first and last
    /// waypoint.
    pub fn position_at(&self, t: f64) -> Point2 {
        let w = &self.waypoints;
        let p = |w: &Waypoint| Point2::new(w.x, w.y);
        match w.iter().position(|wp| wp.t > t) {
            None => w.last().map(p).unwrap_or_default(),
            Some(0) => p(&w[0]),
            Some(i) => {
                let (a, b) = (&w[i - 1], &w[i]);
                p(a).lerp(p(b), (t - a.t) / (b.t - a.t))
            }
        }
    }

    pub fn is_active(&self, t: f64) -> bool {
        t >= self.active_window[0] && t <= self.active_window[1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Landmark {
    pub text: String,
    pub position: Point2,
    /// Half side of the square footprint used for detection ground truth.
    #[serde(default = "default_half_size")]
    pub half_size: f64,
}

fn default_half_size() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct World {
    pub bounds: Bounds,
    pub default_label: String,
    #[serde(default)]
    pub terrain: Vec<TerrainRegion>,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default)]
    pub actors: Vec<ScriptedActor>,
    #[serde(default)]
    pub landmarks: Vec<Landmark>,
}

/// Actor state at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorState {
    pub label_id: u16,
    pub position: Point2,
    pub radius: f64,
    pub active: bool,
}

fn segments_cross(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let o = |p: Point2, q: Point2, r: Point2| (q - p).cross(r - p);
    let (d1, d2, d3, d4) = (o(c, d, a), o(c, d, b), o(a, b, c), o(a, b, d));
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

fn is_simple(poly: &[Point2]) -> bool {
    let n = poly.len();
    for i in 0..n {
        for j in i + 1..n {
            // skip adjacent edges
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_cross(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

/// Even-odd point-in-polygon test.
pub fn point_in_polygon(p: Point2, poly: &[Point2]) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n.wrapping_sub(1);
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Distance from `p` to the segment `ab`.
pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let s = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a + ab * s)
}

impl Obstacle {
    /// Distance from `p` to the obstacle boundary; 0 inside.
    pub fn distance(&self, p: Point2) -> f64 {
        match self {
            Obstacle::Circle { center, radius } => (p.distance(*center) - radius).max(0.0),
            Obstacle::Polygon { points } => {
                if point_in_polygon(p, points) {
                    return 0.0;
                }
                let n = points.len();
                (0..n)
                    .map(|i| point_segment_distance(p, points[i], points[(i + 1) % n]))
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }
}

/// A validated world with its label table.
#[derive(Debug, Clone)]
pub struct Scene {
    pub world: World,
    /// Index is the label id; id 0 is sky, id 1 the default terrain.
    pub labels: Arc<[String]>,
    terrain_ids: Vec<u16>,
    /// Terrain indices sorted by descending draw order.
    draw_order: Vec<usize>,
    actor_ids: Vec<u16>,
}

impl Scene {
    pub fn new(world: World) -> Result<Self, WorldError> {
        let b = &world.bounds;
        if !(b.max_x > b.min_x && b.max_y > b.min_y) {
            return Err(WorldError::Bounds);
        }
        for r in &world.terrain {
            if r.polygon.len() < 3 {
                return Err(WorldError::DegeneratePolygon(r.label.clone()));
            }
            if !is_simple(&r.polygon) {
                return Err(WorldError::SelfIntersecting(r.label.clone()));
            }
        }
        for a in &world.actors {
            if a.waypoints.is_empty() || a.waypoints.windows(2).any(|w| w[1].t <= w[0].t) {
                return Err(WorldError::Waypoints(a.label.clone()));
            }
            if a.active_window[1] < a.active_window[0] {
                return Err(WorldError::ActiveWindow(a.label.clone()));
            }
            if !(a.footprint_radius > 0.0) {
                return Err(WorldError::NonPositive("footprint_radius"));
            }
        }
        for o in &world.obstacles {
            match o {
                Obstacle::Circle { radius, .. } if !(*radius > 0.0) => {
                    return Err(WorldError::NonPositive("obstacle radius"))
                }
                Obstacle::Polygon { points } if points.len() < 3 => {
                    return Err(WorldError::DegeneratePolygon("obstacle".into()))
                }
                _ => {}
            }
        }
        let mut labels: Vec<String> = vec![SKY_LABEL.to_string(), normalize_text(&world.default_label)];
        let mut intern = |s: &str| -> u16 {
            let s = normalize_text(s);
            match labels.iter().position(|l| *l == s) {
                Some(i) => i as u16,
                None => {
                    labels.push(s);
                    (labels.len() - 1) as u16
                }
            }
        };
        let terrain_ids = world.terrain.iter().map(|r| intern(&r.label)).collect();
        let actor_ids = world.actors.iter().map(|a| intern(&a.label)).collect();
        let mut draw_order: Vec<usize> = (0..world.terrain.len()).collect();
        // stable: later regions win ties
        draw_order.sort_by(|&i, &j| world.terrain[j].order.cmp(&world.terrain[i].order).then(j.cmp(&i)));
        Ok(Self {
            world,
            labels: labels.into(),
            terrain_ids,
            draw_order,
            actor_ids,
        })
    }

    pub fn label_name(&self, id: u16) -> &str {
        &self.labels[id as usize]
    }

    /// Terrain label id at a ground point (actors ignored).
    pub fn terrain_at(&self, p: Point2) -> u16 {
        for &i in &self.draw_order {
            if point_in_polygon(p, &self.world.terrain[i].polygon) {
                return self.terrain_ids[i];
            }
        }
        1
    }

    /// Actor positions and activity at time `t`.
    pub fn actors_update(&self, t: f64) -> Vec<ActorState> {
        self.world
            .actors
            .iter()
            .zip(&self.actor_ids)
            .map(|(a, &id)| ActorState {
                label_id: id,
                position: a.position_at(t),
                radius: a.footprint_radius,
                active: a.is_active(t),
            })
            .collect()
    }

    /// Label id seen at a ground point: active actors occlude terrain.
    pub fn label_at(&self, p: Point2, actors: &[ActorState]) -> u16 {
        for a in actors {
            if a.active && p.distance(a.position) <= a.radius {
                return a.label_id;
            }
        }
        self.terrain_at(p)
    }

    /// Whether a robot centered at `p` touches an obstacle or active actor.
    pub fn collides(&self, p: Point2, actors: &[ActorState]) -> bool {
        self.clearance(p, actors) < ROBOT_RADIUS
    }

    /// Distance from `p` to the nearest obstacle or active-actor boundary.
    pub fn clearance(&self, p: Point2, actors: &[ActorState]) -> f64 {
        let obs = self.world.obstacles.iter().map(|o| o.distance(p));
        let act = actors
            .iter()
            .filter(|a| a.active)
            .map(|a| (p.distance(a.position) - a.radius).max(0.0));
        obs.chain(act).fold(f64::INFINITY, f64::min)
    }
}

/// Robot pose and the command it last executed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub pose: Pose2D,
    pub v: f64,
    pub omega: f64,
    pub t: f64,
}

impl RobotState {
    pub fn at(pose: Pose2D) -> Self {
        Self {
            pose,
            v: 0.0,
            omega: 0.0,
            t: 0.0,
        }
    }
}

/// Unicycle step with exact arc integration.
pub fn step(state: &RobotState, cmd: (f64, f64), dt: f64) -> RobotState {
    let (v, omega) = cmd;
    RobotState {
        pose: state.pose.advance(v, omega, dt),
        v,
        omega,
        t: state.t + dt,
    }
}

/// One camera and LiDAR observation.
#[derive(Debug, Clone)]
pub struct SensorFrame {
    pub t: f64,
    /// Pose the frame was captured from.
    pub pose: Pose2D,
    pub width: usize,
    pub height: usize,
    /// Row-major label ids.
    pub label_image: Vec<u16>,
    pub labels: Arc<[String]>,
    /// LiDAR returns in the robot frame.
    pub lidar_points: Vec<Point2>,
}

impl SensorFrame {
    /// A false-color RGB rendering for image-based backends.
    pub fn to_rgb(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.label_image.len() * 3);
        for &id in &self.label_image {
            out.extend_from_slice(&label_color(&self.labels[id as usize]));
        }
        out
    }

    pub fn to_png(&self) -> Vec<u8> {
        crate::gateway::encode_png_rgb(self.width, self.height, &self.to_rgb())
    }
}

fn label_color(label: &str) -> [u8; 3] {
    const NAMED: &[(&str, [u8; 3])] = &[
        ("sky", [135, 190, 235]),
        ("grass", [70, 150, 60]),
        ("sidewalk", [185, 185, 180]),
        ("pavement", [185, 185, 180]),
        ("concrete", [200, 200, 195]),
        ("sand", [220, 200, 140]),
        ("water", [60, 100, 180]),
        ("puddle", [60, 100, 180]),
        ("crosswalk", [240, 240, 240]),
        ("road", [70, 70, 75]),
        ("stairs", [150, 120, 100]),
    ];
    if let Some((_, c)) = NAMED.iter().find(|(k, _)| label.contains(k)) {
        return *c;
    }
    // stable hash color for everything else
    let h = label.bytes().fold(2166136261u32, |h, b| (h ^ b as u32).wrapping_mul(16777619));
    [(h >> 16) as u8, (h >> 8) as u8, h as u8]
}
