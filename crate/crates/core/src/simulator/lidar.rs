use std::f64::consts::TAU;

use crate::geometry::{Point2, Pose2D};

use super::{ActorState, Obstacle, Scene};

fn ray_circle(o: Point2, d: Point2, c: Point2, r: f64) -> Option<f64> {
    let oc = o - c;
    let b = oc.dot(d);
    let disc = b * b - (oc.dot(oc) - r * r);
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    [-b - sq, -b + sq].into_iter().find(|s| *s >= 0.0)
}

fn ray_segment(o: Point2, d: Point2, a: Point2, b: Point2) -> Option<f64> {
    let e = b - a;
    let denom = d.cross(e);
    if denom.abs() < 1e-15 {
        return None;
    }
    let ao = a - o;
    let s = ao.cross(e) / denom;
    let u = ao.cross(d) / denom;
    (s >= 0.0 && (0.0..=1.0).contains(&u)).then_some(s)
}

fn nearest_hit(o: Point2, d: Point2, scene: &Scene, actors: &[ActorState]) -> Option<f64> {
    let mut best: Option<f64> = None;
    let mut take = |s: Option<f64>| {
        if let Some(s) = s {
            if best.is_none_or(|b| s < b) {
                best = Some(s);
            }
        }
    };
    for obs in &scene.world.obstacles {
        match obs {
            Obstacle::Circle { center, radius } => take(ray_circle(o, d, *center, *radius)),
            Obstacle::Polygon { points } => {
                let n = points.len();
                for i in 0..n {
                    take(ray_segment(o, d, points[i], points[(i + 1) % n]));
                }
            }
        }
    }
    for a in actors.iter().filter(|a| a.active) {
        take(ray_circle(o, d, a.position, a.radius));
    }
    best
}

/// Planar scan with `beams` evenly spaced azimuths starting at the robot
/// heading. Returns robot-frame hit points; terrain is not visible.
pub fn lidar_scan(scene: &Scene, robot: &Pose2D, actors: &[ActorState], beams: usize, max_range: f64) -> Vec<Point2> {
    let o = robot.position();
    let mut out = Vec::new();
    for k in 0..beams {
        let az = TAU * k as f64 / beams as f64;
        let world_dir = Point2::new((robot.heading + az).cos(), (robot.heading + az).sin());
        if let Some(s) = nearest_hit(o, world_dir, scene, actors) {
            if s <= max_range {
                out.push(Point2::new(s * az.cos(), s * az.sin()));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::tests::world;
    use crate::simulator::{ActorKind, ScriptedActor, Waypoint, LIDAR_BEAMS, LIDAR_MAX_RANGE};
    use approx::assert_abs_diff_eq;

    #[test]
    fn empty_world_has_no_returns() {
        let scene = Scene::new(world()).unwrap();
        assert!(lidar_scan(&scene, &Pose2D::default(), &[], LIDAR_BEAMS, LIDAR_MAX_RANGE).is_empty());
    }

    #[test]
    fn circle_ahead() {
        let mut w = world();
        w.obstacles.push(Obstacle::Circle {
            center: Point2::new(3.0, 0.0),
            radius: 0.5,
        });
        w.obstacles.push(Obstacle::Polygon {
            points: vec![
                Point2::new(-4.0, -1.0),
                Point2::new(-3.0, -1.0),
                Point2::new(-3.0, 1.0),
                Point2::new(-4.0, 1.0),
            ],
        });
        let scene = Scene::new(w).unwrap();
        let pts = lidar_scan(&scene, &Pose2D::default(), &[], 360, 10.0);
        assert_abs_diff_eq!(pts[0].x, 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(pts[0].y, 0.0, epsilon = 1e-12);
        let back = pts.iter().find(|p| p.y.abs() < 1e-9 && p.x < 0.0).unwrap();
        assert_abs_diff_eq!(back.x, -3.0, epsilon = 1e-9);
        // every return lies on an obstacle boundary
        for p in &pts {
            let d = scene.world.obstacles.iter().map(|o| o.distance(*p)).fold(f64::INFINITY, f64::min);
            let on_circle = (p.distance(Point2::new(3.0, 0.0)) - 0.5).abs();
            assert!(d < 1e-6 && (on_circle < 1e-6 || p.x < 0.0));
        }
        // rotated robot sees the same geometry
        let turned = lidar_scan(&scene, &Pose2D::new(0.0, 0.0, 1.0), &[], 360, 10.0);
        let robot = Pose2D::new(0.0, 0.0, 1.0);
        for p in &turned {
            let d = scene.world.obstacles.iter().map(|o| o.distance(robot.to_world(*p))).fold(f64::INFINITY, f64::min);
            assert!(d < 1e-6);
        }
        assert!(lidar_scan(&scene, &Pose2D::default(), &[], 360, 2.0).is_empty());
    }

    #[test]
    fn inactive_actor_is_invisible() {
        let mut w = world();
        w.actors.push(ScriptedActor {
            kind: ActorKind::Pedestrian,
            label: "person".into(),
            waypoints: vec![Waypoint { t: 0.0, x: 2.0, y: 0.0 }],
            active_window: [5.0, 9.0],
            footprint_radius: 0.3,
        });
        let scene = Scene::new(w).unwrap();
        let pose = Pose2D::default();
        assert!(lidar_scan(&scene, &pose, &scene.actors_update(1.0), 360, 10.0).is_empty());
        let pts = lidar_scan(&scene, &pose, &scene.actors_update(6.0), 360, 10.0);
        assert_abs_diff_eq!(pts[0].x, 1.7, epsilon = 1e-12);
    }
}
