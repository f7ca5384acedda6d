use crate::exec::Exec;
use crate::geometry::{CameraModel, Pixel, Point2, Pose2D};

use super::{ActorState, Scene, SKY};

/// Robot-frame ground point for every pixel of a camera, `None` above
/// the horizon. Pixel `(i, j)` samples the image coordinate `(i, j)`.
#[derive(Debug, Clone)]
pub struct GroundLut {
    pub width: usize,
    pub height: usize,
    points: Vec<Option<Point2>>,
}

impl GroundLut {
    pub fn new(cam: &CameraModel) -> Self {
        let mut points = Vec::with_capacity(cam.width * cam.height);
        for j in 0..cam.height {
            for i in 0..cam.width {
                points.push(cam.pixel_to_robot_ground(Pixel::new(i as f64, j as f64)).ok());
            }
        }
        Self {
            width: cam.width,
            height: cam.height,
            points,
        }
    }

    pub fn point(&self, i: usize, j: usize) -> Option<Point2> {
        self.points[j * self.width + i]
    }

    /// Label image seen from `robot` given the actor states.
    pub fn render(&self, scene: &Scene, robot: &Pose2D, actors: &[ActorState], exec: Exec) -> Vec<u16> {
        let mut out = vec![SKY; self.width * self.height];
        exec.for_each_row(&mut out, self.width, |j, row| {
            for (i, px) in row.iter_mut().enumerate() {
                if let Some(p) = self.points[j * self.width + i] {
                    *px = scene.label_at(robot.to_world(p), actors);
                }
            }
        });
        out
    }
}

/// Renders the row-major label-id image a camera on `robot` sees at time
/// `t`.
pub fn render_label_image(scene: &Scene, robot: &Pose2D, cam: &CameraModel, t: f64) -> Vec<u16> {
    GroundLut::new(cam).render(scene, robot, &scene.actors_update(t), Exec::Sequential)
}
