use serde::{Deserialize, Serialize};

use crate::geometry::{to_egocentric, Point2, Pose2D};

use super::control::steer;
use super::{PlannerConfig, TrajectoryParams};

/// Rollouts stop once this close to the virtual target.
pub const ARRIVAL_RADIUS: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajSample {
    pub t: f64,
    pub pose: Pose2D,
    pub speed: f64,
}

/// Poses sampled every `dt` after the start, at most `T` of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<TrajSample>,
    pub params: TrajectoryParams,
}

impl Trajectory {
    pub fn positions(&self) -> impl Iterator<Item = Point2> + '_ {
        self.samples.iter().map(|s| s.pose.position())
    }
}

/// Target pose encoded by `z` relative to `start`: `r` meters along the
/// bearing `heading - delta`, facing that bearing plus `theta`.
pub fn virtual_target(z: &TrajectoryParams, start: &Pose2D) -> Pose2D {
    let bearing = start.heading - z.delta;
    Pose2D::new(
        start.x + z.r * bearing.cos(),
        start.y + z.r * bearing.sin(),
        bearing + z.theta,
    )
}

/// Integrates the closed-loop unicycle toward the virtual target at
/// constant speed `z.v_max`. After arrival the remaining samples, if
/// `cfg.pad_to_horizon`, hold the arrival pose at zero speed.
pub fn rollout(z: &TrajectoryParams, start: &Pose2D, cfg: &PlannerConfig) -> Trajectory {
    let target = virtual_target(z, start);
    let v = z.v_max;
    let mut pose = *start;
    let mut samples = Vec::with_capacity(cfg.horizon_steps);
    let mut arrived = false;
    for i in 1..=cfg.horizon_steps {
        let t = i as f64 * cfg.dt;
        if arrived {
            if !cfg.pad_to_horizon {
                break;
            }
            samples.push(TrajSample { t, pose, speed: 0.0 });
            continue;
        }
        let omega = steer(&to_egocentric(&pose, &target), v, cfg.k1, cfg.k2);
        pose = pose.advance(v, omega, cfg.dt);
        samples.push(TrajSample { t, pose, speed: v });
        arrived = pose.position().distance(target.position()) < ARRIVAL_RADIUS;
    }
    Trajectory {
        samples,
        params: *z,
    }
}
