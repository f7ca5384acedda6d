use serde::{Deserialize, Serialize};

use crate::costmap::{sample, CostMap};
use crate::geometry::{ground_to_pixel, CameraModel, Point2, Pose2D, DEGENERATE_RANGE};

use super::{BehaviorAggregate, PlanError, PlannerConfig, Trajectory};

/// Sum over samples of distance-to-goal divided by `d_tot`.
pub fn goal_cost(traj: &Trajectory, goal: Point2, d_tot: f64) -> Result<f64, PlanError> {
    if d_tot <= DEGENERATE_RANGE {
        return Err(PlanError::ZeroBaseline);
    }
    Ok(traj.positions().map(|p| p.distance(goal) / d_tot).sum())
}

/// Sum over samples of `1/d - 1/d_safe` for the nearest obstacle closer
/// than `d_safe`, each term capped at `clamp`.
pub fn obstacle_cost(traj: &Trajectory, obstacles: &[Point2], d_safe: f64, clamp: f64) -> f64 {
    if obstacles.is_empty() {
        return 0.0;
    }
    let inv_safe = 1.0 / d_safe;
    traj.positions()
        .map(|p| {
            let d = obstacles.iter().map(|o| p.distance(*o)).fold(f64::INFINITY, f64::min);
            if d < d_safe {
                (1.0 / d - inv_safe).min(clamp)
            } else {
                0.0
            }
        })
        .sum()
}

/// Behavioral cost of the samples that project into the image, each
/// weighted by `exp(-lambda * d)` with `d` the distance from `robot`.
pub fn behavior_cost(
    traj: &Trajectory,
    c: &CostMap,
    cam: &CameraModel,
    robot: &Pose2D,
    lambda: f64,
    mode: BehaviorAggregate,
) -> f64 {
    let origin = robot.position();
    let terms = traj.positions().map(|p| match ground_to_pixel(cam, robot, p) {
        Ok(px) => sample(c, px) * (-lambda * p.distance(origin)).exp(),
        Err(_) => 0.0,
    });
    match mode {
        BehaviorAggregate::Sum => terms.sum(),
        BehaviorAggregate::Max => terms.fold(0.0, f64::max),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub goal: f64,
    pub obstacle: f64,
    pub behavior: f64,
    pub total: f64,
}

/// Everything a trajectory is scored against.
#[derive(Debug, Clone, Copy)]
pub struct CostContext<'a> {
    pub robot: &'a Pose2D,
    pub goal: Point2,
    pub obstacles: &'a [Point2],
    pub cost_map: &'a CostMap,
    pub camera: &'a CameraModel,
}

/// Weighted objective `w_goal*goal + w_obs*obstacle + w_behav*behavior`.
/// Terms with zero weight are not evaluated.
pub fn total_cost(traj: &Trajectory, ctx: &CostContext<'_>, cfg: &PlannerConfig) -> Result<CostBreakdown, PlanError> {
    let d_tot = ctx.robot.position().distance(ctx.goal);
    let goal = if cfg.w_goal != 0.0 { goal_cost(traj, ctx.goal, d_tot)? } else { 0.0 };
    let obstacle = if cfg.w_obs != 0.0 {
        obstacle_cost(traj, ctx.obstacles, cfg.d_safe, cfg.obstacle_cost_clamp)
    } else {
        0.0
    };
    let behavior = if cfg.w_behav != 0.0 {
        behavior_cost(traj, ctx.cost_map, ctx.camera, ctx.robot, cfg.lambda, cfg.behav_aggregate)
    } else {
        0.0
    };
    Ok(CostBreakdown {
        goal,
        obstacle,
        behavior,
        total: cfg.w_goal * goal + cfg.w_obs * obstacle + cfg.w_behav * behavior,
    })
}
