//! Behavior-aware model-predictive local planner over the egocentric
//! trajectory family `z = (r, theta, delta, v_max)`.

mod control;
mod cost;
mod optimize;
mod rollout;

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::costmap::{max_cost, max_cost_in, CostMap, Roi};
use crate::exec::Exec;
use crate::geometry::{CameraModel, EgocentricGoal, Point2, Pose2D};
use crate::instruction::{gait_caution_flag, InstructionBundle};
use crate::landmark::OdomGoal;

pub use control::{control_law, steer, DegenerateRange, MIN_CONTROL_RANGE};
pub use cost::{behavior_cost, goal_cost, obstacle_cost, total_cost, CostBreakdown, CostContext};
pub use optimize::{halton_points, optimize, optimize_with, OptimizeResult, LOCAL_STARTS, MIN_BUDGET};
pub use rollout::{rollout, virtual_target, TrajSample, Trajectory, ARRIVAL_RADIUS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("no goal is locked")]
    NoGoal,
    #[error("robot is on the goal; goal-cost baseline is zero")]
    ZeroBaseline,
    #[error("invalid planner configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryParams {
    pub r: f64,
    pub theta: f64,
    pub delta: f64,
    pub v_max: f64,
}

impl TrajectoryParams {
    pub const fn new(r: f64, theta: f64, delta: f64, v_max: f64) -> Self {
        Self { r, theta, delta, v_max }
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.r, self.theta, self.delta, self.v_max]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn ego(&self) -> EgocentricGoal {
        EgocentricGoal {
            r: self.r,
            theta: self.theta,
            delta: self.delta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamBounds {
    pub lower: TrajectoryParams,
    pub upper: TrajectoryParams,
}

impl Default for ParamBounds {
    fn default() -> Self {
        Self {
            lower: TrajectoryParams::new(0.5, -FRAC_PI_2, -FRAC_PI_2, 0.0),
            upper: TrajectoryParams::new(6.0, FRAC_PI_2, FRAC_PI_2, 1.0),
        }
    }
}

impl ParamBounds {
    pub fn validate(&self) -> Result<(), PlanError> {
        let (lo, hi) = (self.lower.to_array(), self.upper.to_array());
        if lo.iter().chain(&hi).any(|v| !v.is_finite()) {
            return Err(PlanError::InvalidConfig("bounds must be finite".into()));
        }
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return Err(PlanError::InvalidConfig("lower bound exceeds upper bound".into()));
        }
        if self.lower.v_max < 0.0 || self.lower.r < 0.0 {
            return Err(PlanError::InvalidConfig("r and v_max bounds must be non-negative".into()));
        }
        Ok(())
    }

    pub fn contains(&self, z: &TrajectoryParams) -> bool {
        let (lo, hi, v) = (self.lower.to_array(), self.upper.to_array(), z.to_array());
        (0..4).all(|d| v[d] >= lo[d] && v[d] <= hi[d])
    }

    pub fn clamp(&self, z: &TrajectoryParams) -> TrajectoryParams {
        let (lo, hi, v) = (self.lower.to_array(), self.upper.to_array(), z.to_array());
        TrajectoryParams::from_array(std::array::from_fn(|d| v[d].clamp(lo[d], hi[d])))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorAggregate {
    #[default]
    Sum,
    Max,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub k1: f64,
    pub k2: f64,
    pub horizon_steps: usize,
    pub dt: f64,
    pub lambda: f64,
    pub d_safe: f64,
    pub c_th: f64,
    pub d_th: f64,
    pub w_goal: f64,
    pub w_obs: f64,
    pub w_behav: f64,
    pub behav_aggregate: BehaviorAggregate,
    pub obstacle_cost_clamp: f64,
    /// Objective evaluations per planning cycle.
    pub budget: usize,
    /// Hold rollouts at the virtual target until the horizon ends.
    pub pad_to_horizon: bool,
    /// Window for the velocity-cap maximum; whole image when absent.
    pub cap_roi: Option<Roi>,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            k1: 1.0,
            k2: 3.0,
            horizon_steps: 30,
            dt: 0.1,
            lambda: 0.5,
            d_safe: 0.7,
            c_th: 0.8,
            d_th: 0.5,
            w_goal: 1.0,
            w_obs: 1.0,
            w_behav: 1.0,
            behav_aggregate: BehaviorAggregate::Sum,
            obstacle_cost_clamp: 1e3,
            budget: 256,
            pad_to_horizon: true,
            cap_roi: None,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        let bad = |m: &str| Err(PlanError::InvalidConfig(m.into()));
        if !(self.k1 > 0.0 && self.k2 > 0.0) {
            return bad("k1 and k2 must be positive");
        }
        if self.horizon_steps < 1 {
            return bad("horizon_steps must be at least 1");
        }
        if !(self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if !(self.lambda >= 0.0) {
            return bad("lambda must be non-negative");
        }
        if !(self.d_safe > 0.0) {
            return bad("d_safe must be positive");
        }
        if !(self.c_th > 0.0 && self.c_th <= 1.0) {
            return bad("c_th must lie in (0, 1]");
        }
        if !(self.d_th > 0.0) {
            return bad("d_th must be positive");
        }
        if !(self.w_goal >= 0.0 && self.w_obs >= 0.0 && self.w_behav >= 0.0) {
            return bad("weights must be non-negative");
        }
        if self.budget < MIN_BUDGET {
            return bad("budget must be at least 16");
        }
        Ok(())
    }
}

/// Shrinks the speed bound when the cost map holds an extreme value.
pub fn apply_velocity_cap(bounds: &ParamBounds, max_c: f64, c_th: f64, v_max_nominal: f64) -> ParamBounds {
    let mut b = *bounds;
    b.upper.v_max = if max_c >= c_th {
        (1.0 - max_c).max(0.0) * v_max_nominal
    } else {
        v_max_nominal
    };
    b.lower.v_max = b.lower.v_max.min(b.upper.v_max);
    b
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Command {
    pub v: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub command: Command,
    pub best_params: TrajectoryParams,
    pub best_trajectory: Trajectory,
    pub cost_breakdown: CostBreakdown,
    pub gait_caution: bool,
    pub capped_v_max: f64,
    pub max_c: f64,
}

/// Perception inputs for one planning cycle.
#[derive(Debug, Clone, Copy)]
pub struct PlanInputs<'a> {
    pub robot: &'a Pose2D,
    pub goal: Option<&'a OdomGoal>,
    pub cost_map: &'a CostMap,
    /// Obstacle points in the odometry frame.
    pub obstacles: &'a [Point2],
    pub bundle: &'a InstructionBundle,
    pub camera: &'a CameraModel,
    /// Previous cycle's solution, tried as a candidate.
    pub warm_start: Option<TrajectoryParams>,
}

/// Parameters aiming straight at `goal` and arriving along the line of
/// sight.
pub fn direct_params(robot: &Pose2D, goal: Point2, v_max: f64) -> TrajectoryParams {
    let d = robot.position().distance(goal);
    let bearing = (goal.y - robot.y).atan2(goal.x - robot.x);
    TrajectoryParams::new(d, 0.0, crate::geometry::wrap_angle(robot.heading - bearing), v_max)
}

/// One planning cycle: velocity cap from the cost-map maximum, objective
/// minimization over `z`, and the first control of the best trajectory.
pub fn plan_step(
    inputs: &PlanInputs<'_>,
    cfg: &PlannerConfig,
    bounds: &ParamBounds,
    seed: u64,
    exec: Exec,
) -> Result<PlanResult, PlanError> {
    let goal = inputs.goal.ok_or(PlanError::NoGoal)?;
    let robot = inputs.robot;
    if robot.position().distance(goal.position) <= crate::geometry::DEGENERATE_RANGE {
        return Err(PlanError::ZeroBaseline);
    }
    let max_c = match &cfg.cap_roi {
        Some(roi) => max_cost_in(inputs.cost_map, roi),
        None => max_cost(inputs.cost_map),
    };
    let capped = apply_velocity_cap(bounds, max_c, cfg.c_th, bounds.upper.v_max);

    // points beyond any rollout's reach plus d_safe never contribute
    let reach = capped.upper.v_max * cfg.horizon_steps as f64 * cfg.dt + cfg.d_safe + 1e-9;
    let near: Vec<Point2> = inputs
        .obstacles
        .iter()
        .copied()
        .filter(|p| p.distance(robot.position()) <= reach)
        .collect();
    let ctx = CostContext {
        robot,
        goal: goal.position,
        obstacles: &near,
        cost_map: inputs.cost_map,
        camera: inputs.camera,
    };
    let objective = |z: &TrajectoryParams| {
        total_cost(&rollout(z, robot, cfg), &ctx, cfg)
            .map(|b| b.total)
            .unwrap_or(f64::INFINITY)
    };
    let mut starts = vec![direct_params(robot, goal.position, capped.upper.v_max)];
    starts.extend(inputs.warm_start);
    let best = optimize_with(&objective, &capped, seed, cfg.budget, &starts, exec);
    let z = best.z;
    let best_trajectory = rollout(&z, robot, cfg);
    let cost_breakdown = total_cost(&best_trajectory, &ctx, cfg)?;
    let v = z.v_max.min(capped.upper.v_max).max(0.0);
    let omega = steer(&z.ego(), v, cfg.k1, cfg.k2);
    Ok(PlanResult {
        command: Command { v, omega },
        best_params: z,
        best_trajectory,
        cost_breakdown,
        gait_caution: gait_caution_flag(&inputs.bundle.behav_actions),
        capped_v_max: capped.upper.v_max,
        max_c,
    })
}
