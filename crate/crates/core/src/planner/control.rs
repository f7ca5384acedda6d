use thiserror::Error;

use crate::geometry::EgocentricGoal;

/// Ranges at or below this are treated as having arrived.
pub const MIN_CONTROL_RANGE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("egocentric range {0} is too small for the control law")]
pub struct DegenerateRange(pub f64);

/// Pose-following angular velocity for egocentric goal `ego` at speed `v`:
///
/// `w = (v/r) * (k2 * (delta - atan(-k1*theta)) + (1 + k1) / (1 + k1^2 theta^2) * sin(delta))`
///
/// With `delta` measured as heading minus line-of-sight bearing, this
/// value turns the robot away from the target; [`steer`] gives the
/// command that converges.
pub fn control_law(ego: &EgocentricGoal, v: f64, k1: f64, k2: f64) -> Result<f64, DegenerateRange> {
    if ego.r <= MIN_CONTROL_RANGE {
        return Err(DegenerateRange(ego.r));
    }
    let (th, d) = (ego.theta, ego.delta);
    let heading_term = k2 * (d - (-k1 * th).atan());
    let sight_term = (1.0 + k1) / (1.0 + k1 * k1 * th * th) * d.sin();
    Ok(v / ego.r * (heading_term + sight_term))
}

/// Angular velocity applied to the robot: the negated control law, i.e.
/// the law evaluated at `(-theta, -delta)`. Zero at degenerate range.
pub fn steer(ego: &EgocentricGoal, v: f64, k1: f64, k2: f64) -> f64 {
    control_law(ego, v, k1, k2).map(|w| -w).unwrap_or(0.0)
}
