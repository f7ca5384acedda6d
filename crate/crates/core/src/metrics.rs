//! Path-similarity and rule-compliance metrics over run logs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{wrap_angle, Point2, Pose2D};
use crate::instruction::BehaviorRule;
use crate::planner::{CostBreakdown, TrajectoryParams};
use crate::simulator::label_matches;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("path is empty")]
    EmptyPath,
    #[error("total path length is zero")]
    ZeroLength,
}

/// One control tick. `pose` is the pose at the start of the tick and
/// `(v, omega)` the command executed during it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub t: f64,
    pub pose: Pose2D,
    pub v: f64,
    pub omega: f64,
    pub cost: Option<CostBreakdown>,
    pub z: Option<TrajectoryParams>,
    pub max_c: f64,
    pub capped_v_max: f64,
    pub gait_caution: bool,
    pub collision: bool,
    pub stop_active: bool,
    /// Ground-truth terrain under the robot.
    pub terrain: String,
    /// Goal the lock held this tick, before any arrival.
    pub goal: Option<Point2>,
    /// Landmark index after this tick's lock update.
    pub landmark_index: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunLog {
    pub n_landmarks: usize,
    pub ticks: Vec<TickRecord>,
    /// Pose after the last tick's command.
    pub final_pose: Option<Pose2D>,
}

impl RunLog {
    /// Robot positions: every tick start, then the final pose.
    pub fn path(&self) -> Vec<Point2> {
        self.ticks
            .iter()
            .map(|r| r.pose.position())
            .chain(self.final_pose.map(|p| p.position()))
            .collect()
    }
}

/// Compliance thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Terrain with undesirability at or below this is compliant.
    pub u_compliant: f64,
    /// Terrain with undesirability at or above this is a violation.
    pub u_violation: f64,
    /// Speed above which moving during an active stop is a violation.
    pub stop_speed: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            u_compliant: 0.5,
            u_violation: 0.8,
            stop_speed: 0.05,
        }
    }
}

/// Discrete Frechet distance by dynamic programming.
pub fn frechet(a: &[Point2], b: &[Point2]) -> Result<f64, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptyPath);
    }
    let m = b.len();
    let mut prev = vec![0.0f64; m];
    let mut cur = vec![0.0f64; m];
    for (i, pa) in a.iter().enumerate() {
        for (j, pb) in b.iter().enumerate() {
            let d = pa.distance(*pb);
            cur[j] = match (i, j) {
                (0, 0) => d,
                (0, _) => cur[j - 1].max(d),
                (_, 0) => prev[0].max(d),
                _ => prev[j].min(prev[j - 1]).min(cur[j - 1]).max(d),
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m - 1])
}

/// Resamples a polyline at fixed arc-length spacing, keeping both ends.
pub fn resample(path: &[Point2], spacing: f64) -> Vec<Point2> {
    let Some(&first) = path.first() else {
        return Vec::new();
    };
    let mut out = vec![first];
    let mut carry = 0.0;
    for w in path.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = a.distance(b);
        if len == 0.0 {
            continue;
        }
        let mut s = spacing - carry;
        while s <= len {
            out.push(a.lerp(b, s / len));
            s += spacing;
        }
        carry = len - (s - spacing);
    }
    let last = *path.last().expect("non-empty");
    if out.last() != Some(&last) {
        out.push(last);
    }
    out
}

pub fn path_length(path: &[Point2]) -> f64 {
    path.windows(2).map(|w| w[0].distance(w[1])).sum()
}

/// Largest undesirability of any rule whose target names `label`; 0 when
/// no rule applies.
pub fn terrain_undesirability(label: &str, rules: &[BehaviorRule]) -> f64 {
    rules
        .iter()
        .filter(|r| label_matches(label, &r.target))
        .map(|r| r.undesirability)
        .fold(0.0, f64::max)
}

fn stop_violation(r: &TickRecord, th: &Thresholds) -> bool {
    r.stop_active && r.v > th.stop_speed
}

/// Percentage of traveled length during ticks that were on acceptable
/// terrain and not moving through an active stop.
pub fn bfa(log: &RunLog, rules: &[BehaviorRule], th: &Thresholds) -> Result<f64, MetricsError> {
    let path = log.path();
    let (mut total, mut good) = (0.0, 0.0);
    for (k, r) in log.ticks.iter().enumerate() {
        let Some(next) = path.get(k + 1) else { break };
        let len = path[k].distance(*next);
        total += len;
        let terrain_ok = terrain_undesirability(&r.terrain, rules) <= th.u_compliant;
        if terrain_ok && !stop_violation(r, th) {
            good += len;
        }
    }
    if total < 1e-6 {
        return Err(MetricsError::ZeroLength);
    }
    Ok(100.0 * good / total)
}

/// Mean absolute angle between heading and the line of sight to the goal,
/// over ticks that have a goal.
pub fn heading_error(log: &RunLog) -> f64 {
    let errs: Vec<f64> = log
        .ticks
        .iter()
        .filter_map(|r| {
            let g = r.goal?;
            let p = r.pose.position();
            (p.distance(g) > 1e-9).then(|| wrap_angle(r.pose.heading - p.bearing_to(g)).abs())
        })
        .collect();
    if errs.is_empty() {
        0.0
    } else {
        errs.iter().sum::<f64>() / errs.len() as f64
    }
}

/// Whether the final landmark was reached before the timeout, with no
/// collision and no rule violation.
pub fn success(log: &RunLog, rules: &[BehaviorRule], d_th: f64, timeout: f64, th: &Thresholds) -> bool {
    let Some(last) = log.ticks.last() else {
        return false;
    };
    let reached = last.landmark_index >= log.n_landmarks
        && last.t <= timeout
        && last.goal.is_some_and(|g| g.distance(last.pose.position()) < d_th);
    let clean = log.ticks.iter().all(|r| {
        !r.collision && !stop_violation(r, th) && terrain_undesirability(&r.terrain, rules) < th.u_violation
    });
    reached && clean
}

/// Maximal intervals (start, end) during which the robot was commanded
/// to stand still, in seconds.
pub fn stop_intervals(log: &RunLog, dt: f64) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut open: Option<f64> = None;
    for r in &log.ticks {
        match (r.v == 0.0, open) {
            (true, None) => open = Some(r.t),
            (false, Some(s)) => {
                out.push((s, r.t));
                open = None;
            }
            _ => {}
        }
    }
    if let (Some(s), Some(last)) = (open, log.ticks.last()) {
        out.push((s, last.t + dt));
    }
    out
}

/// Arc-length spacing used before comparing paths.
pub const RESAMPLE_SPACING: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub success: bool,
    pub reached: bool,
    pub collision: bool,
    /// `None` when the robot never moved.
    pub bfa: Option<f64>,
    pub heading_error: f64,
    /// `None` without a reference path.
    pub frechet: Option<f64>,
    pub path_length: f64,
    pub ticks: usize,
    pub duration: f64,
    pub mean_tick_wall_s: Option<f64>,
}

/// Computes every summary field from the log.
pub fn summarize(
    log: &RunLog,
    rules: &[BehaviorRule],
    reference: Option<&[Point2]>,
    d_th: f64,
    timeout: f64,
    dt: f64,
    th: &Thresholds,
) -> RunSummary {
    let path = log.path();
    let frechet = reference.filter(|r| !r.is_empty() && !path.is_empty()).map(|r| {
        frechet(&resample(&path, RESAMPLE_SPACING), &resample(r, RESAMPLE_SPACING)).expect("non-empty paths")
    });
    let last = log.ticks.last();
    RunSummary {
        success: success(log, rules, d_th, timeout, th),
        reached: last.is_some_and(|r| r.landmark_index >= log.n_landmarks),
        collision: log.ticks.iter().any(|r| r.collision),
        bfa: bfa(log, rules, th).ok(),
        heading_error: heading_error(log),
        frechet,
        path_length: path_length(&path),
        ticks: log.ticks.len(),
        duration: last.map(|r| r.t + dt).unwrap_or(0.0),
        mean_tick_wall_s: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn pts(v: &[(f64, f64)]) -> Vec<Point2> {
        v.iter().map(|&(x, y)| Point2::new(x, y)).collect()
    }

    /// Minimum over all monotone couplings of the maximum matched distance.
    pub(crate) fn frechet_brute(a: &[Point2], b: &[Point2]) -> f64 {
        fn go(a: &[Point2], b: &[Point2], i: usize, j: usize, cur: f64, best: &mut f64) {
            let cur = cur.max(a[i].distance(b[j]));
            if cur >= *best {
                return;
            }
            if i + 1 == a.len() && j + 1 == b.len() {
                *best = cur;
                return;
            }
            if i + 1 < a.len() {
                go(a, b, i + 1, j, cur, best);
            }
            if j + 1 < b.len() {
                go(a, b, i, j + 1, cur, best);
            }
            if i + 1 < a.len() && j + 1 < b.len() {
                go(a, b, i + 1, j + 1, cur, best);
            }
        }
        let mut best = f64::INFINITY;
        go(a, b, 0, 0, 0.0, &mut best);
        best
    }

    fn rec(t: f64, x: f64, y: f64, heading: f64, terrain: &str) -> TickRecord {
        TickRecord {
            t,
            pose: Pose2D::new(x, y, heading),
            v: 1.0,
            omega: 0.0,
            cost: None,
            z: None,
            max_c: 0.0,
            capped_v_max: 1.0,
            gait_caution: false,
            collision: false,
            stop_active: false,
            terrain: terrain.into(),
            goal: None,
            landmark_index: 0,
        }
    }

    fn line_log(terrain_at: impl Fn(f64) -> &'static str) -> RunLog {
        RunLog {
            n_landmarks: 1,
            ticks: (0..10).map(|i| rec(i as f64, i as f64, 0.0, 0.0, terrain_at(i as f64))).collect(),
            final_pose: Some(Pose2D::new(10.0, 0.0, 0.0)),
        }
    }

    fn rules() -> Vec<BehaviorRule> {
        vec![
            BehaviorRule::new("stay on", "sidewalk", 0.9),
            BehaviorRule::new("stay away from", "grass", 0.1),
        ]
    }

    #[test]
    fn frechet_examples() {
        let a = pts(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]);
        assert_eq!(frechet(&a, &a).unwrap(), 0.0);
        assert_eq!(frechet(&pts(&[(0.0, 0.0)]), &pts(&[(3.0, 4.0)])).unwrap(), 5.0);
        let b = pts(&[(0.0, 1.0), (1.0, 1.0), (2.0, 1.0)]);
        assert_eq!(frechet(&a, &b).unwrap(), 1.0);
        assert_eq!(frechet_brute(&a, &b), 1.0);
        assert_eq!(frechet(&[], &a), Err(MetricsError::EmptyPath));
    }

    #[test]
    fn resampling() {
        let p = pts(&[(0.0, 0.0), (0.12, 0.0), (0.12, 0.1)]);
        let r = resample(&p, 0.05);
        assert_eq!(r.first(), p.first());
        assert_eq!(r.last(), p.last());
        for w in r.windows(2).take(r.len() - 2) {
            assert!((w[0].distance(w[1]) - 0.05).abs() < 1e-9 || w[0].x != w[1].x && w[0].y != w[1].y);
        }
        // chords cut the corner by at most (1 - 1/sqrt 2) * spacing
        assert!(path_length(&r) <= path_length(&p) + 1e-12);
        assert!(path_length(&r) >= path_length(&p) - 0.3 * 0.05);
        assert_eq!(resample(&pts(&[(1.0, 1.0)]), 0.05), pts(&[(1.0, 1.0)]));
    }

    #[test]
    fn bfa_examples() {
        assert_eq!(bfa(&line_log(|_| "sidewalk"), &rules(), &Thresholds::default()).unwrap(), 100.0);
        let half = line_log(|x| if x < 5.0 { "grass" } else { "sidewalk" });
        assert_eq!(bfa(&half, &rules(), &Thresholds::default()).unwrap(), 50.0);
        let mut still = line_log(|_| "sidewalk");
        for r in &mut still.ticks {
            r.pose = Pose2D::default();
        }
        still.final_pose = Some(Pose2D::default());
        assert_eq!(bfa(&still, &rules(), &Thresholds::default()), Err(MetricsError::ZeroLength));
        // moving through an active stop
        let mut stop = line_log(|_| "sidewalk");
        stop.ticks[0].stop_active = true;
        assert_eq!(bfa(&stop, &rules(), &Thresholds::default()).unwrap(), 90.0);
        // unlabeled terrain is compliant
        assert_eq!(bfa(&line_log(|_| "gravel"), &rules(), &Thresholds::default()).unwrap(), 100.0);
    }

    #[test]
    fn heading_error_examples() {
        let mut log = line_log(|_| "sidewalk");
        for r in &mut log.ticks {
            r.goal = Some(Point2::new(20.0, 0.0));
        }
        assert_eq!(heading_error(&log), 0.0);
        for r in &mut log.ticks {
            r.pose.heading = PI;
        }
        assert_abs_diff_eq!(heading_error(&log), PI, epsilon = 1e-12);
        let two = RunLog {
            n_landmarks: 1,
            ticks: vec![
                TickRecord { goal: Some(Point2::new(5.0, 0.0)), ..rec(0.0, 0.0, 0.0, 0.2, "x") },
                TickRecord { goal: Some(Point2::new(5.0, 0.0)), ..rec(0.1, 0.0, 0.0, -0.4, "x") },
            ],
            final_pose: None,
        };
        assert_abs_diff_eq!(heading_error(&two), 0.3, epsilon = 1e-12);
    }

    #[test]
    fn success_examples() {
        let th = Thresholds::default();
        let mut log = line_log(|_| "sidewalk");
        let last = log.ticks.last_mut().unwrap();
        last.landmark_index = 1;
        last.goal = Some(Point2::new(9.2, 0.0));
        assert!(success(&log, &rules(), 0.5, 60.0, &th));
        assert!(!success(&log, &rules(), 0.5, 5.0, &th));
        let mut hit = log.clone();
        hit.ticks[3].collision = true;
        assert!(!success(&hit, &rules(), 0.5, 60.0, &th));
        let mut grass = log.clone();
        grass.ticks[2].terrain = "grass".into();
        assert!(!success(&grass, &rules(), 0.5, 60.0, &th));
        let mut unfinished = log.clone();
        unfinished.ticks.last_mut().unwrap().landmark_index = 0;
        assert!(!success(&unfinished, &rules(), 0.5, 60.0, &th));
    }

    #[test]
    fn stop_interval_detection() {
        let mut log = line_log(|_| "x");
        for k in 3..6 {
            log.ticks[k].v = 0.0;
        }
        log.ticks[9].v = 0.0;
        assert_eq!(stop_intervals(&log, 1.0), vec![(3.0, 6.0), (9.0, 10.0)]);
    }

    fn path_strategy() -> impl Strategy<Value = Vec<Point2>> {
        prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..8)
            .prop_map(|v| v.into_iter().map(|(x, y)| Point2::new(x, y)).collect())
    }

    proptest! {
        #[test]
        fn frechet_properties(a in path_strategy(), b in path_strategy(), rot in -3.0f64..3.0, tx in -4.0f64..4.0) {
            let d = frechet(&a, &b).unwrap();
            prop_assert_eq!(d, frechet(&b, &a).unwrap());
            prop_assert_eq!(d, frechet_brute(&a, &b));
            prop_assert_eq!(frechet(&a, &a).unwrap(), 0.0);
            prop_assert!(d >= a[0].distance(b[0]));
            prop_assert!(d >= a.last().unwrap().distance(*b.last().unwrap()));
            let pose = Pose2D::new(tx, -tx, rot);
            let ta: Vec<Point2> = a.iter().map(|p| pose.to_world(*p)).collect();
            let tb: Vec<Point2> = b.iter().map(|p| pose.to_world(*p)).collect();
            prop_assert!((frechet(&ta, &tb).unwrap() - d).abs() < 1e-9);
        }

        #[test]
        fn bfa_bounded_and_monotone(labels in prop::collection::vec(0usize..3, 10), flip in 0usize..10) {
            let names = ["sidewalk", "grass", "gravel"];
            let mut log = line_log(|_| "sidewalk");
            for (r, l) in log.ticks.iter_mut().zip(&labels) {
                r.terrain = names[*l].into();
            }
            let th = Thresholds::default();
            let before = bfa(&log, &rules(), &th).unwrap();
            prop_assert!((0.0..=100.0).contains(&before));
            log.ticks[flip].terrain = "grass".into();
            prop_assert!(bfa(&log, &rules(), &th).unwrap() <= before);
        }
    }
}
