//! Footstep environment and planner.
//!
//! Steps are purely geometric: the next support foot is placed relative to
//! the *neutral frame* of the current support foot, which is the support
//! pose shifted laterally by the feet spacing toward the swing foot's side
//! (where the swing foot lands for a zero action). Actions are clipped to
//! an ellipsoid over `(dx, dy, dθ)`, the support side alternates, and
//! termination is judged on the neutral frame against the target.

use std::f64::consts::PI;

use nalgebra::{Point2, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{wrap_angle, Pose2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    /// +1 for left, −1 for right.
    pub fn sign(self) -> f64 {
        match self {
            Side::Left => 1.0,
            Side::Right => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepParams {
    pub dx_max: f64,
    pub dy_max: f64,
    pub dtheta_max: f64,
    pub feet_spacing: f64,
    pub tol_x: f64,
    pub tol_theta: f64,
    pub step_cost: f64,
    pub shaping_alpha: f64,
    pub ball_collision_penalty: f64,
    pub ball_radius: f64,
    pub foot_length: f64,
    pub foot_width: f64,
}

impl Default for StepParams {
    fn default() -> Self {
        Self {
            dx_max: 0.08,
            dy_max: 0.04,
            dtheta_max: 0.35,
            feet_spacing: 0.10,
            tol_x: 0.05,
            tol_theta: 0.17,
            step_cost: 1.0,
            shaping_alpha: 1.0,
            ball_collision_penalty: 10.0,
            ball_radius: 0.075,
            foot_length: 0.14,
            foot_width: 0.08,
        }
    }
}

impl StepParams {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("dx_max", self.dx_max),
            ("dy_max", self.dy_max),
            ("dtheta_max", self.dtheta_max),
            ("feet_spacing", self.feet_spacing),
            ("tol_x", self.tol_x),
            ("tol_theta", self.tol_theta),
            ("foot_length", self.foot_length),
            ("foot_width", self.foot_width),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive"));
            }
        }
        if !(self.shaping_alpha >= 0.0) || !(self.ball_radius >= 0.0) {
            return Err("shaping_alpha and ball_radius must be non-negative".into());
        }
        Ok(())
    }

    pub fn foot_half_diagonal(&self) -> f64 {
        0.5 * self.foot_length.hypot(self.foot_width)
    }

    /// Minimum distance between a foot center and the ball center.
    pub fn ball_clearance(&self) -> f64 {
        self.ball_radius + self.foot_half_diagonal()
    }

    /// Offset from a support foot on `side` to its neutral frame.
    pub fn neutral_offset(&self, side: Side) -> Pose2 {
        Pose2::new(0.0, -side.sign() * self.feet_spacing, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FootstepState {
    #[serde(flatten)]
    pub support_pose: Pose2,
    #[serde(rename = "side")]
    pub support_side: Side,
}

impl FootstepState {
    pub fn new(support_pose: Pose2, support_side: Side) -> Self {
        Self {
            support_pose,
            support_side,
        }
    }

    /// Start state for a robot whose feet are centered on `robot`, left foot supporting.
    pub fn from_robot_pose(robot: &Pose2, p: &StepParams) -> Self {
        Self::new(robot.compose(&Pose2::new(0.0, p.feet_spacing / 2.0, 0.0)), Side::Left)
    }

    pub fn neutral_frame(&self, p: &StepParams) -> Pose2 {
        self.support_pose.compose(&p.neutral_offset(self.support_side))
    }
}

/// Target for the neutral frame when the robot's feet should end centered on `robot`.
pub fn neutral_target_for_robot_pose(robot: &Pose2, p: &StepParams) -> Pose2 {
    robot.compose(&Pose2::new(0.0, -p.feet_spacing / 2.0, 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct StepAction {
    pub dx: f64,
    pub dy: f64,
    pub dtheta: f64,
}

impl StepAction {
    pub fn new(dx: f64, dy: f64, dtheta: f64) -> Self {
        Self { dx, dy, dtheta }
    }

    pub fn normalized_radius(&self, p: &StepParams) -> f64 {
        ((self.dx / p.dx_max).powi(2) + (self.dy / p.dy_max).powi(2) + (self.dtheta / p.dtheta_max).powi(2)).sqrt()
    }

    fn scaled(&self, k: f64) -> Self {
        Self::new(self.dx * k, self.dy * k, self.dtheta * k)
    }
}

/// Radially scales `a` back onto the step ellipsoid when it lies outside.
pub fn clip_action(a: &StepAction, p: &StepParams) -> StepAction {
    let s = a.normalized_radius(p);
    // the tolerance keeps clipping idempotent under rounding
    if s <= 1.0 + 1e-12 {
        *a
    } else {
        a.scaled(1.0 / s)
    }
}

pub fn step(state: &FootstepState, a: &StepAction, p: &StepParams) -> FootstepState {
    let neutral = state.neutral_frame(p);
    FootstepState::new(
        neutral.compose(&Pose2::new(a.dx, a.dy, a.dtheta)),
        state.support_side.opposite(),
    )
}

/// Support pose expressed in the target frame, plus the support side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub pose: Pose2,
    pub side: Side,
}

pub fn observe(state: &FootstepState, target: &Pose2) -> Observation {
    Observation {
        pose: target.relative(&state.support_pose),
        side: state.support_side,
    }
}

/// Shaping potential of a neutral frame: distance plus angular error
/// weighted by `tol_x / tol_theta`.
pub fn potential(neutral: &Pose2, target: &Pose2, p: &StepParams) -> f64 {
    neutral.distance(target) + (p.tol_x / p.tol_theta) * wrap_angle(neutral.theta - target.theta).abs()
}

pub fn collides_with_ball(support: &Pose2, ball: &Point2<f64>, p: &StepParams) -> bool {
    (support.translation() - ball.coords).norm() < p.ball_clearance()
}

pub fn reward(
    state: &FootstepState,
    _a: &StepAction,
    next: &FootstepState,
    ball: Option<&Point2<f64>>,
    target: &Pose2,
    p: &StepParams,
) -> f64 {
    let before = potential(&state.neutral_frame(p), target, p);
    let after = potential(&next.neutral_frame(p), target, p);
    let mut r = -p.step_cost - p.shaping_alpha * (after - before);
    if let Some(b) = ball {
        if collides_with_ball(&next.support_pose, b, p) {
            r -= p.ball_collision_penalty;
        }
    }
    r
}

pub fn is_done(state: &FootstepState, target: &Pose2, p: &StepParams) -> bool {
    let n = state.neutral_frame(p);
    n.distance(target) <= p.tol_x && wrap_angle(n.theta - target.theta).abs() <= p.tol_theta
}

/// What a policy sees: the observation and, if any, the ball in the target frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyInput {
    pub observation: Observation,
    pub ball: Option<Point2<f64>>,
}

/// Maps an observation to a step. Learned policies plug in here.
pub trait StepPolicy: Send + Sync {
    fn action(&self, input: &PolicyInput, p: &StepParams) -> StepAction;
}

impl<F> StepPolicy for F
where
    F: Fn(&PolicyInput, &StepParams) -> StepAction + Send + Sync,
{
    fn action(&self, input: &PolicyInput, p: &StepParams) -> StepAction {
        self(input, p)
    }
}

/// Deterministic hand-written policy: turn toward the target (or a detour
/// waypoint around the ball), walk forward, then aim the last steps so the
/// neutral frame lands on the target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselinePolicy {
    /// Fraction of the step ellipsoid used while walking.
    pub cruise: f64,
    /// Distance below which steps aim directly at the target.
    pub approach_radius: f64,
    /// Extra clearance kept around the ball when detouring.
    pub ball_margin: f64,
}

impl Default for BaselinePolicy {
    fn default() -> Self {
        Self {
            cruise: 0.9,
            approach_radius: 0.25,
            ball_margin: 0.05,
        }
    }
}

impl BaselinePolicy {
    fn waypoint(&self, body: &Pose2, ball: Option<&Point2<f64>>, p: &StepParams) -> Vector2<f64> {
        let goal = Vector2::zeros();
        let Some(ball) = ball else { return goal };
        let from = body.translation();
        let radius = p.ball_clearance() + p.feet_spacing / 2.0 + self.ball_margin;
        let seg = goal - from;
        let len2 = seg.norm_squared();
        if len2 < 1e-12 {
            return goal;
        }
        let t = ((ball.coords - from).dot(&seg) / len2).clamp(0.0, 1.0);
        let closest = from + seg * t;
        if (closest - ball.coords).norm() >= radius || t <= 0.0 || t >= 1.0 {
            return goal;
        }
        let dir = seg / len2.sqrt();
        let perp = Vector2::new(-dir.y, dir.x);
        let rel = ball.coords - from;
        // pass on the side opposite to the ball's offset from the line
        let side = if perp.dot(&rel) > 0.0 { -1.0 } else { 1.0 };
        ball.coords + perp * side * (radius + 0.05)
    }
}

impl StepPolicy for BaselinePolicy {
    fn action(&self, input: &PolicyInput, p: &StepParams) -> StepAction {
        let obs = &input.observation;
        let support = obs.pose;
        let neutral = support.compose(&p.neutral_offset(obs.side));
        let body = support.compose(&Pose2::new(0.0, -obs.side.sign() * p.feet_spacing / 2.0, 0.0));
        let next_side = obs.side.opposite();
        let cruise_clip = |a: StepAction| {
            let s = a.normalized_radius(p);
            if s <= self.cruise {
                a
            } else {
                a.scaled(self.cruise / s)
            }
        };

        if neutral.translation().norm() <= self.approach_radius {
            // land the next support so that its neutral frame is the target
            let goal = p.neutral_offset(next_side).inverse();
            let rel = neutral.relative(&goal);
            return cruise_clip(StepAction::new(rel.x, rel.y, rel.theta));
        }

        let w = self.waypoint(&body, input.ball.as_ref(), p);
        let to = w - body.translation();
        let heading = wrap_angle(to.y.atan2(to.x) - support.theta);
        let dtheta = heading.clamp(-p.dtheta_max, p.dtheta_max);
        let forward = if heading.abs() < PI / 2.0 {
            p.dx_max * heading.cos()
        } else {
            0.0
        };
        cruise_clip(StepAction::new(forward, 0.0, dtheta))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FootstepError {
    #[error("no plan within {cap} steps")]
    NotConverged { cap: usize, partial: Vec<FootstepState> },
    #[error("every reachable placement collides with the ball after {} steps", partial.len())]
    BallBlocked { partial: Vec<FootstepState> },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// Replaces a colliding action by the closest non-colliding one on a fixed
/// candidate lattice inside the step ellipsoid. `None` when every candidate collides.
fn avoid_ball(
    state: &FootstepState,
    a: StepAction,
    ball: Option<&Point2<f64>>,
    p: &StepParams,
) -> Option<StepAction> {
    let Some(ball) = ball else { return Some(a) };
    if !collides_with_ball(&step(state, &a, p).support_pose, ball, p) {
        return Some(a);
    }
    const N: i32 = 6;
    let mut best: Option<(f64, StepAction)> = None;
    for i in -N..=N {
        for j in -N..=N {
            for k in -N..=N {
                let c = StepAction::new(
                    p.dx_max * i as f64 / N as f64,
                    p.dy_max * j as f64 / N as f64,
                    p.dtheta_max * k as f64 / N as f64,
                );
                if c.normalized_radius(p) > 1.0 {
                    continue;
                }
                if collides_with_ball(&step(state, &c, p).support_pose, ball, p) {
                    continue;
                }
                let d = ((c.dx - a.dx) / p.dx_max).powi(2)
                    + ((c.dy - a.dy) / p.dy_max).powi(2)
                    + ((c.dtheta - a.dtheta) / p.dtheta_max).powi(2);
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, c));
                }
            }
        }
    }
    best.map(|(_, c)| c)
}

/// Rolls `policy` out from `start` until the target is reached.
///
/// The returned list excludes `start`. Every action is clipped before use,
/// and with a ball present colliding placements are replaced by the
/// nearest collision-free action.
pub fn plan(
    start: &FootstepState,
    target: &Pose2,
    ball: Option<&Point2<f64>>,
    p: &StepParams,
    policy: &dyn StepPolicy,
    step_cap: usize,
) -> Result<Vec<FootstepState>, FootstepError> {
    p.validate().map_err(FootstepError::InvalidParams)?;
    if step_cap == 0 {
        return Err(FootstepError::InvalidParams("step_cap must be positive".into()));
    }
    let ball_local = ball.map(|b| {
        let inv = target.inverse();
        inv.transform_point(b)
    });
    let mut state = *start;
    let mut steps = Vec::new();
    while !is_done(&state, target, p) {
        if steps.len() == step_cap {
            return Err(FootstepError::NotConverged {
                cap: step_cap,
                partial: steps,
            });
        }
        let input = PolicyInput {
            observation: observe(&state, target),
            ball: ball_local,
        };
        let a = clip_action(&policy.action(&input, p), p);
        let Some(a) = avoid_ball(&state, a, ball, p) else {
            return Err(FootstepError::BallBlocked { partial: steps });
        };
        state = step(&state, &a, p);
        steps.push(state);
    }
    Ok(steps)
}

/// Returned by [`estimate_step_count`] when the planner does not converge.
pub const NON_CONVERGED_STEPS: usize = 10_000;
pub const DEFAULT_STEP_CAP: usize = 200;

/// Number of steps the baseline policy needs to bring a robot centered on
/// `robot_pose` to `kick_pose`.
pub fn estimate_step_count(robot_pose: &Pose2, kick_pose: &Pose2, p: &StepParams) -> usize {
    estimate_step_count_with(robot_pose, kick_pose, p, &BaselinePolicy::default())
}

pub fn estimate_step_count_with(
    robot_pose: &Pose2,
    kick_pose: &Pose2,
    p: &StepParams,
    policy: &dyn StepPolicy,
) -> usize {
    let start = FootstepState::from_robot_pose(robot_pose, p);
    let target = neutral_target_for_robot_pose(kick_pose, p);
    match plan(&start, &target, None, p, policy, DEFAULT_STEP_CAP) {
        Ok(steps) => steps.len(),
        Err(_) => NON_CONVERGED_STEPS,
    }
}

pub fn plan_to_json(steps: &[FootstepState]) -> serde_json::Value {
    serde_json::to_value(steps).expect("footstep states serialize")
}
