//! Kick decision: outcome models, the three-case kick reward, offline value
//! iteration over ball positions and the online one-step search.
//!
//! The field is centered on `origin`, opponents defend the `+x` goal. Ball
//! positions live on a node grid covering the field including its edges; a
//! scored ball leaves the grid into an absorbing terminal state of value 0.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use nalgebra::{Point2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::StrategyError;
use crate::geom::{wrap_angle, Pose2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldModel {
    pub length: f64,
    pub width: f64,
    pub goal_width: f64,
    pub grid_resolution: f64,
    /// Field center in world coordinates.
    pub origin: [f64; 2],
}

impl Default for FieldModel {
    fn default() -> Self {
        Self {
            length: 9.0,
            width: 6.0,
            goal_width: 2.6,
            grid_resolution: 0.1,
            origin: [0.0, 0.0],
        }
    }
}

/// Where a kicked ball ends up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BallOutcome {
    Goal,
    Field,
    Out,
}

impl FieldModel {
    pub fn validate(&self) -> Result<(), StrategyError> {
        let bad = |m: &str| Err(StrategyError::InvalidField(m.to_string()));
        for (name, v) in [
            ("length", self.length),
            ("width", self.width),
            ("goal_width", self.goal_width),
            ("grid_resolution", self.grid_resolution),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(&format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.origin[0].is_finite() && self.origin[1].is_finite()) {
            return bad("origin must be finite");
        }
        if self.goal_width > self.width {
            return bad("goal wider than the field");
        }
        for (name, v) in [("length", self.length), ("width", self.width)] {
            let cells = (v / self.grid_resolution).round();
            if cells < 1.0 || (cells * self.grid_resolution - v).abs() > 1e-9 * v.max(1.0) {
                return bad(&format!(
                    "grid resolution {} does not divide {name} {v}",
                    self.grid_resolution
                ));
            }
        }
        Ok(())
    }

    /// Node counts along x and y.
    pub fn grid_shape(&self) -> (usize, usize) {
        let n = |v: f64| (v / self.grid_resolution).round() as usize + 1;
        (n(self.length), n(self.width))
    }

    fn corner(&self) -> Vector2<f64> {
        Vector2::new(
            self.origin[0] - self.length / 2.0,
            self.origin[1] - self.width / 2.0,
        )
    }

    pub fn node(&self, i: usize, j: usize) -> Point2<f64> {
        let c = self.corner();
        Point2::new(
            c.x + i as f64 * self.grid_resolution,
            c.y + j as f64 * self.grid_resolution,
        )
    }

    /// Nearest grid node to `p`, clamped to the grid.
    pub fn nearest_node(&self, p: &Point2<f64>) -> (usize, usize) {
        let (nx, ny) = self.grid_shape();
        let c = self.corner();
        let idx = |v: f64, n: usize| {
            let k = (v / self.grid_resolution).round();
            k.clamp(0.0, (n - 1) as f64) as usize
        };
        (idx(p.x - c.x, nx), idx(p.y - c.y, ny))
    }

    pub fn contains(&self, p: &Point2<f64>) -> bool {
        let d = p - Point2::from(Vector2::from(self.origin));
        d.x.abs() <= self.length / 2.0 && d.y.abs() <= self.width / 2.0
    }

    /// Endpoints of the opponent goal mouth on the `+x` line.
    pub fn opponent_goal(&self) -> (Point2<f64>, Point2<f64>) {
        let x = self.origin[0] + self.length / 2.0;
        let h = self.goal_width / 2.0;
        (
            Point2::new(x, self.origin[1] - h),
            Point2::new(x, self.origin[1] + h),
        )
    }

    /// Endpoints of our own goal mouth on the `-x` line.
    pub fn own_goal(&self) -> (Point2<f64>, Point2<f64>) {
        let x = self.origin[0] - self.length / 2.0;
        let h = self.goal_width / 2.0;
        (
            Point2::new(x, self.origin[1] - h),
            Point2::new(x, self.origin[1] + h),
        )
    }

    /// Classifies a ball kicked from `from` (on the field) to `to`. The ball
    /// scores when its straight path crosses the opponent goal mouth; a ball
    /// ending outside the field otherwise (own goal included) is out.
    pub fn classify(&self, from: &Point2<f64>, to: &Point2<f64>) -> BallOutcome {
        if self.contains(to) {
            return BallOutcome::Field;
        }
        let line = self.origin[0] + self.length / 2.0;
        if to.x > line && from.x <= line {
            let s = (line - from.x) / (to.x - from.x);
            let y = from.y + s * (to.y - from.y);
            if (y - self.origin[1]).abs() <= self.goal_width / 2.0 {
                return BallOutcome::Goal;
            }
        }
        BallOutcome::Out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KickKind {
    Classic,
    Small,
    Lateral,
    Diag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KickTemplate {
    pub name: KickKind,
    /// Robot pose relative to the ball frame whose x axis is the kick direction.
    pub placement: Pose2,
    pub length_mean: f64,
    pub length_stddev: f64,
    pub angle_stddev: f64,
    /// Ball direction relative to the robot heading.
    pub direction: f64,
}

/// Distance between the robot and the ball at the kick placement.
pub const PLACEMENT_DISTANCE: f64 = 0.15;

impl KickTemplate {
    /// Template with the robot [`PLACEMENT_DISTANCE`] behind the ball along
    /// its own heading.
    pub fn new(name: KickKind, direction: f64, length_mean: f64, length_stddev: f64, angle_stddev: f64) -> Self {
        let direction = wrap_angle(direction);
        let (s, c) = direction.sin_cos();
        Self {
            name,
            placement: Pose2::new(-PLACEMENT_DISTANCE * c, PLACEMENT_DISTANCE * s, -direction),
            length_mean,
            length_stddev,
            angle_stddev,
            direction,
        }
    }

    /// A kick with no spread in length or angle.
    pub fn deterministic(name: KickKind, direction: f64, length: f64) -> Self {
        Self::new(name, direction, length, 0.0, 0.0)
    }

    pub fn validate(&self) -> Result<(), StrategyError> {
        let ok = self.length_mean.is_finite()
            && self.length_mean > 0.0
            && self.length_stddev.is_finite()
            && self.length_stddev >= 0.0
            && self.angle_stddev.is_finite()
            && self.angle_stddev >= 0.0
            && self.direction.is_finite();
        if ok {
            Ok(())
        } else {
            Err(StrategyError::InvalidParams(format!(
                "kick template {:?}: mean length must be positive and spreads nonnegative",
                self.name
            )))
        }
    }

    /// Robot pose, in the world, that performs this kick on `ball` toward `yaw`.
    pub fn placement_pose(&self, ball: &Point2<f64>, yaw: f64) -> Pose2 {
        Pose2::new(ball.x, ball.y, yaw).compose(&self.placement)
    }
}

/// Classic 2 m, small 0.7 m, lateral 0.8 m at ±90° and diagonal 1.2 m at
/// ±45°, all with a 10° angular spread.
pub fn default_templates() -> Vec<KickTemplate> {
    let a = 10f64.to_radians();
    vec![
        KickTemplate::new(KickKind::Classic, 0.0, 2.0, 0.5, a),
        KickTemplate::new(KickKind::Small, 0.0, 0.7, 0.2, a),
        KickTemplate::new(KickKind::Lateral, FRAC_PI_2, 0.8, 0.3, a),
        KickTemplate::new(KickKind::Lateral, -FRAC_PI_2, 0.8, 0.3, a),
        KickTemplate::new(KickKind::Diag, FRAC_PI_4, 1.2, 0.4, a),
        KickTemplate::new(KickKind::Diag, -FRAC_PI_4, 1.2, 0.4, a),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StrategyParams {
    /// Kick duration, seconds.
    pub t_k: f64,
    /// Out-of-field penalty, seconds.
    pub t_p: f64,
    pub walk_speed: f64,
    pub turn_speed: f64,
    /// Length multiplier when kicking straight against the grass.
    pub grass_factor: f64,
    /// Direction the grass blades lean toward.
    pub grass_direction: f64,
    pub collision_probability: f64,
    pub indirect_penalty: f64,
    pub opponent_closer_penalty: f64,
    pub own_goal_obstruction_penalty: f64,
    /// Radius of the disc a robot blocks.
    pub robot_radius: f64,
    /// Own-goal protection zone: depth from the goal line and half width.
    pub own_goal_zone_depth: f64,
    pub own_goal_zone_half_width: f64,
    pub n_samples: usize,
    pub yaw_bins: usize,
    pub vi_tolerance: f64,
    pub vi_max_iterations: usize,
    pub top_fraction: f64,
    pub seed: u64,
}

impl Default for StrategyParams {
    fn default() -> Self {
        Self {
            t_k: 3.0,
            t_p: 60.0,
            walk_speed: 0.3,
            turn_speed: 1.0,
            grass_factor: 0.3,
            grass_direction: 0.0,
            collision_probability: 0.5,
            indirect_penalty: 30.0,
            opponent_closer_penalty: 5.0,
            own_goal_obstruction_penalty: 10.0,
            robot_radius: 0.2,
            own_goal_zone_depth: 1.0,
            own_goal_zone_half_width: 1.8,
            n_samples: 32,
            yaw_bins: 16,
            vi_tolerance: 1e-6,
            vi_max_iterations: 10_000,
            top_fraction: 0.10,
            seed: 42,
        }
    }
}

impl StrategyParams {
    pub fn validate(&self) -> Result<(), StrategyError> {
        let bad = |m: String| Err(StrategyError::InvalidParams(m));
        for (name, v) in [
            ("t_k", self.t_k),
            ("t_p", self.t_p),
            ("walk_speed", self.walk_speed),
            ("turn_speed", self.turn_speed),
            ("vi_tolerance", self.vi_tolerance),
        ] {
            // infinite speeds are allowed: they switch the walk term off
            if v.is_nan() || v <= 0.0 || (v.is_infinite() && !name.ends_with("speed")) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [
            ("grass_factor", self.grass_factor),
            ("collision_probability", self.collision_probability),
            ("top_fraction", self.top_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        for (name, v) in [
            ("indirect_penalty", self.indirect_penalty),
            ("opponent_closer_penalty", self.opponent_closer_penalty),
            ("own_goal_obstruction_penalty", self.own_goal_obstruction_penalty),
            ("robot_radius", self.robot_radius),
            ("own_goal_zone_depth", self.own_goal_zone_depth),
            ("own_goal_zone_half_width", self.own_goal_zone_half_width),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be nonnegative, got {v}"));
            }
        }
        if !self.grass_direction.is_finite() {
            return bad("grass_direction must be finite".into());
        }
        if self.n_samples == 0 {
            return bad("n_samples must be at least 1".into());
        }
        if self.yaw_bins == 0 {
            return bad("yaw_bins must be at least 1".into());
        }
        if self.vi_max_iterations == 0 {
            return bad("vi_max_iterations must be at least 1".into());
        }
        Ok(())
    }

    /// Whether `other` yields the same baseline grid. Only the online
    /// augmentation terms may differ.
    pub fn same_baseline(&self, other: &StrategyParams) -> bool {
        self.t_k == other.t_k
            && self.t_p == other.t_p
            && self.walk_speed == other.walk_speed
            && self.turn_speed == other.turn_speed
            && self.grass_factor == other.grass_factor
            && self.grass_direction == other.grass_direction
            && self.n_samples == other.n_samples
            && self.yaw_bins == other.yaw_bins
            && self.vi_tolerance == other.vi_tolerance
            && self.vi_max_iterations == other.vi_max_iterations
            && self.seed == other.seed
    }

    /// Kick directions: `yaw_bins` values evenly spread over `(-π, π]`.
    pub fn yaws(&self) -> Vec<f64> {
        let n = self.yaw_bins as f64;
        (0..self.yaw_bins)
            .map(|k| wrap_angle(-PI + (k + 1) as f64 * 2.0 * PI / n))
            .collect()
    }

    /// Length multiplier for a kick travelling toward `angle`: `grass_factor`
    /// straight against the grass, 1 across or along it, cosine-blended between.
    pub fn grass_attenuation(&self, angle: f64) -> f64 {
        let against = (-(angle - self.grass_direction).cos()).max(0.0);
        1.0 - (1.0 - self.grass_factor) * against
    }

    fn walk_term(&self, distance: f64, turn: f64) -> f64 {
        let lin = if self.walk_speed.is_infinite() { 0.0 } else { distance / self.walk_speed };
        let ang = if self.turn_speed.is_infinite() { 0.0 } else { turn.abs() / self.turn_speed };
        lin + ang
    }

    /// Time for a robot at `pose` to walk to `target`: distance over walk
    /// speed plus the heading change toward the target over turn speed.
    pub fn walk_time(&self, pose: &Pose2, target: &Point2<f64>) -> f64 {
        let d = Vector2::new(target.x - pose.x, target.y - pose.y);
        let dist = d.norm();
        if dist < 1e-12 {
            return 0.0;
        }
        let turn = wrap_angle(d.y.atan2(d.x) - pose.theta);
        self.walk_term(dist, turn)
    }
}

/// Ball displacement for standard-normal draws `z_length`, `z_angle`.
pub fn kick_displacement(
    yaw: f64,
    template: &KickTemplate,
    params: &StrategyParams,
    z_length: f64,
    z_angle: f64,
) -> Vector2<f64> {
    let length = (template.length_mean + template.length_stddev * z_length).max(0.0);
    let angle = yaw + template.angle_stddev * z_angle;
    let length = length * params.grass_attenuation(angle);
    Vector2::new(length * angle.cos(), length * angle.sin())
}

/// Samples where a kick of `template` toward `yaw` sends the ball.
pub fn sample_kick<R: Rng + ?Sized>(
    ball: &Point2<f64>,
    yaw: f64,
    template: &KickTemplate,
    params: &StrategyParams,
    rng: &mut R,
) -> Point2<f64> {
    let z_length: f64 = rng.sample(StandardNormal);
    let z_angle: f64 = rng.sample(StandardNormal);
    ball + kick_displacement(yaw, template, params, z_length, z_angle)
}

/// The kick reward: `-t_k` on a goal, `-t_k - walk_time` on the field and
/// `-t_p` out of the field.
pub fn reward(
    s: &Point2<f64>,
    destination: &Point2<f64>,
    field: &FieldModel,
    params: &StrategyParams,
    walk_time: f64,
) -> f64 {
    match field.classify(s, destination) {
        BallOutcome::Goal => -params.t_k,
        BallOutcome::Field => -params.t_k - walk_time,
        BallOutcome::Out => -params.t_p,
    }
}

/// Standard-normal draws shared by every cell and yaw: `[template][sample]`
/// pairs of (length, angle). Reusing one table is what makes the sweeps and
/// the online evaluation deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseTable {
    draws: Vec<Vec<(f64, f64)>>,
}

impl NoiseTable {
    pub fn new(n_templates: usize, n_samples: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draws = (0..n_templates)
            .map(|_| {
                (0..n_samples)
                    .map(|_| (rng.sample(StandardNormal), rng.sample(StandardNormal)))
                    .collect()
            })
            .collect();
        Self { draws }
    }

    pub fn template(&self, t: usize) -> &[(f64, f64)] {
        &self.draws[t]
    }
}

/// One (template, yaw) action with its sampled displacements.
#[derive(Debug, Clone)]
struct ActionSamples {
    template: usize,
    yaw: f64,
    /// Displacement and walk time from the kick spot to the landing point.
    samples: Vec<(Vector2<f64>, f64)>,
}

fn action_samples(templates: &[KickTemplate], params: &StrategyParams) -> Vec<ActionSamples> {
    let noise = NoiseTable::new(templates.len(), params.n_samples, params.seed);
    let yaws = params.yaws();
    let mut out = Vec::with_capacity(templates.len() * yaws.len());
    for (t, template) in templates.iter().enumerate() {
        for &yaw in &yaws {
            let heading = wrap_angle(yaw - template.direction);
            let samples = noise
                .template(t)
                .iter()
                .map(|&(zl, za)| {
                    let d = kick_displacement(yaw, template, params, zl, za);
                    let dist = d.norm();
                    let walk = if dist < 1e-12 {
                        0.0
                    } else {
                        params.walk_term(dist, wrap_angle(d.y.atan2(d.x) - heading))
                    };
                    (d, walk)
                })
                .collect();
            out.push(ActionSamples { template: t, yaw, samples });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueGrid {
    pub field: FieldModel,
    pub nx: usize,
    pub ny: usize,
    /// Node values in seconds, x fastest: `values[j * nx + i]`.
    pub values: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Sup-norm change of the last sweep.
    pub residual: f64,
}

impl ValueGrid {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    /// Value of the nearest node to `p`.
    pub fn value_at(&self, p: &Point2<f64>) -> f64 {
        let (i, j) = self.field.nearest_node(p);
        self.at(i, j)
    }

    pub fn check_geometry(&self, field: &FieldModel) -> Result<(), StrategyError> {
        if self.values.is_empty() {
            return Err(StrategyError::EmptyGrid);
        }
        let (nx, ny) = field.grid_shape();
        if self.field != *field || self.nx != nx || self.ny != ny || self.values.len() != nx * ny {
            return Err(StrategyError::GeometryMismatch);
        }
        Ok(())
    }
}

fn validate_all(field: &FieldModel, templates: &[KickTemplate], params: &StrategyParams) -> Result<(), StrategyError> {
    field.validate()?;
    params.validate()?;
    if templates.is_empty() {
        return Err(StrategyError::NoTemplates);
    }
    templates.iter().try_for_each(KickTemplate::validate)
}

/// Bellman backup at `s` against the current `values`.
fn backup(s: &Point2<f64>, field: &FieldModel, values: &[f64], nx: usize, actions: &[ActionSamples], params: &StrategyParams) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for a in actions {
        let mut total = 0.0;
        for (d, walk) in &a.samples {
            let to = s + d;
            total += match field.classify(s, &to) {
                BallOutcome::Goal => -params.t_k,
                BallOutcome::Out => -params.t_p,
                BallOutcome::Field => {
                    let (i, j) = field.nearest_node(&to);
                    -params.t_k - walk + values[j * nx + i]
                }
            };
        }
        best = best.max(total / a.samples.len() as f64);
    }
    best
}

/// Value iteration from `V = 0` with Jacobi sweeps evaluated in parallel.
/// Stops once a sweep changes no value by `vi_tolerance` or more; at the
/// iteration cap the grid is returned with `converged = false`.
pub fn value_iteration(
    field: &FieldModel,
    templates: &[KickTemplate],
    params: &StrategyParams,
) -> Result<ValueGrid, StrategyError> {
    validate_all(field, templates, params)?;
    let actions = action_samples(templates, params);
    let (nx, ny) = field.grid_shape();
    let nodes: Vec<Point2<f64>> = (0..ny)
        .flat_map(|j| (0..nx).map(move |i| (i, j)))
        .map(|(i, j)| field.node(i, j))
        .collect();
    let mut values = vec![0.0; nx * ny];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < params.vi_max_iterations {
        let next: Vec<f64> = nodes
            .par_iter()
            .map(|s| backup(s, field, &values, nx, &actions, params))
            .collect();
        residual = next
            .iter()
            .zip(&values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        values = next;
        iterations += 1;
        if residual < params.vi_tolerance {
            break;
        }
    }
    Ok(ValueGrid {
        field: *field,
        nx,
        ny,
        values,
        iterations,
        converged: residual < params.vi_tolerance,
        residual,
    })
}

/// A game situation: ball, allied robot poses, opponent positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub ball: [f64; 2],
    /// `[x, y, theta]` of each ally; the acting robot is one of them.
    #[serde(default)]
    pub allies: Vec<[f64; 3]>,
    #[serde(default)]
    pub opponents: Vec<[f64; 2]>,
    /// Indirect free kick: scoring directly is not allowed.
    #[serde(default)]
    pub indirect: bool,
    /// Index of the acting robot in `allies`.
    #[serde(default)]
    pub robot: usize,
}

impl Scenario {
    pub fn ball(&self) -> Point2<f64> {
        Point2::new(self.ball[0], self.ball[1])
    }

    pub fn ally(&self, k: usize) -> Pose2 {
        let a = self.allies[k];
        Pose2::new(a[0], a[1], a[2])
    }

    pub fn robot_pose(&self) -> Pose2 {
        self.ally(self.robot)
    }

    pub fn opponent(&self, k: usize) -> Point2<f64> {
        Point2::new(self.opponents[k][0], self.opponents[k][1])
    }

    pub fn validate(&self, field: &FieldModel) -> Result<(), StrategyError> {
        if !field.contains(&self.ball()) {
            return Err(StrategyError::InvalidParams(format!(
                "ball ({}, {}) is outside the field",
                self.ball[0], self.ball[1]
            )));
        }
        if self.robot >= self.allies.len() {
            return Err(StrategyError::BadRobotIndex(self.robot));
        }
        let finite = self.ball.iter().all(|v| v.is_finite())
            && self.allies.iter().flatten().all(|v| v.is_finite())
            && self.opponents.iter().flatten().all(|v| v.is_finite());
        if !finite {
            return Err(StrategyError::InvalidParams("scenario has non-finite coordinates".into()));
        }
        Ok(())
    }
}

/// One candidate kick with its expected augmented value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedAction {
    /// Position in the (template, yaw) enumeration.
    pub index: usize,
    pub template: usize,
    pub name: KickKind,
    pub direction: f64,
    pub yaw: f64,
    pub placement: Pose2,
    pub value: f64,
    pub own_goal_obstruction: bool,
}

/// Entry distance of a ray from `from` along unit `dir` (travelling at most
/// `len`) into the disc around `c`, or `None` if it misses. A ray that starts
/// inside the disc is blocked immediately.
fn disc_entry(from: &Point2<f64>, dir: &Vector2<f64>, len: f64, c: &Point2<f64>, r: f64) -> Option<f64> {
    let m = from - c;
    let b = m.dot(dir);
    let cc = m.norm_squared() - r * r;
    if cc <= 0.0 {
        return Some(0.0);
    }
    let disc = b * b - cc;
    if b > 0.0 || disc < 0.0 {
        return None;
    }
    let t = -b - disc.sqrt();
    (t <= len).then_some(t)
}

fn segments_intersect(p1: &Point2<f64>, p2: &Point2<f64>, q1: &Point2<f64>, q2: &Point2<f64>) -> bool {
    let cross = |o: &Point2<f64>, a: &Point2<f64>, b: &Point2<f64>| (a - o).perp(&(b - o));
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    let on = |o: &Point2<f64>, a: &Point2<f64>, p: &Point2<f64>| {
        p.x >= o.x.min(a.x) && p.x <= o.x.max(a.x) && p.y >= o.y.min(a.y) && p.y <= o.y.max(a.y)
    };
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on(q1, q2, p1))
        || (d2 == 0.0 && on(q1, q2, p2))
        || (d3 == 0.0 && on(p1, p2, q1))
        || (d4 == 0.0 && on(p1, p2, q2))
}

/// Whether walking from `from` to `to` enters the protection zone in front
/// of our goal.
pub fn crosses_own_goal_zone(from: &Point2<f64>, to: &Point2<f64>, field: &FieldModel, params: &StrategyParams) -> bool {
    let x0 = field.origin[0] - field.length / 2.0;
    let x1 = x0 + params.own_goal_zone_depth;
    let y0 = field.origin[1] - params.own_goal_zone_half_width;
    let y1 = field.origin[1] + params.own_goal_zone_half_width;
    let inside = |p: &Point2<f64>| p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1;
    if inside(from) || inside(to) {
        return true;
    }
    let c = [
        Point2::new(x0, y0),
        Point2::new(x1, y0),
        Point2::new(x1, y1),
        Point2::new(x0, y1),
    ];
    (0..4).any(|k| segments_intersect(from, to, &c[k], &c[(k + 1) % 4]))
}

/// Online evaluator for one scenario against a baseline grid.
struct Online<'a> {
    scenario: &'a Scenario,
    grid: &'a ValueGrid,
    field: &'a FieldModel,
    params: &'a StrategyParams,
    /// Robots that can block the ball: other allies then opponents.
    blockers: Vec<Point2<f64>>,
    opponents: Vec<Point2<f64>>,
}

impl Online<'_> {
    /// Augmented reward plus baseline value of a ball resting at `at`, kicked
    /// from `ball`, with the acting robot standing at `kicker`.
    fn leaf(&self, ball: &Point2<f64>, at: &Point2<f64>, kicker: &Pose2) -> f64 {
        let p = self.params;
        match self.field.classify(ball, at) {
            BallOutcome::Goal => {
                if self.scenario.indirect {
                    -p.t_k - p.indirect_penalty
                } else {
                    -p.t_k
                }
            }
            BallOutcome::Out => -p.t_p,
            BallOutcome::Field => {
                let mut ally_walk = p.walk_time(kicker, at);
                let mut ally_dist = (kicker.translation() - at.coords).norm();
                for k in 0..self.scenario.allies.len() {
                    if k == self.scenario.robot {
                        continue;
                    }
                    let a = self.scenario.ally(k);
                    ally_walk = ally_walk.min(p.walk_time(&a, at));
                    ally_dist = ally_dist.min((a.translation() - at.coords).norm());
                }
                let opp_dist = self
                    .opponents
                    .iter()
                    .map(|o| (o - at).norm())
                    .fold(f64::INFINITY, f64::min);
                let closer = if opp_dist < ally_dist { p.opponent_closer_penalty } else { 0.0 };
                -p.t_k - ally_walk - closer + self.grid.value_at(at)
            }
        }
    }

    /// Value of a kick from `ball` to `dest`, blending blocked and free
    /// branches at every robot disc along the path, nearest first.
    fn kick_value(&self, ball: &Point2<f64>, dest: &Point2<f64>, kicker: &Pose2) -> f64 {
        let d = dest - ball;
        let len = d.norm();
        let pc = self.params.collision_probability;
        if len < 1e-12 || pc == 0.0 {
            return self.leaf(ball, dest, kicker);
        }
        let dir = d / len;
        let mut hits: Vec<f64> = self
            .blockers
            .iter()
            .filter_map(|c| disc_entry(ball, &dir, len, c, self.params.robot_radius))
            .collect();
        hits.sort_by(f64::total_cmp);
        let mut value = 0.0;
        let mut reach = 1.0;
        for t in hits {
            let stop = ball + dir * t;
            value += reach * pc * self.leaf(ball, &stop, kicker);
            reach *= 1.0 - pc;
        }
        value + reach * self.leaf(ball, dest, kicker)
    }
}

/// Every (template, yaw) action with its expected augmented value, best
/// first. Ties keep enumeration order.
pub fn evaluate_actions(
    scenario: &Scenario,
    grid: &ValueGrid,
    field: &FieldModel,
    templates: &[KickTemplate],
    params: &StrategyParams,
) -> Result<Vec<RankedAction>, StrategyError> {
    validate_all(field, templates, params)?;
    grid.check_geometry(field)?;
    scenario.validate(field)?;
    let ball = scenario.ball();
    let robot = scenario.robot_pose();
    let mut blockers: Vec<Point2<f64>> = (0..scenario.allies.len())
        .filter(|&k| k != scenario.robot)
        .map(|k| {
            let a = scenario.ally(k);
            Point2::new(a.x, a.y)
        })
        .collect();
    let opponents: Vec<Point2<f64>> = (0..scenario.opponents.len()).map(|k| scenario.opponent(k)).collect();
    blockers.extend(opponents.iter().copied());
    let online = Online {
        scenario,
        grid,
        field,
        params,
        blockers,
        opponents,
    };
    let actions = action_samples(templates, params);
    let mut ranked: Vec<RankedAction> = actions
        .par_iter()
        .enumerate()
        .map(|(index, a)| {
            let template = &templates[a.template];
            let placement = template.placement_pose(&ball, a.yaw);
            let obstruct = crosses_own_goal_zone(
                &Point2::new(robot.x, robot.y),
                &Point2::new(placement.x, placement.y),
                field,
                params,
            );
            let total: f64 = a
                .samples
                .iter()
                .map(|(d, _)| online.kick_value(&ball, &(ball + d), &placement))
                .sum();
            let mut value = total / a.samples.len() as f64;
            if obstruct {
                value -= params.own_goal_obstruction_penalty;
            }
            RankedAction {
                index,
                template: a.template,
                name: template.name,
                direction: template.direction,
                yaw: a.yaw,
                placement,
                value,
                own_goal_obstruction: obstruct,
            }
        })
        .collect();
    ranked.sort_by(|a, b| b.value.total_cmp(&a.value).then(a.index.cmp(&b.index)));
    Ok(ranked)
}

/// Sampled ball destinations of `action`, before any collision, for display.
pub fn sample_outcomes(
    scenario: &Scenario,
    action: &RankedAction,
    templates: &[KickTemplate],
    params: &StrategyParams,
) -> Vec<[f64; 2]> {
    let noise = NoiseTable::new(templates.len(), params.n_samples, params.seed);
    let ball = scenario.ball();
    noise
        .template(action.template)
        .iter()
        .map(|&(zl, za)| {
            let p = ball + kick_displacement(action.yaw, &templates[action.template], params, zl, za);
            [p.x, p.y]
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    /// Position in the ranked list.
    pub rank: usize,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// The top-fraction candidates with their step estimates, in rank order.
    pub candidates: Vec<Candidate>,
    /// Rank of the chosen action.
    pub chosen: usize,
}

/// Number of actions kept by `top_fraction`, at least one.
pub fn top_count(n: usize, top_fraction: f64) -> usize {
    ((n as f64 * top_fraction).ceil() as usize).clamp(1, n.max(1))
}

/// Among the top `top_fraction` of `ranked` (sorted best first), picks the
/// action whose placement needs the fewest steps from `robot`; ties go to the
/// higher value, then to the earlier enumeration index.
pub fn select_with_footsteps(
    ranked: &[RankedAction],
    robot: &Pose2,
    params: &StrategyParams,
    estimate: &dyn Fn(&Pose2, &Pose2) -> usize,
) -> Result<Selection, StrategyError> {
    if ranked.is_empty() {
        return Err(StrategyError::InvalidParams("no actions to select from".into()));
    }
    let k = top_count(ranked.len(), params.top_fraction);
    let candidates: Vec<Candidate> = ranked[..k]
        .iter()
        .enumerate()
        .map(|(rank, a)| Candidate {
            rank,
            steps: estimate(robot, &a.placement),
        })
        .collect();
    let chosen = candidates
        .iter()
        .min_by(|a, b| {
            let (ra, rb) = (&ranked[a.rank], &ranked[b.rank]);
            a.steps
                .cmp(&b.steps)
                .then(rb.value.total_cmp(&ra.value))
                .then(ra.index.cmp(&rb.index))
        })
        .map(|c| c.rank)
        .unwrap_or(0);
    Ok(Selection { candidates, chosen })
}
