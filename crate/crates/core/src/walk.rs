//! Walk engine: footsteps → support schedule → CoM preview → IK targets.
//!
//! A [`WalkSession`] owns the phase timeline and the current CoM plan. Each
//! [`WalkSession::tick`] advances a *trajectory clock* that normally follows
//! the wall clock but freezes at the end of a single-support phase until the
//! swing foot reports contact, and replans the CoM from the planned state at
//! a fixed cadence.

use nalgebra::{Isometry3, Point2, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, IkError, WalkError};
use crate::footsteps::{self, BaselinePolicy, FootstepError, FootstepState, Side, StepParams};
use crate::geom::{cubic_between, wrap_angle, CubicSegment, Pose2};
use crate::kinematics::{Configuration, RobotModel};
use crate::preview::{
    build_schedule, phase_at, phases, plan_com, terminal_for, ComState, ComTrajectory, Phase, PhaseKind, Placement,
    PreviewParams, Timing,
};
use crate::wbik::{self, FrameNames, Hardness, IkMode, IkParams, JointTrajectory, Task, TaskFrame, TaskTarget};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WalkParams {
    pub single_support: f64,
    pub double_support: f64,
    pub initial_double_support: f64,
    pub control_period: f64,
    pub replan_period: f64,
    pub swing_height: f64,
    pub swing_plateau_ratio: f64,
    pub trunk_pitch: f64,
    pub mode: IkMode,
    /// Longest freeze waiting for swing contact before the phase is forced.
    pub contact_timeout: f64,
    /// Time spent in the final double support before the walk is over.
    pub settle_time: f64,
    pub foot_length: f64,
    pub foot_width: f64,
    /// Preview parameters; `com_height` is replaced by the height measured
    /// at the session's initial configuration.
    pub preview: PreviewParams,
}

impl Default for WalkParams {
    fn default() -> Self {
        Self {
            single_support: 0.36,
            double_support: 0.036,
            initial_double_support: 0.36,
            control_period: 0.005,
            replan_period: 0.025,
            swing_height: 0.015,
            swing_plateau_ratio: 0.30,
            trunk_pitch: 0.2007,
            mode: IkMode::Com,
            contact_timeout: 0.2,
            settle_time: 0.5,
            foot_length: 0.14,
            foot_width: 0.08,
            preview: PreviewParams::default(),
        }
    }
}

impl WalkParams {
    pub fn validate(&self) -> Result<(), WalkError> {
        let bad = |m: &str| Err(WalkError::InvalidParams(m.to_string()));
        for (name, v) in [
            ("single_support", self.single_support),
            ("double_support", self.double_support),
            ("initial_double_support", self.initial_double_support),
            ("control_period", self.control_period),
            ("replan_period", self.replan_period),
            ("swing_height", self.swing_height),
            ("contact_timeout", self.contact_timeout),
            ("foot_length", self.foot_length),
            ("foot_width", self.foot_width),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be positive"));
            }
        }
        if !(self.settle_time >= 0.0) {
            return bad("settle_time must be non-negative");
        }
        if !(self.swing_plateau_ratio > 0.0 && self.swing_plateau_ratio < 1.0) {
            return bad("swing_plateau_ratio must lie in (0, 1)");
        }
        if self.control_period > self.replan_period {
            return bad("control_period must not exceed replan_period");
        }
        self.preview.validate()?;
        Ok(())
    }

    pub fn timing(&self) -> Timing {
        Timing {
            single_support: self.single_support,
            double_support: self.double_support,
            initial_double_support: self.initial_double_support,
            foot_length: self.foot_length,
            foot_width: self.foot_width,
        }
    }
}

/// Swing foot path: cubic x, y and yaw with zero end velocities; z rises,
/// holds a plateau at the apex, then lands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwingTrajectory {
    pub x: CubicSegment,
    pub y: CubicSegment,
    pub yaw: CubicSegment,
    pub takeoff: CubicSegment,
    pub landing: CubicSegment,
    pub plateau_start: f64,
    pub plateau_end: f64,
    pub duration: f64,
    pub ground_z: f64,
    pub apex: f64,
}

pub fn swing_trajectory(
    start: &Pose2,
    end: &Pose2,
    ground_z: f64,
    duration: f64,
    height: f64,
    plateau_ratio: f64,
) -> Result<SwingTrajectory, GeomError> {
    if !(height > 0.0) {
        return Err(GeomError::Degenerate("swing height must be positive"));
    }
    if !(plateau_ratio > 0.0 && plateau_ratio < 1.0) {
        return Err(GeomError::Degenerate("plateau ratio must lie in (0, 1)"));
    }
    let ramp = duration * (1.0 - plateau_ratio) / 2.0;
    let apex = ground_z + height;
    let end_yaw = start.theta + wrap_angle(end.theta - start.theta);
    Ok(SwingTrajectory {
        x: cubic_between(start.x, 0.0, end.x, 0.0, duration)?,
        y: cubic_between(start.y, 0.0, end.y, 0.0, duration)?,
        yaw: cubic_between(start.theta, 0.0, end_yaw, 0.0, duration)?,
        takeoff: cubic_between(ground_z, 0.0, apex, 0.0, ramp)?,
        landing: cubic_between(apex, 0.0, ground_z, 0.0, ramp)?,
        plateau_start: ramp,
        plateau_end: duration - ramp,
        duration,
        ground_z,
        apex,
    })
}

impl SwingTrajectory {
    fn z_and_rate(&self, t: f64) -> (f64, f64) {
        let t = t.clamp(0.0, self.duration);
        if t < self.plateau_start {
            (self.takeoff.value(t), self.takeoff.velocity(t))
        } else if t <= self.plateau_end {
            (self.apex, 0.0)
        } else {
            let s = t - self.plateau_end;
            (self.landing.value(s), self.landing.velocity(s))
        }
    }

    pub fn position(&self, t: f64) -> Vector3<f64> {
        let t = t.clamp(0.0, self.duration);
        Vector3::new(self.x.value(t), self.y.value(t), self.z_and_rate(t).0)
    }

    pub fn velocity(&self, t: f64) -> Vector3<f64> {
        let t = t.clamp(0.0, self.duration);
        Vector3::new(self.x.velocity(t), self.y.velocity(t), self.z_and_rate(t).1)
    }

    pub fn yaw(&self, t: f64) -> f64 {
        wrap_angle(self.yaw.value(t.clamp(0.0, self.duration)))
    }

    pub fn isometry(&self, t: f64) -> Isometry3<f64> {
        foot_isometry(self.position(t), self.yaw(t))
    }
}

fn foot_isometry(p: Vector3<f64>, yaw: f64) -> Isometry3<f64> {
    Isometry3::from_parts(Translation3::from(p), UnitQuaternion::from_euler_angles(0.0, 0.0, yaw))
}

fn planar(iso: &Isometry3<f64>) -> Pose2 {
    let (_, _, yaw) = iso.rotation.euler_angles();
    Pose2::new(iso.translation.x, iso.translation.y, yaw)
}

fn trunk_rotation(yaw: f64, pitch: f64) -> UnitQuaternion<f64> {
    UnitQuaternion::from_euler_angles(0.0, 0.0, yaw) * UnitQuaternion::from_euler_angles(0.0, pitch, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseLabel {
    Single,
    Double,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickTargets {
    /// Wall-clock time of the tick.
    pub time: f64,
    /// Possibly delayed time at which the plans were read.
    pub trajectory_time: f64,
    pub com: ComState,
    pub zmp: Point2<f64>,
    /// Target of the first IK task: the CoM, or the trunk in trunk mode.
    pub com_target: Vector3<f64>,
    pub trunk_orientation: UnitQuaternion<f64>,
    pub support_foot: Isometry3<f64>,
    pub swing_foot: Isometry3<f64>,
    pub phase: PhaseLabel,
    pub support_side: Side,
    /// The trajectory clock is held waiting for swing contact.
    pub frozen: bool,
    /// A phase was forced after the contact timeout.
    pub forced: bool,
}

impl TickTargets {
    #[cfg(test)]
    pub(crate) fn at_rest_for_test() -> Self {
        Self {
            time: 0.0,
            trajectory_time: 0.0,
            com: ComState::default(),
            zmp: Point2::origin(),
            com_target: Vector3::new(0.0, 0.0, 0.2),
            trunk_orientation: UnitQuaternion::identity(),
            support_foot: Isometry3::translation(0.0, 0.05, 0.0),
            swing_foot: Isometry3::translation(0.0, -0.05, 0.0),
            phase: PhaseLabel::Double,
            support_side: Side::Left,
            frozen: false,
            forced: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct WalkSession {
    params: WalkParams,
    preview: PreviewParams,
    timing: Timing,
    placements: Vec<Placement>,
    phases: Vec<Phase>,
    ground_z: f64,
    com_z: f64,
    /// Trunk minus CoM at the initial configuration, in the initial heading frame.
    trunk_offset: Vector3<f64>,
    plan: ComTrajectory,
    last_replan: f64,
    clock: f64,
    delay: f64,
    last_now: f64,
    /// Index into `phases` of the next single-support phase whose contact gate is pending.
    next_gate: usize,
    forced: bool,
}

fn side_sole(frames: &FrameNames, side: Side) -> &str {
    frames.sole(side)
}

impl WalkSession {
    /// `footsteps` are the steps to take; the two initial placements are read
    /// from the soles at `q0`, the foot moving first being the one on the
    /// side of `footsteps[0]`.
    pub fn new(
        model: &RobotModel,
        footsteps: &[Placement],
        params: &WalkParams,
        frames: &FrameNames,
        q0: &Configuration,
    ) -> Result<Self, WalkError> {
        if footsteps.is_empty() {
            return Err(WalkError::EmptyFootsteps);
        }
        params.validate()?;
        for (i, j) in model.actuated_joints().enumerate() {
            if q0.joints[i] < j.lower || q0.joints[i] > j.upper {
                return Err(IkError::OutsideLimits(j.name.clone()).into());
            }
        }
        let first = footsteps[0].side;
        let swing0 = model.forward_kinematics(q0, side_sole(frames, first))?;
        let support0 = model.forward_kinematics(q0, side_sole(frames, first.opposite()))?;
        let ground_z = (swing0.translation.z + support0.translation.z) / 2.0;
        let mut placements = vec![
            Placement {
                pose: planar(&swing0),
                side: first,
            },
            Placement {
                pose: planar(&support0),
                side: first.opposite(),
            },
        ];
        placements.extend_from_slice(footsteps);

        let com0 = model.com(q0)?;
        let mut preview = params.preview;
        preview.com_height = com0.z - ground_z;
        let timing = params.timing();
        let timeline = phases(&placements, &timing, preview.dt)?;
        let heading = placements[1].pose.theta + wrap_angle(placements[0].pose.theta - placements[1].pose.theta) / 2.0;
        let trunk0 = model.forward_kinematics(q0, &frames.trunk)?;
        let trunk_offset = UnitQuaternion::from_euler_angles(0.0, 0.0, -heading) * (trunk0.translation.vector - com0.coords);

        let init = ComState::at_rest(com0.coords.xy());
        let schedule = build_schedule(&placements, &timing, &preview, 0.0)?;
        let plan = plan_com(&init, &terminal_for(&schedule), &schedule, &preview)?;
        let next_gate = timeline.iter().position(Phase::is_single).unwrap_or(timeline.len());
        Ok(Self {
            params: params.clone(),
            preview,
            timing,
            placements,
            phases: timeline,
            ground_z,
            com_z: com0.z,
            trunk_offset,
            plan,
            last_replan: 0.0,
            clock: 0.0,
            delay: 0.0,
            last_now: 0.0,
            next_gate,
            forced: false,
        })
    }

    pub fn phases(&self) -> &[Phase] {
        &self.phases
    }

    pub fn placements(&self) -> &[Placement] {
        &self.placements
    }

    pub fn preview_params(&self) -> &PreviewParams {
        &self.preview
    }

    pub fn trajectory_clock(&self) -> f64 {
        self.clock
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    /// Planned CoM state at the start of the session.
    pub fn initial_com(&self) -> ComState {
        self.plan.nodes[0]
    }

    /// Trajectory time at which the walk is over.
    pub fn end_time(&self) -> f64 {
        self.phases.last().map(|p| p.start).unwrap_or(0.0) + self.params.settle_time
    }

    pub fn finished(&self) -> bool {
        self.clock >= self.end_time() - 1e-9
    }

    fn advance_clock(&mut self, now: f64, swing_contact: bool) -> bool {
        let now = now.max(self.last_now);
        self.last_now = now;
        let candidate = now - self.delay;
        let Some(gate) = self.phases.get(self.next_gate).copied() else {
            self.clock = candidate.max(self.clock);
            return false;
        };
        if candidate < gate.end - 1e-12 {
            self.clock = candidate.max(self.clock);
            return false;
        }
        let waited = now - gate.end - self.delay;
        let frozen_before = self.clock >= gate.end - 1e-12;
        if swing_contact || waited > self.params.contact_timeout + 1e-12 {
            if !swing_contact {
                self.forced = true;
            }
            self.next_gate = self.phases[self.next_gate + 1..]
                .iter()
                .position(Phase::is_single)
                .map(|i| i + self.next_gate + 1)
                .unwrap_or(self.phases.len());
            if frozen_before {
                // the exchange happens now; the wait becomes delay
                self.delay = now - gate.end;
                self.clock = gate.end;
            } else {
                self.clock = candidate;
            }
            false
        } else {
            self.clock = gate.end;
            true
        }
    }

    fn replan_if_due(&mut self) -> Result<(), WalkError> {
        if self.clock - self.last_replan < self.params.replan_period - 1e-9 {
            return Ok(());
        }
        let state = self.plan.eval(self.clock - self.plan.t0)?;
        let schedule = build_schedule(&self.placements, &self.timing, &self.preview, self.clock)?;
        self.plan = plan_com(&state, &terminal_for(&schedule), &schedule, &self.preview)?;
        self.last_replan = self.clock;
        Ok(())
    }

    fn foot_pose(&self, i: usize) -> Isometry3<f64> {
        let p = &self.placements[i].pose;
        foot_isometry(Vector3::new(p.x, p.y, self.ground_z), p.theta)
    }

    /// Advances to wall-clock time `now` and returns the task targets.
    pub fn tick(&mut self, now: f64, swing_contact: bool) -> Result<TickTargets, WalkError> {
        let frozen = self.advance_clock(now, swing_contact);
        self.replan_if_due()?;
        let tc = self.clock;
        let ph = self.phases[phase_at(&self.phases, tc)];
        let (support_idx, swing, label) = match ph.kind {
            PhaseKind::Single { support } => {
                let from = self.placements[support - 1].pose;
                let to = self.placements[support + 1].pose;
                let traj = swing_trajectory(
                    &from,
                    &to,
                    self.ground_z,
                    ph.duration(),
                    self.params.swing_height,
                    self.params.swing_plateau_ratio,
                )?;
                (support, traj.isometry(tc - ph.start), PhaseLabel::Single)
            }
            PhaseKind::Double { from, to } => (to, self.foot_pose(from), PhaseLabel::Double),
        };
        let support = self.foot_pose(support_idx);
        let support_yaw = planar(&support).theta;
        let yaw = support_yaw + wrap_angle(planar(&swing).theta - support_yaw) / 2.0;
        let com = self.plan.eval(tc - self.plan.t0)?;
        let zmp = com.zmp(&self.preview);
        let mut com_target = Vector3::new(com.position.x, com.position.y, self.com_z);
        if self.params.mode == IkMode::Trunk {
            com_target += UnitQuaternion::from_euler_angles(0.0, 0.0, yaw) * self.trunk_offset;
        }
        Ok(TickTargets {
            time: now,
            trajectory_time: tc,
            com,
            zmp,
            com_target,
            trunk_orientation: trunk_rotation(yaw, self.params.trunk_pitch),
            support_foot: support,
            swing_foot: swing,
            phase: label,
            support_side: self.placements[support_idx].side,
            frozen,
            forced: self.forced,
        })
    }

    /// Ticks at the control period with permanent contact until the walk is over.
    pub fn run_to_end(&mut self) -> Result<Vec<TickTargets>, WalkError> {
        let mut out = Vec::new();
        let mut k = 0usize;
        loop {
            let now = k as f64 * self.params.control_period;
            out.push(self.tick(now, true)?);
            if self.finished() {
                return Ok(out);
            }
            k += 1;
        }
    }
}

/// CSV of the planned CoM at each tick: `t,cx,cy,vx,vy,ax,ay,zmpx,zmpy`.
pub fn com_csv(ticks: &[TickTargets]) -> String {
    let mut out = String::from("t,cx,cy,vx,vy,ax,ay,zmpx,zmpy\n");
    for t in ticks {
        let c = &t.com;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            t.time,
            c.position.x,
            c.position.y,
            c.velocity.x,
            c.velocity.y,
            c.acceleration.x,
            c.acceleration.y,
            t.zmp.x,
            t.zmp.y
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointVelocity {
    pub joint: String,
    pub max_abs_velocity: f64,
    pub limit: f64,
    pub exceeds_limit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityReport {
    pub joints: Vec<JointVelocity>,
}

impl VelocityReport {
    pub fn joint(&self, name: &str) -> Option<&JointVelocity> {
        self.joints.iter().find(|j| j.joint == name)
    }

    pub fn stationary(model: &RobotModel) -> Self {
        Self {
            joints: model
                .actuated_joints()
                .map(|j| JointVelocity {
                    joint: j.name.clone(),
                    max_abs_velocity: 0.0,
                    limit: j.velocity,
                    exceeds_limit: false,
                })
                .collect(),
        }
    }
}

/// Finite-difference joint velocities and their maxima against the model limits.
pub fn velocity_report(traj: &JointTrajectory, model: &RobotModel) -> Result<VelocityReport, WalkError> {
    let n = traj.configurations.len();
    if n < 2 {
        return Err(WalkError::TooFewSamples(n));
    }
    let mut report = VelocityReport::stationary(model);
    for k in 0..n - 1 {
        let dt = traj.times[k + 1] - traj.times[k];
        if !(dt > 0.0) {
            return Err(WalkError::InvalidParams("samples must have increasing times".into()));
        }
        let a = &traj.configurations[k].joints;
        let b = &traj.configurations[k + 1].joints;
        for (i, entry) in report.joints.iter_mut().enumerate() {
            let v = ((b[i] - a[i]) / dt).abs();
            if v > entry.max_abs_velocity {
                entry.max_abs_velocity = v;
            }
        }
    }
    for j in &mut report.joints {
        j.exceeds_limit = j.max_abs_velocity > j.limit;
    }
    Ok(report)
}

/// Everything needed to walk from one pose to another.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct WalkConfig {
    pub steps: StepParams,
    pub policy: BaselinePolicy,
    pub walk: WalkParams,
    pub ik: IkParams,
    pub step_cap: usize,
}

impl WalkConfig {
    pub fn new() -> Self {
        Self {
            step_cap: footsteps::DEFAULT_STEP_CAP,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct WalkOutput {
    pub footsteps: Vec<FootstepState>,
    pub initial: Configuration,
    pub ticks: Vec<TickTargets>,
    pub joints: JointTrajectory,
    pub report: VelocityReport,
}

/// Settles `guess` so both soles lie flat at `left`/`right` on the ground,
/// the trunk has the configured pitch and the CoM is over the foot midpoint.
pub fn initial_stance(
    model: &RobotModel,
    guess: &Configuration,
    left: &Pose2,
    right: &Pose2,
    ground_z: f64,
    walk: &WalkParams,
    ik: &IkParams,
) -> Result<Configuration, WalkError> {
    let mut q = guess.clone();
    let heading = left.theta + wrap_angle(right.theta - left.theta) / 2.0;
    let com_z = model.com(&q)?.z;
    let mid = (left.translation() + right.translation()) / 2.0;
    let params = IkParams {
        dt: 10.0,
        velocity_limit_scale: 1.0,
        ..ik.clone()
    };
    let tasks = vec![
        Task {
            name: "com".into(),
            frame: TaskFrame::Com,
            target: TaskTarget::Position(Vector3::new(mid.x, mid.y, com_z)),
            hardness: Hardness::Soft { weight: 1.0 },
        },
        Task {
            name: "trunk_orientation".into(),
            frame: TaskFrame::Frame(ik.frames.trunk.clone()),
            target: TaskTarget::Orientation(trunk_rotation(heading, walk.trunk_pitch)),
            hardness: Hardness::Soft { weight: 1.0 },
        },
        Task {
            name: "left".into(),
            frame: TaskFrame::Frame(ik.frames.left_sole.clone()),
            target: TaskTarget::Frame(foot_isometry(Vector3::new(left.x, left.y, ground_z), left.theta)),
            hardness: Hardness::Hard,
        },
        Task {
            name: "right".into(),
            frame: TaskFrame::Frame(ik.frames.right_sole.clone()),
            target: TaskTarget::Frame(foot_isometry(Vector3::new(right.x, right.y, ground_z), right.theta)),
            hardness: Hardness::Hard,
        },
    ];
    for _ in 0..200 {
        let (next, res) = wbik::step_with_residual(model, &q, &tasks, &params)?;
        q = next;
        if res.task_errors.iter().all(|e| *e < 1e-10) {
            break;
        }
    }
    Ok(q)
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Footsteps(#[from] FootstepError),
    #[error(transparent)]
    Walk(#[from] WalkError),
    #[error(transparent)]
    Ik(#[from] IkError),
}

/// Footsteps, initial stance and per-tick task targets of a walk, before
/// whole-body tracking.
#[derive(Debug, Clone)]
pub struct WalkTargets {
    pub footsteps: Vec<FootstepState>,
    pub initial: Configuration,
    pub ticks: Vec<TickTargets>,
    /// IK parameters with the walk's mode and control period applied.
    pub ik: IkParams,
}

/// Plans footsteps from `start` to `target` (robot-centered poses), settles
/// the initial stance and runs the session with permanent contact.
pub fn plan_targets(
    model: &RobotModel,
    standing: &Configuration,
    start: &Pose2,
    target: &Pose2,
    cfg: &WalkConfig,
) -> Result<WalkTargets, PipelineError> {
    let p = &cfg.steps;
    let start_state = FootstepState::from_robot_pose(start, p);
    let neutral_target = footsteps::neutral_target_for_robot_pose(target, p);
    let cap = if cfg.step_cap == 0 {
        footsteps::DEFAULT_STEP_CAP
    } else {
        cfg.step_cap
    };
    let steps = footsteps::plan(&start_state, &neutral_target, None, p, &cfg.policy, cap)?;

    let left = start_state.support_pose;
    let right = start.compose(&Pose2::new(0.0, -p.feet_spacing / 2.0, 0.0));
    let mut guess = standing.clone();
    guess.base_position.x += start.x;
    guess.base_position.y += start.y;
    guess.base_orientation = UnitQuaternion::from_euler_angles(0.0, 0.0, start.theta) * guess.base_orientation;
    let ik = IkParams {
        mode: cfg.walk.mode,
        dt: cfg.walk.control_period,
        ..cfg.ik.clone()
    };
    let ground_z = 0.0;
    let q0 = initial_stance(model, &guess, &left, &right, ground_z, &cfg.walk, &ik)?;

    let ticks = if steps.is_empty() {
        Vec::new()
    } else {
        let placements: Vec<Placement> = steps
            .iter()
            .map(|s| Placement {
                pose: s.support_pose,
                side: s.support_side,
            })
            .collect();
        let mut session = WalkSession::new(model, &placements, &cfg.walk, &ik.frames, &q0)?;
        session.run_to_end()?
    };
    Ok(WalkTargets {
        footsteps: steps,
        initial: q0,
        ticks,
        ik,
    })
}

/// [`plan_targets`] followed by IK tracking of every tick. An empty plan
/// yields a single stationary sample.
pub fn plan_walk(
    model: &RobotModel,
    standing: &Configuration,
    start: &Pose2,
    target: &Pose2,
    cfg: &WalkConfig,
) -> Result<WalkOutput, PipelineError> {
    let WalkTargets {
        footsteps,
        initial,
        ticks,
        ik,
    } = plan_targets(model, standing, start, target, cfg)?;
    if ticks.is_empty() {
        let joints = JointTrajectory {
            joint_names: model.joint_names(),
            times: vec![0.0],
            configurations: vec![initial.clone()],
            residuals: Vec::new(),
        };
        return Ok(WalkOutput {
            footsteps,
            initial,
            ticks,
            joints,
            report: VelocityReport::stationary(model),
        });
    }
    let joints = wbik::track(model, &initial, &ticks, &ik)?;
    let report = velocity_report(&joints, model)?;
    Ok(WalkOutput {
        footsteps,
        initial,
        ticks,
        joints,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn march_in_place_swing() {
        let p = Pose2::new(0.1, -0.05, 0.3);
        let s = swing_trajectory(&p, &p, 0.0, 0.36, 0.04, 0.3).unwrap();
        for i in 0..=100 {
            let t = 0.36 * i as f64 / 100.0;
            let x = s.position(t);
            assert_relative_eq!(x.x, 0.1, epsilon = 1e-12);
            assert_relative_eq!(x.y, -0.05, epsilon = 1e-12);
            assert_relative_eq!(s.yaw(t), 0.3, epsilon = 1e-12);
        }
        assert_relative_eq!(s.position(0.18).z, 0.04, epsilon = 1e-12);
        assert_relative_eq!(s.position(0.0).z, 0.0, epsilon = 1e-12);
        assert_relative_eq!(s.position(0.36).z, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn swing_plateau_and_endpoints() {
        let a = Pose2::new(0.0, 0.0, 0.0);
        let b = Pose2::new(0.05, 0.05, 0.0);
        let s = swing_trajectory(&a, &b, 0.01, 0.36, 0.04, 0.3).unwrap();
        assert_relative_eq!(s.plateau_start, 0.126, epsilon = 1e-12);
        assert_relative_eq!(s.plateau_end, 0.234, epsilon = 1e-12);
        assert_relative_eq!(s.position(0.0), Vector3::new(0.0, 0.0, 0.01), epsilon = 1e-12);
        assert_relative_eq!(s.position(0.36), Vector3::new(0.05, 0.05, 0.01), epsilon = 1e-12);
        assert_relative_eq!(s.velocity(0.0).norm(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(s.velocity(0.36).norm(), 0.0, epsilon = 1e-12);
        for i in 0..=50 {
            let t = s.plateau_start + (s.plateau_end - s.plateau_start) * i as f64 / 50.0;
            assert_relative_eq!(s.position(t).z, 0.05, epsilon = 1e-12);
            assert_eq!(s.velocity(t).z, 0.0);
        }
        for i in 0..=1000 {
            let t = 0.36 * i as f64 / 1000.0;
            let z = s.position(t).z;
            assert!((0.01 - 1e-12..=0.05 + 1e-12).contains(&z));
        }
    }

    #[test]
    fn swing_velocity_is_continuous() {
        let s = swing_trajectory(&Pose2::identity(), &Pose2::new(0.05, 0.05, 0.2), 0.0, 0.36, 0.04, 0.3).unwrap();
        let h = 1e-7;
        for t in [s.plateau_start, s.plateau_end] {
            let left = (s.position(t) - s.position(t - h)) / h;
            let right = (s.position(t + h) - s.position(t)) / h;
            assert!((left - right).norm() < 1e-6);
            assert!((left - s.velocity(t)).norm() < 1e-6);
        }
    }

    #[test]
    fn velocity_report_examples() {
        let model = crate::fixture::biped();
        let q = crate::fixture::standing_configuration(&model);
        let mut traj = JointTrajectory {
            joint_names: model.joint_names(),
            times: vec![],
            configurations: vec![],
            residuals: vec![],
        };
        for k in 0..20 {
            traj.times.push(k as f64 * 0.005);
            traj.configurations.push(q.clone());
        }
        let r = velocity_report(&traj, &model).unwrap();
        assert!(r.joints.iter().all(|j| j.max_abs_velocity == 0.0 && !j.exceeds_limit));
        for (k, c) in traj.configurations.iter_mut().enumerate() {
            c.joints[3] += k as f64 * 0.005;
        }
        let r = velocity_report(&traj, &model).unwrap();
        assert!((r.joints[3].max_abs_velocity - 1.0).abs() < 1e-9);
        traj.configurations.truncate(1);
        traj.times.truncate(1);
        assert!(matches!(velocity_report(&traj, &model), Err(WalkError::TooFewSamples(1))));
    }
}
