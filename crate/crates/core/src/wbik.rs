//! Differential whole-body inverse kinematics.
//!
//! Each control tick linearizes every task around the current configuration
//! and solves one QP for the tangent-space increment `Δq`: soft tasks enter
//! the cost with their weights, hard tasks become equality rows, and joint
//! position and velocity limits become box bounds on the actuated joints.

use nalgebra::{DMatrix, DVector, Isometry3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::IkError;
use crate::fixture::{LEFT_SOLE, RIGHT_SOLE, TRUNK};
use crate::footsteps::Side;
use crate::kinematics::{Configuration, RobotModel};
use crate::qp::{self, QpStatus, QuadProgProblem};
use crate::walk::TickTargets;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum IkMode {
    #[default]
    Com,
    Trunk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Position3,
    Orientation3,
    Frame6,
}

impl TaskKind {
    pub fn dim(self) -> usize {
        match self {
            TaskKind::Position3 | TaskKind::Orientation3 => 3,
            TaskKind::Frame6 => 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskFrame {
    Com,
    Frame(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskTarget {
    Position(Vector3<f64>),
    Orientation(UnitQuaternion<f64>),
    Frame(Isometry3<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hardness {
    Hard,
    Soft { weight: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub name: String,
    pub frame: TaskFrame,
    pub target: TaskTarget,
    pub hardness: Hardness,
}

impl Task {
    pub fn kind(&self) -> TaskKind {
        match self.target {
            TaskTarget::Position(_) => TaskKind::Position3,
            TaskTarget::Orientation(_) => TaskKind::Orientation3,
            TaskTarget::Frame(_) => TaskKind::Frame6,
        }
    }

    pub fn dim(&self) -> usize {
        self.kind().dim()
    }

    /// Error `e(q)` and Jacobian `J(q)` so that `e(q ⊕ Δq) ≈ e(q) + J Δq`.
    pub fn linearize(&self, model: &RobotModel, q: &Configuration) -> Result<(DVector<f64>, DMatrix<f64>), IkError> {
        let n = model.dof();
        match (&self.frame, &self.target) {
            (TaskFrame::Com, TaskTarget::Position(t)) => {
                let c = model.com(q)?;
                Ok((DVector::from_column_slice((c.coords - t).as_slice()), model.com_jacobian(q)?))
            }
            (TaskFrame::Com, _) => Err(IkError::InvalidParams(format!(
                "task `{}`: the CoM only supports position targets",
                self.name
            ))),
            (TaskFrame::Frame(f), target) => {
                let pose = model.forward_kinematics(q, f)?;
                let jac = model.frame_jacobian(q, f)?;
                let pos_err = |t: &Vector3<f64>| pose.translation.vector - t;
                let rot_err = |r: &UnitQuaternion<f64>| (pose.rotation * r.inverse()).scaled_axis();
                Ok(match target {
                    TaskTarget::Position(t) => (
                        DVector::from_column_slice(pos_err(t).as_slice()),
                        jac.rows(0, 3).into_owned(),
                    ),
                    TaskTarget::Orientation(r) => (
                        DVector::from_column_slice(rot_err(r).as_slice()),
                        jac.rows(3, 3).into_owned(),
                    ),
                    TaskTarget::Frame(iso) => {
                        let p = pos_err(&iso.translation.vector);
                        let r = rot_err(&iso.rotation);
                        let e = DVector::from_iterator(6, p.iter().chain(r.iter()).copied());
                        debug_assert_eq!(jac.ncols(), n);
                        (e, jac)
                    }
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskWeights {
    pub com: f64,
    pub trunk_orientation: f64,
    pub swing_foot: f64,
}

impl Default for TaskWeights {
    fn default() -> Self {
        Self {
            com: 10.0,
            trunk_orientation: 1.0,
            swing_foot: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrameNames {
    pub trunk: String,
    pub left_sole: String,
    pub right_sole: String,
}

impl Default for FrameNames {
    fn default() -> Self {
        Self {
            trunk: TRUNK.into(),
            left_sole: LEFT_SOLE.into(),
            right_sole: RIGHT_SOLE.into(),
        }
    }
}

impl FrameNames {
    pub fn sole(&self, side: Side) -> &str {
        match side {
            Side::Left => &self.left_sole,
            Side::Right => &self.right_sole,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IkParams {
    pub regularization: f64,
    pub dt: f64,
    pub velocity_limit_scale: f64,
    pub mode: IkMode,
    pub weights: TaskWeights,
    pub frames: FrameNames,
}

impl Default for IkParams {
    fn default() -> Self {
        Self {
            regularization: 1e-6,
            dt: 0.005,
            velocity_limit_scale: 0.9,
            mode: IkMode::Com,
            weights: TaskWeights::default(),
            frames: FrameNames::default(),
        }
    }
}

impl IkParams {
    pub fn validate(&self) -> Result<(), IkError> {
        if !(self.regularization > 0.0) {
            return Err(IkError::InvalidParams("regularization must be positive".into()));
        }
        if !(self.dt > 0.0) {
            return Err(IkError::InvalidParams("dt must be positive".into()));
        }
        if !(self.velocity_limit_scale > 0.0 && self.velocity_limit_scale <= 1.0) {
            return Err(IkError::InvalidParams("velocity_limit_scale must lie in (0, 1]".into()));
        }
        let w = &self.weights;
        if !(w.com > 0.0 && w.trunk_orientation > 0.0 && w.swing_foot > 0.0) {
            return Err(IkError::InvalidParams("task weights must be positive".into()));
        }
        Ok(())
    }
}

/// The four walking tasks: CoM (or trunk) position, trunk orientation,
/// support foot (hard) and swing foot.
pub fn build_tasks(targets: &TickTargets, params: &IkParams) -> Vec<Task> {
    let f = &params.frames;
    let w = &params.weights;
    let first_frame = match params.mode {
        IkMode::Com => TaskFrame::Com,
        IkMode::Trunk => TaskFrame::Frame(f.trunk.clone()),
    };
    vec![
        Task {
            name: match params.mode {
                IkMode::Com => "com".into(),
                IkMode::Trunk => "trunk_position".into(),
            },
            frame: first_frame,
            target: TaskTarget::Position(targets.com_target),
            hardness: Hardness::Soft { weight: w.com },
        },
        Task {
            name: "trunk_orientation".into(),
            frame: TaskFrame::Frame(f.trunk.clone()),
            target: TaskTarget::Orientation(targets.trunk_orientation),
            hardness: Hardness::Soft {
                weight: w.trunk_orientation,
            },
        },
        Task {
            name: "support_foot".into(),
            frame: TaskFrame::Frame(f.sole(targets.support_side).to_string()),
            target: TaskTarget::Frame(targets.support_foot),
            hardness: Hardness::Hard,
        },
        Task {
            name: "swing_foot".into(),
            frame: TaskFrame::Frame(f.sole(targets.support_side.opposite()).to_string()),
            target: TaskTarget::Frame(targets.swing_foot),
            hardness: Hardness::Soft { weight: w.swing_foot },
        },
    ]
}

/// Box bounds on `Δq`: unbounded base, joints limited by both the position
/// range and `dt · q̇_max · scale`.
pub fn increment_bounds(
    model: &RobotModel,
    q0: &Configuration,
    params: &IkParams,
) -> Result<(DVector<f64>, DVector<f64>), IkError> {
    let n = model.dof();
    let mut lo = DVector::from_element(n, f64::NEG_INFINITY);
    let mut hi = DVector::from_element(n, f64::INFINITY);
    for (i, j) in model.actuated_joints().enumerate() {
        let v = q0.joints[i];
        if v < j.lower || v > j.upper {
            return Err(IkError::OutsideLimits(j.name.clone()));
        }
        let step = params.dt * j.velocity * params.velocity_limit_scale;
        lo[6 + i] = (j.lower - v).max(-step);
        hi[6 + i] = (j.upper - v).min(step);
    }
    Ok((lo, hi))
}

fn assemble(model: &RobotModel, q0: &Configuration, tasks: &[Task], params: &IkParams) -> Result<QuadProgProblem, IkError> {
    params.validate()?;
    let n = model.dof();
    let mut cost = DMatrix::identity(n, n) * params.regularization;
    let mut linear = DVector::zeros(n);
    let mut hard = Vec::new();
    for t in tasks {
        let (e, j) = t.linearize(model, q0)?;
        match t.hardness {
            Hardness::Soft { weight } => {
                if !(weight > 0.0) {
                    return Err(IkError::InvalidParams(format!("task `{}` needs a positive weight", t.name)));
                }
                cost += j.transpose() * &j * weight;
                linear += j.transpose() * &e * weight;
            }
            Hardness::Hard => hard.push((e, j)),
        }
    }
    // ½ Δqᵀ P Δq + qᵀ Δq with P = 2(Σ w JᵀJ + εI), q = 2 Σ w Jᵀe
    cost *= 2.0;
    linear *= 2.0;
    cost = (&cost + cost.transpose()) * 0.5;
    let rows: usize = hard.iter().map(|(e, _)| e.len()).sum();
    let mut a_eq = DMatrix::zeros(rows, n);
    let mut b_eq = DVector::zeros(rows);
    let mut r = 0;
    for (e, j) in &hard {
        a_eq.rows_mut(r, e.len()).copy_from(j);
        b_eq.rows_mut(r, e.len()).copy_from(&(-e));
        r += e.len();
    }
    let (lo, hi) = increment_bounds(model, q0, params)?;
    Ok(QuadProgProblem::new(cost, linear)
        .with_equalities(a_eq, b_eq)
        .with_bounds(lo, hi))
}

/// One IK step: the increment `Δq` in the tangent space at `q0`.
pub fn solve_step(
    model: &RobotModel,
    q0: &Configuration,
    tasks: &[Task],
    params: &IkParams,
) -> Result<DVector<f64>, IkError> {
    let problem = assemble(model, q0, tasks, params)?;
    let sol = qp::solve_default(&problem)?;
    match sol.status {
        QpStatus::Optimal => Ok(sol.x),
        QpStatus::MaxIterations => Err(IkError::MaxIterations(sol.iterations)),
        QpStatus::Infeasible => {
            let n = model.dof();
            let mut relaxed = problem.clone();
            relaxed.lower = DVector::from_element(n, f64::NEG_INFINITY);
            relaxed.upper = DVector::from_element(n, f64::INFINITY);
            let family = if qp::solve_default(&relaxed)?.is_optimal() {
                "joint_limits"
            } else {
                "hard_tasks"
            };
            Err(IkError::Infeasible { family })
        }
    }
}

/// Applies `Δq` and clamps joints to their limits against rounding.
pub fn apply_step(model: &RobotModel, q0: &Configuration, delta: &DVector<f64>) -> Configuration {
    let mut q = q0.integrate(delta);
    for (i, j) in model.actuated_joints().enumerate() {
        q.joints[i] = q.joints[i].clamp(j.lower, j.upper);
    }
    q
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickResidual {
    /// Largest hard-task residual of the linear model, `‖J Δq + e‖∞`.
    pub hard_linear: f64,
    /// Per-task error norms after the step, in task order.
    pub task_errors: Vec<f64>,
    /// Largest gap between the nonlinear task error after the step and its
    /// first-order prediction.
    pub linearization: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointTrajectory {
    pub joint_names: Vec<String>,
    pub times: Vec<f64>,
    pub configurations: Vec<Configuration>,
    pub residuals: Vec<TickResidual>,
}

impl JointTrajectory {
    /// CSV with `t`, one column per joint, then base position and quaternion.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for n in &self.joint_names {
            out.push(',');
            out.push_str(n);
        }
        out.push_str(",base_x,base_y,base_z,base_qw,base_qx,base_qy,base_qz\n");
        for (t, q) in self.times.iter().zip(&self.configurations) {
            out.push_str(&t.to_string());
            for v in q.joints.iter() {
                out.push(',');
                out.push_str(&v.to_string());
            }
            let p = q.base_position;
            let r = q.base_orientation.quaternion();
            for v in [p.x, p.y, p.z, r.w, r.i, r.j, r.k] {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Runs one step per target and measures the residuals.
pub fn step_with_residual(
    model: &RobotModel,
    q0: &Configuration,
    tasks: &[Task],
    params: &IkParams,
) -> Result<(Configuration, TickResidual), IkError> {
    let delta = solve_step(model, q0, tasks, params)?;
    let q1 = apply_step(model, q0, &delta);
    let mut hard_linear: f64 = 0.0;
    let mut linearization: f64 = 0.0;
    let mut task_errors = Vec::with_capacity(tasks.len());
    for t in tasks {
        let (e0, j) = t.linearize(model, q0)?;
        let predicted = &e0 + &j * &delta;
        let (e1, _) = t.linearize(model, &q1)?;
        if t.hardness == Hardness::Hard {
            hard_linear = hard_linear.max(predicted.amax());
        }
        linearization = linearization.max((&e1 - &predicted).amax());
        task_errors.push(e1.norm());
    }
    Ok((
        q1,
        TickResidual {
            hard_linear,
            task_errors,
            linearization,
        },
    ))
}

/// Tracks a stream of tick targets, one IK step per tick starting from `q_init`.
pub fn track(
    model: &RobotModel,
    q_init: &Configuration,
    targets: &[TickTargets],
    params: &IkParams,
) -> Result<JointTrajectory, IkError> {
    let mut q = q_init.clone();
    let mut traj = JointTrajectory {
        joint_names: model.joint_names(),
        times: Vec::with_capacity(targets.len()),
        configurations: Vec::with_capacity(targets.len()),
        residuals: Vec::with_capacity(targets.len()),
    };
    for (tick, t) in targets.iter().enumerate() {
        let tasks = build_tasks(t, params);
        let (next, res) = step_with_residual(model, &q, &tasks, params).map_err(|e| IkError::AtTick {
            tick,
            source: Box::new(e),
        })?;
        q = next;
        traj.times.push(t.time);
        traj.configurations.push(q.clone());
        traj.residuals.push(res);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture::{biped, standing_configuration};

    fn hold_tasks(model: &RobotModel, q: &Configuration) -> Vec<Task> {
        let f = FrameNames::default();
        let pose = |name: &str| model.forward_kinematics(q, name).unwrap();
        vec![
            Task {
                name: "com".into(),
                frame: TaskFrame::Com,
                target: TaskTarget::Position(model.com(q).unwrap().coords),
                hardness: Hardness::Soft { weight: 10.0 },
            },
            Task {
                name: "trunk".into(),
                frame: TaskFrame::Frame(f.trunk.clone()),
                target: TaskTarget::Orientation(pose(&f.trunk).rotation),
                hardness: Hardness::Soft { weight: 1.0 },
            },
            Task {
                name: "support".into(),
                frame: TaskFrame::Frame(f.left_sole.clone()),
                target: TaskTarget::Frame(pose(&f.left_sole)),
                hardness: Hardness::Hard,
            },
            Task {
                name: "swing".into(),
                frame: TaskFrame::Frame(f.right_sole.clone()),
                target: TaskTarget::Frame(pose(&f.right_sole)),
                hardness: Hardness::Soft { weight: 5.0 },
            },
        ]
    }

    #[test]
    fn zero_error_gives_zero_step() {
        let model = biped();
        let q = standing_configuration(&model);
        let tasks = hold_tasks(&model, &q);
        assert_eq!(tasks.iter().map(Task::dim).sum::<usize>(), 18);
        let dq = solve_step(&model, &q, &tasks, &IkParams::default()).unwrap();
        assert!(dq.amax() < 1e-9, "{}", dq.amax());
    }

    #[test]
    fn com_displacement_is_mostly_corrected() {
        let model = biped();
        let q = standing_configuration(&model);
        let mut tasks = hold_tasks(&model, &q);
        let c0 = model.com(&q).unwrap().coords;
        let target = c0 + Vector3::new(0.001, 0.0, 0.0);
        tasks[0].target = TaskTarget::Position(target);
        let params = IkParams {
            dt: 1.0,
            ..Default::default()
        };
        let dq = solve_step(&model, &q, &tasks, &params).unwrap();
        let q1 = apply_step(&model, &q, &dq);
        let after = (model.com(&q1).unwrap().coords - target).norm();
        assert!(after < 0.1 * 0.001, "{after}");
    }

    #[test]
    fn zero_velocity_limit_pins_joint() {
        let mut model_text = crate::fixture::BIPED_URDF.to_string();
        model_text = model_text.replacen("velocity=\"4.7\"", "velocity=\"0\"", 1);
        let model = RobotModel::from_urdf_str(&model_text).unwrap();
        let pinned = model.actuated_joints().position(|j| j.velocity == 0.0).unwrap();
        let q = standing_configuration(&model);
        let mut tasks = hold_tasks(&model, &q);
        tasks[0].target = TaskTarget::Position(model.com(&q).unwrap().coords + Vector3::new(0.002, 0.001, -0.001));
        let dq = solve_step(&model, &q, &tasks, &IkParams::default()).unwrap();
        assert_eq!(dq[6 + pinned], 0.0);
    }

    #[test]
    fn trunk_mode_swaps_first_task() {
        let targets = TickTargets::at_rest_for_test();
        let com = build_tasks(&targets, &IkParams::default());
        assert_eq!(com[0].frame, TaskFrame::Com);
        let kinds: Vec<_> = com.iter().map(Task::kind).collect();
        assert_eq!(
            kinds,
            [TaskKind::Position3, TaskKind::Orientation3, TaskKind::Frame6, TaskKind::Frame6]
        );
        assert_eq!(com.iter().map(Task::dim).sum::<usize>(), 18);
        let trunk = build_tasks(
            &targets,
            &IkParams {
                mode: IkMode::Trunk,
                ..Default::default()
            },
        );
        assert_eq!(trunk[0].frame, TaskFrame::Frame(TRUNK.into()));
    }

    #[test]
    fn conflicting_hard_tasks_are_named() {
        let model = biped();
        let q = standing_configuration(&model);
        let mut tasks = hold_tasks(&model, &q);
        // pin both feet hard, one of them far away
        let far = model.forward_kinematics(&q, RIGHT_SOLE).unwrap() * nalgebra::Translation3::new(0.0, 0.0, 0.5);
        tasks[3].hardness = Hardness::Hard;
        tasks[3].target = TaskTarget::Frame(far);
        match solve_step(&model, &q, &tasks, &IkParams::default()) {
            Err(IkError::Infeasible { family }) => assert_eq!(family, "joint_limits"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn outside_limits_rejected() {
        let model = biped();
        let mut q = standing_configuration(&model);
        q.joints[0] = 10.0;
        let tasks = hold_tasks(&model, &standing_configuration(&model));
        assert!(matches!(
            solve_step(&model, &q, &tasks, &IkParams::default()),
            Err(IkError::OutsideLimits(_))
        ));
    }
}
