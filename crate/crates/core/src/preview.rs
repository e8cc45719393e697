//! Center-of-mass preview control under the linear inverted pendulum.
//!
//! Each axis follows a triple integrator driven by piecewise constant jerk.
//! All states are eliminated, leaving the `2N` jerk values as the only
//! decision variables; the ZMP `z = c - (h/g) c̈` is tracked against a
//! reference and constrained to the support polygon at every sample.

use nalgebra::{DMatrix, DVector, Matrix3, Point2, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::PreviewError;
use crate::footsteps::Side;
use crate::geom::{convex_hull, ConvexPolygon, Footprint, HalfPlane, Pose2};
use crate::qp::{self, QpStatus, QuadProgProblem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreviewParams {
    pub dt: f64,
    pub horizon_steps: usize,
    pub com_height: f64,
    pub gravity: f64,
    pub jerk_weight: f64,
    /// ZMP reference offset expressed in the support foot frame.
    pub zmp_reference_offset: [f64; 2],
    /// Support polygons are shrunk by this distance before use as constraints.
    pub polygon_margin: f64,
}

impl Default for PreviewParams {
    fn default() -> Self {
        Self {
            dt: 0.036,
            horizon_steps: 48,
            com_height: 0.25,
            gravity: 9.81,
            jerk_weight: 1e-6,
            zmp_reference_offset: [0.0, 0.0],
            polygon_margin: 0.005,
        }
    }
}

impl PreviewParams {
    pub fn validate(&self) -> Result<(), PreviewError> {
        let bad = |m: &str| Err(PreviewError::InvalidParams(m.to_string()));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if self.horizon_steps < 2 {
            return bad("horizon_steps must be at least 2");
        }
        if !(self.com_height > 0.0) || !(self.gravity > 0.0) {
            return bad("com_height and gravity must be positive");
        }
        if !(self.jerk_weight > 0.0) {
            return bad("jerk_weight must be positive");
        }
        if !(self.polygon_margin >= 0.0) {
            return bad("polygon_margin must be non-negative");
        }
        Ok(())
    }

    pub fn horizon(&self) -> f64 {
        self.horizon_steps as f64 * self.dt
    }

    fn omega2_inv(&self) -> f64 {
        self.com_height / self.gravity
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ComState {
    pub position: Vector2<f64>,
    pub velocity: Vector2<f64>,
    pub acceleration: Vector2<f64>,
}

impl ComState {
    pub fn at_rest(position: Vector2<f64>) -> Self {
        Self {
            position,
            ..Default::default()
        }
    }

    fn axis(&self, a: usize) -> Vector3<f64> {
        Vector3::new(self.position[a], self.velocity[a], self.acceleration[a])
    }

    fn from_axes(x: &Vector3<f64>, y: &Vector3<f64>) -> Self {
        Self {
            position: Vector2::new(x[0], y[0]),
            velocity: Vector2::new(x[1], y[1]),
            acceleration: Vector2::new(x[2], y[2]),
        }
    }

    pub fn zmp(&self, params: &PreviewParams) -> Point2<f64> {
        Point2::from(self.position - self.acceleration * params.omega2_inv())
    }
}

/// A foot placement on the ground.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    #[serde(flatten)]
    pub pose: Pose2,
    pub side: Side,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Timing {
    pub single_support: f64,
    pub double_support: f64,
    /// Double support before the first step, long enough to shift the CoM
    /// over the first support foot.
    pub initial_double_support: f64,
    pub foot_length: f64,
    pub foot_width: f64,
}

impl Default for Timing {
    fn default() -> Self {
        Self {
            single_support: 0.36,
            double_support: 0.036,
            initial_double_support: 0.36,
            foot_length: 0.14,
            foot_width: 0.08,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PhaseKind {
    Single { support: usize },
    Double { from: usize, to: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub kind: PhaseKind,
    pub start: f64,
    /// `f64::INFINITY` for the final, held phase.
    pub end: f64,
    pub initial: bool,
}

impl Phase {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_single(&self) -> bool {
        matches!(self.kind, PhaseKind::Single { .. })
    }
}

/// Number of `dt` steps used for a phase of `duration`, at least one.
pub fn phase_steps(duration: f64, dt: f64) -> usize {
    ((duration / dt).round() as usize).max(1)
}

/// Phase timeline for `placements = [initial swing foot, initial support, steps...]`.
///
/// Durations are rounded to whole multiples of `dt`. The last phase is held
/// indefinitely: single support when only one placement is given, otherwise
/// double support on the last two placements.
pub fn phases(placements: &[Placement], timing: &Timing, dt: f64) -> Result<Vec<Phase>, PreviewError> {
    if placements.is_empty() {
        return Err(PreviewError::EmptyFootsteps);
    }
    if !(timing.single_support > 0.0 && timing.double_support > 0.0 && timing.initial_double_support > 0.0) {
        return Err(PreviewError::InvalidParams("phase durations must be positive".into()));
    }
    let m = placements.len();
    if m == 1 {
        return Ok(vec![Phase {
            kind: PhaseKind::Single { support: 0 },
            start: 0.0,
            end: f64::INFINITY,
            initial: true,
        }]);
    }
    let ss = phase_steps(timing.single_support, dt);
    let ds = phase_steps(timing.double_support, dt);
    let ds0 = phase_steps(timing.initial_double_support, dt);
    let mut out = Vec::with_capacity(2 * m);
    let mut tick = 0usize;
    let mut push = |kind, steps: Option<usize>, initial| {
        let start = tick as f64 * dt;
        let end = match steps {
            Some(n) => {
                tick += n;
                tick as f64 * dt
            }
            None => f64::INFINITY,
        };
        out.push(Phase {
            kind,
            start,
            end,
            initial,
        });
    };
    if m == 2 {
        push(PhaseKind::Double { from: 0, to: 1 }, None, true);
        return Ok(out);
    }
    push(PhaseKind::Double { from: 0, to: 1 }, Some(ds0), true);
    for i in 1..m - 1 {
        push(PhaseKind::Single { support: i }, Some(ss), false);
        let last = i == m - 2;
        push(PhaseKind::Double { from: i, to: i + 1 }, if last { None } else { Some(ds) }, false);
    }
    Ok(out)
}

/// Index of the phase active at time `t`; boundaries belong to the later phase.
pub fn phase_at(phases: &[Phase], t: f64) -> usize {
    const EPS: f64 = 1e-9;
    phases
        .iter()
        .position(|ph| t < ph.end - EPS)
        .unwrap_or(phases.len() - 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSample {
    pub time: f64,
    pub polygon: ConvexPolygon,
    pub zmp_reference: Point2<f64>,
    pub single: bool,
    pub footstep: usize,
    /// Sample lies in the final, indefinitely held phase.
    pub final_phase: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportSchedule {
    pub t0: f64,
    pub dt: f64,
    pub samples: Vec<ScheduleSample>,
}

impl SupportSchedule {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Samples from index `k` on, with the start time moved accordingly.
    pub fn tail(&self, k: usize) -> SupportSchedule {
        SupportSchedule {
            t0: self.t0 + k as f64 * self.dt,
            dt: self.dt,
            samples: self.samples[k..].to_vec(),
        }
    }
}

fn footprint(p: &Placement, timing: &Timing) -> Result<Footprint, PreviewError> {
    Ok(Footprint::new(timing.foot_length, timing.foot_width, p.pose)?)
}

fn zmp_reference(p: &Placement, params: &PreviewParams) -> Point2<f64> {
    let [ox, oy] = params.zmp_reference_offset;
    p.pose.transform_point(&Point2::new(ox, oy))
}

/// Support polygons and ZMP references for the `N` samples following `t0`
/// (sample `k` sits at `t0 + (k + 1) dt`).
pub fn build_schedule(
    placements: &[Placement],
    timing: &Timing,
    params: &PreviewParams,
    t0: f64,
) -> Result<SupportSchedule, PreviewError> {
    params.validate()?;
    let timeline = phases(placements, timing, params.dt)?;
    let prints = placements
        .iter()
        .map(|p| footprint(p, timing))
        .collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<Point2<f64>> = placements.iter().map(|p| zmp_reference(p, params)).collect();
    let mut hulls = std::collections::HashMap::new();
    let mut samples = Vec::with_capacity(params.horizon_steps);
    for k in 0..params.horizon_steps {
        let t = t0 + (k + 1) as f64 * params.dt;
        let ph = &timeline[phase_at(&timeline, t)];
        let sample = match ph.kind {
            PhaseKind::Single { support } => ScheduleSample {
                time: t,
                polygon: prints[support].polygon(),
                zmp_reference: refs[support],
                single: true,
                footstep: support,
                final_phase: ph.end.is_infinite(),
            },
            PhaseKind::Double { from, to } => {
                let polygon = match hulls.get(&(from, to)) {
                    Some(poly) => ConvexPolygon::clone(poly),
                    None => {
                        let pts: Vec<_> = prints[from].corners().into_iter().chain(prints[to].corners()).collect();
                        let poly = convex_hull(&pts)?;
                        hulls.insert((from, to), poly.clone());
                        poly
                    }
                };
                let s = if ph.end.is_infinite() {
                    0.5
                } else {
                    let s = ((t - ph.start) / ph.duration()).clamp(0.0, 1.0);
                    // starting from rest between the feet, blend from the midpoint
                    if ph.initial {
                        0.5 + 0.5 * s
                    } else {
                        s
                    }
                };
                ScheduleSample {
                    time: t,
                    polygon,
                    zmp_reference: Point2::from(refs[from].coords * (1.0 - s) + refs[to].coords * s),
                    single: false,
                    footstep: to,
                    final_phase: ph.end.is_infinite(),
                }
            }
        };
        samples.push(sample);
    }
    Ok(SupportSchedule {
        t0,
        dt: params.dt,
        samples,
    })
}

fn transition(dt: f64) -> (Matrix3<f64>, Vector3<f64>) {
    let a = Matrix3::new(1.0, dt, dt * dt / 2.0, 0.0, 1.0, dt, 0.0, 0.0, 1.0);
    let b = Vector3::new(dt * dt * dt / 6.0, dt * dt / 2.0, dt);
    (a, b)
}

/// Condensed prediction for one axis: `Z = zx · x0 + zu · U` and
/// `X_N = fx · x0 + fu · U`.
struct Prediction {
    zx: DMatrix<f64>,
    zu: DMatrix<f64>,
    fx: Matrix3<f64>,
    fu: DMatrix<f64>,
}

fn prediction(n: usize, params: &PreviewParams) -> Prediction {
    let (a, b) = transition(params.dt);
    let c = Vector3::new(1.0, 0.0, -params.omega2_inv());
    let mut zx = DMatrix::zeros(n, 3);
    let mut zu = DMatrix::zeros(n, n);
    // powers[k] = A^k
    let mut powers = Vec::with_capacity(n + 1);
    powers.push(Matrix3::identity());
    for k in 0..n {
        let next = a * powers[k];
        powers.push(next);
    }
    // impulse[k] = C A^k B
    let impulse: Vec<f64> = (0..n).map(|k| c.dot(&(powers[k] * b))).collect();
    for k in 0..n {
        let row = c.transpose() * powers[k + 1];
        for j in 0..3 {
            zx[(k, j)] = row[j];
        }
        for j in 0..=k {
            zu[(k, j)] = impulse[k - j];
        }
    }
    let mut fu = DMatrix::zeros(3, n);
    for j in 0..n {
        fu.set_column(j, &(powers[n - 1 - j] * b));
    }
    Prediction {
        zx,
        zu,
        fx: powers[n],
        fu,
    }
}

/// Boundary condition imposed at the end of the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Terminal {
    Free,
    /// Exact position, velocity and acceleration.
    State(ComState),
    /// Capture point `c + ċ/ω` pinned, leaving the rest of the state free.
    CapturePoint { point: Point2<f64> },
}

/// Capture point at the last ZMP reference. Once the horizon lies in the
/// held final phase this brings the CoM to rest over the final reference,
/// and unlike a rest constraint it stays feasible mid-walk.
pub fn terminal_for(schedule: &SupportSchedule) -> Terminal {
    match schedule.samples.last() {
        None => Terminal::Free,
        Some(s) => Terminal::CapturePoint { point: s.zmp_reference },
    }
}

/// Rest at the last ZMP reference.
pub fn rest_terminal(schedule: &SupportSchedule) -> Terminal {
    match schedule.samples.last() {
        None => Terminal::Free,
        Some(s) => Terminal::State(ComState::at_rest(s.zmp_reference.coords)),
    }
}

/// The preview QP plus the constant needed to report the true objective.
#[derive(Debug, Clone)]
pub struct PreviewProblem {
    pub qp: QuadProgProblem,
    /// `Σ ‖z - z^d‖² + ε Σ ‖jerk‖² = qp.objective(u) + constant`.
    pub constant: f64,
    pub terminal_rows: usize,
}

impl PreviewProblem {
    pub fn objective(&self, jerks: &DVector<f64>) -> f64 {
        self.qp.objective(jerks) + self.constant
    }
}

pub fn build_problem(
    c_init: &ComState,
    terminal: &Terminal,
    schedule: &SupportSchedule,
    params: &PreviewParams,
) -> Result<PreviewProblem, PreviewError> {
    params.validate()?;
    let n = params.horizon_steps;
    if schedule.len() != n {
        return Err(PreviewError::ScheduleLength {
            expected: n,
            got: schedule.len(),
        });
    }
    let pred = prediction(n, params);
    let x0 = [c_init.axis(0), c_init.axis(1)];
    let free = [&pred.zx * x0[0], &pred.zx * x0[1]];

    // cost
    let eps = params.jerk_weight;
    let ztz = pred.zu.transpose() * &pred.zu;
    let mut cost = DMatrix::zeros(2 * n, 2 * n);
    let mut linear = DVector::zeros(2 * n);
    let mut constant = 0.0;
    for axis in 0..2 {
        let residual = DVector::from_iterator(
            n,
            (0..n).map(|k| free[axis][k] - schedule.samples[k].zmp_reference[axis]),
        );
        let block = (&ztz + DMatrix::identity(n, n) * eps) * 2.0;
        cost.view_mut((axis * n, axis * n), (n, n)).copy_from(&block);
        linear
            .rows_mut(axis * n, n)
            .copy_from(&(pred.zu.transpose() * &residual * 2.0));
        constant += residual.norm_squared();
    }

    // support polygon rows
    let planes: Vec<Vec<HalfPlane>> = schedule.samples.iter().map(|s| s.polygon.halfplanes()).collect();
    let rows: usize = planes.iter().map(Vec::len).sum();
    let mut a_in = DMatrix::zeros(rows, 2 * n);
    let mut b_in = DVector::zeros(rows);
    let mut r = 0;
    for (k, hp) in planes.iter().enumerate() {
        for h in hp {
            for j in 0..=k {
                a_in[(r, j)] = h.normal.x * pred.zu[(k, j)];
                a_in[(r, n + j)] = h.normal.y * pred.zu[(k, j)];
            }
            b_in[r] = h.offset - params.polygon_margin - h.normal.x * free[0][k] - h.normal.y * free[1][k];
            r += 1;
        }
    }

    let mut qp = QuadProgProblem::new(cost, linear).with_inequalities(a_in, b_in);
    let mut terminal_rows = 0;
    match terminal {
        Terminal::Free => {}
        Terminal::State(fin) => {
            let mut a_eq = DMatrix::zeros(6, 2 * n);
            let mut b_eq = DVector::zeros(6);
            for axis in 0..2 {
                let target = fin.axis(axis) - pred.fx * x0[axis];
                a_eq.view_mut((3 * axis, axis * n), (3, n)).copy_from(&pred.fu);
                b_eq.rows_mut(3 * axis, 3).copy_from(&target);
            }
            qp = qp.with_equalities(a_eq, b_eq);
            terminal_rows = 6;
        }
        Terminal::CapturePoint { point } => {
            let w = Vector3::new(1.0, params.omega2_inv().sqrt(), 0.0);
            let mut a_eq = DMatrix::zeros(2, 2 * n);
            let mut b_eq = DVector::zeros(2);
            for axis in 0..2 {
                let row = w.transpose() * &pred.fu;
                a_eq.view_mut((axis, axis * n), (1, n)).copy_from(&row);
                b_eq[axis] = point[axis] - w.dot(&(pred.fx * x0[axis]));
            }
            qp = qp.with_equalities(a_eq, b_eq);
            terminal_rows = 2;
        }
    }
    Ok(PreviewProblem {
        qp,
        constant,
        terminal_rows,
    })
}

/// C² CoM trajectory with constant jerk on each interval. Times are relative
/// to `t0` of the schedule it was planned on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComTrajectory {
    pub t0: f64,
    pub dt: f64,
    pub jerks: Vec<Vector2<f64>>,
    /// State at each interval boundary, `jerks.len() + 1` entries.
    pub nodes: Vec<ComState>,
    pub com_height: f64,
    pub gravity: f64,
    /// Tracking plus regularization cost at the optimum.
    pub objective: f64,
}

impl ComTrajectory {
    pub fn from_jerks(init: &ComState, jerks: Vec<Vector2<f64>>, params: &PreviewParams, t0: f64) -> Self {
        let (a, b) = transition(params.dt);
        let mut nodes = Vec::with_capacity(jerks.len() + 1);
        nodes.push(*init);
        let (mut x, mut y) = (init.axis(0), init.axis(1));
        for u in &jerks {
            x = a * x + b * u.x;
            y = a * y + b * u.y;
            nodes.push(ComState::from_axes(&x, &y));
        }
        Self {
            t0,
            dt: params.dt,
            jerks,
            nodes,
            com_height: params.com_height,
            gravity: params.gravity,
            objective: f64::NAN,
        }
    }

    pub fn duration(&self) -> f64 {
        self.jerks.len() as f64 * self.dt
    }

    /// State at relative time `t ∈ [0, duration]`.
    pub fn eval(&self, t: f64) -> Result<ComState, PreviewError> {
        let end = self.duration();
        if !(t >= -1e-12 && t <= end + 1e-12) {
            return Err(PreviewError::OutOfRange { t, end });
        }
        let k = ((t / self.dt).floor() as usize).min(self.jerks.len() - 1);
        Ok(self.eval_segment(k, t - k as f64 * self.dt))
    }

    /// State `tau` seconds into interval `k`.
    pub fn eval_segment(&self, k: usize, tau: f64) -> ComState {
        let n = &self.nodes[k];
        let j = self.jerks[k];
        let t2 = tau * tau;
        let t3 = t2 * tau;
        ComState {
            position: n.position + n.velocity * tau + n.acceleration * (t2 / 2.0) + j * (t3 / 6.0),
            velocity: n.velocity + n.acceleration * tau + j * (t2 / 2.0),
            acceleration: n.acceleration + j * tau,
        }
    }

    pub fn zmp(&self, t: f64) -> Result<Point2<f64>, PreviewError> {
        let s = self.eval(t)?;
        Ok(Point2::from(s.position - s.acceleration * (self.com_height / self.gravity)))
    }

    /// CSV with header `t,cx,cy,vx,vy,ax,ay,zmpx,zmpy`, one row per interval boundary.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,cx,cy,vx,vy,ax,ay,zmpx,zmpy\n");
        let k = self.com_height / self.gravity;
        for (i, s) in self.nodes.iter().enumerate() {
            let z = s.position - s.acceleration * k;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                self.t0 + i as f64 * self.dt,
                s.position.x,
                s.position.y,
                s.velocity.x,
                s.velocity.y,
                s.acceleration.x,
                s.acceleration.y,
                z.x,
                z.y
            ));
        }
        out
    }
}

pub fn plan_com(
    c_init: &ComState,
    terminal: &Terminal,
    schedule: &SupportSchedule,
    params: &PreviewParams,
) -> Result<ComTrajectory, PreviewError> {
    let problem = build_problem(c_init, terminal, schedule, params)?;
    let sol = qp::solve_default(&problem.qp)?;
    match sol.status {
        QpStatus::Optimal => {}
        QpStatus::MaxIterations => return Err(PreviewError::MaxIterations(sol.iterations)),
        QpStatus::Infeasible => {
            let family = if problem.terminal_rows > 0 {
                let relaxed = build_problem(c_init, &Terminal::Free, schedule, params)?;
                if qp::solve_default(&relaxed.qp)?.is_optimal() {
                    "terminal_state"
                } else {
                    "zmp_support"
                }
            } else {
                "zmp_support"
            };
            return Err(PreviewError::Infeasible { family });
        }
    }
    let n = params.horizon_steps;
    let jerks = (0..n).map(|k| Vector2::new(sol.x[k], sol.x[n + k])).collect();
    let mut traj = ComTrajectory::from_jerks(c_init, jerks, params, schedule.t0);
    traj.objective = problem.objective(&sol.x);
    Ok(traj)
}


#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn place(x: f64, y: f64, side: Side) -> Placement {
        Placement {
            pose: Pose2::new(x, y, 0.0),
            side,
        }
    }

    #[test]
    fn single_footstep_schedule() {
        let params = PreviewParams::default();
        let s = build_schedule(&[place(0.1, 0.2, Side::Left)], &Timing::default(), &params, 0.0).unwrap();
        assert_eq!(s.len(), 48);
        for smp in &s.samples {
            assert_eq!(smp.polygon, s.samples[0].polygon);
            assert_eq!(smp.polygon.len(), 4);
            assert_eq!(smp.zmp_reference, Point2::new(0.1, 0.2));
            assert!(smp.single);
        }
    }

    #[test]
    fn empty_footsteps_rejected() {
        let r = build_schedule(&[], &Timing::default(), &PreviewParams::default(), 0.0);
        assert_eq!(r.unwrap_err(), PreviewError::EmptyFootsteps);
    }

    #[test]
    fn ten_steps_per_single_support() {
        assert_eq!(phase_steps(0.36, 0.036), 10);
        let feet = [
            place(0.0, 0.05, Side::Left),
            place(0.0, -0.05, Side::Right),
            place(0.05, 0.05, Side::Left),
            place(0.1, -0.05, Side::Right),
        ];
        let params = PreviewParams::default();
        let s = build_schedule(&feet, &Timing::default(), &params, 0.0).unwrap();
        let run = s.samples.iter().filter(|x| x.single && x.footstep == 1).count();
        assert_eq!(run, 10);
    }

    #[test]
    fn double_support_hull() {
        let feet = [place(0.0, 0.05, Side::Left), place(0.05, -0.05, Side::Right)];
        let timing = Timing::default();
        let s = build_schedule(&feet, &timing, &PreviewParams::default(), 0.0).unwrap();
        let poly = &s.samples[0].polygon;
        assert!(!s.samples[0].single);
        assert!(poly.len() > 4);
        for f in &feet {
            for c in footprint(f, &timing).unwrap().corners() {
                assert!(poly.halfplanes().iter().all(|h| h.signed_distance(&c) <= 1e-12));
            }
        }
    }

    #[test]
    fn sizes_and_horizon() {
        let params = PreviewParams::default();
        assert_relative_eq!(params.horizon(), 1.728, epsilon = 1e-12);
        let s = build_schedule(&[place(0.0, 0.0, Side::Left)], &Timing::default(), &params, 0.0).unwrap();
        let p = build_problem(&ComState::default(), &Terminal::Free, &s, &params).unwrap();
        assert_eq!(p.qp.dim(), 96);
    }

    #[test]
    fn stationary_plan_is_zero() {
        let params = PreviewParams::default();
        let s = build_schedule(&[place(0.0, 0.0, Side::Left)], &Timing::default(), &params, 0.0).unwrap();
        let rest = ComState::default();
        let traj = plan_com(&rest, &Terminal::State(rest), &s, &params).unwrap();
        assert!(traj.jerks.iter().all(|j| j.norm() < 1e-9));
        assert!(traj.objective.abs() < 1e-12);
        for i in 0..=100 {
            let st = traj.eval(traj.duration() * i as f64 / 100.0).unwrap();
            assert!(st.position.norm() < 1e-9);
        }
    }

    #[test]
    fn eval_edges() {
        let params = PreviewParams::default();
        let init = ComState {
            position: Vector2::new(0.1, -0.2),
            velocity: Vector2::new(0.3, 0.1),
            acceleration: Vector2::zeros(),
        };
        let traj = ComTrajectory::from_jerks(&init, vec![Vector2::zeros(); 10], &params, 0.0);
        assert_eq!(traj.eval(0.0).unwrap(), init);
        let t = 0.2;
        let s = traj.eval(t).unwrap();
        assert_relative_eq!(s.position, init.position + init.velocity * t, epsilon = 1e-15);
        assert_relative_eq!(traj.zmp(t).unwrap().coords, s.position, epsilon = 1e-15);
        assert!(matches!(traj.eval(-0.01), Err(PreviewError::OutOfRange { .. })));
        assert!(matches!(traj.eval(0.5), Err(PreviewError::OutOfRange { .. })));
    }

    #[test]
    fn continuity_at_boundaries() {
        let params = PreviewParams::default();
        let jerks: Vec<_> = (0..20).map(|k| Vector2::new((k as f64).sin(), (k as f64 * 0.7).cos())).collect();
        let traj = ComTrajectory::from_jerks(&ComState::default(), jerks, &params, 0.0);
        for k in 0..19 {
            let left = traj.eval_segment(k, params.dt);
            let right = traj.eval_segment(k + 1, 0.0);
            assert_relative_eq!(left.position, right.position, epsilon = 1e-12);
            assert_relative_eq!(left.velocity, right.velocity, epsilon = 1e-12);
            assert_relative_eq!(left.acceleration, right.acceleration, epsilon = 1e-12);
        }
    }

    #[test]
    fn phase_timeline_shapes() {
        let dt = 0.036;
        let t = Timing::default();
        let one = phases(&[place(0.0, 0.0, Side::Left)], &t, dt).unwrap();
        assert_eq!(one.len(), 1);
        let four = phases(
            &[
                place(0.0, 0.05, Side::Left),
                place(0.0, -0.05, Side::Right),
                place(0.0, 0.05, Side::Left),
                place(0.0, -0.05, Side::Right),
            ],
            &t,
            dt,
        )
        .unwrap();
        assert_eq!(four.iter().filter(|p| p.is_single()).count(), 2);
        assert!(four.last().unwrap().end.is_infinite());
        for w in four.windows(2) {
            assert_eq!(w[0].end, w[1].start);
        }
    }

    #[test]
    fn infeasible_terminal_is_named() {
        let params = PreviewParams {
            horizon_steps: 10,
            ..Default::default()
        };
        let s = build_schedule(&[place(0.0, 0.0, Side::Left)], &Timing::default(), &params, 0.0).unwrap();
        let far = ComState::at_rest(Vector2::new(5.0, 0.0));
        let err = plan_com(&ComState::default(), &Terminal::State(far), &s, &params).unwrap_err();
        assert_eq!(err, PreviewError::Infeasible { family: "terminal_state" });
    }
}
