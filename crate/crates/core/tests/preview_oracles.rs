mod common;

use nalgebra::{DVector, Point2, Vector2};
use strider_core::footsteps::Side;
use strider_core::geom::Pose2;
use strider_core::preview::{
    build_problem, build_schedule, plan_com, rest_terminal, terminal_for, ComState, Terminal, Placement, PreviewParams, SupportSchedule, Timing,
};

const SPACING: f64 = 0.10;

fn foot(x: f64, side: Side) -> Placement {
    Placement {
        pose: Pose2::new(x, side.sign() * SPACING / 2.0, 0.0),
        side,
    }
}

fn march(steps: usize) -> Vec<Placement> {
    let mut out = vec![foot(0.0, Side::Left), foot(0.0, Side::Right)];
    for i in 0..steps {
        out.push(foot(0.0, if i % 2 == 0 { Side::Left } else { Side::Right }));
    }
    out
}

fn walk_forward(steps: usize, stride: f64) -> Vec<Placement> {
    let mut out = vec![foot(0.0, Side::Left), foot(0.0, Side::Right)];
    for i in 0..steps {
        let side = if i % 2 == 0 { Side::Left } else { Side::Right };
        out.push(foot(stride * (i + 1) as f64, side));
    }
    out
}

fn zmp_samples(traj: &strider_core::preview::ComTrajectory, params: &PreviewParams) -> Vec<Point2<f64>> {
    traj.nodes[1..].iter().map(|s| s.zmp(params)).collect()
}

fn check_solution(schedule: &SupportSchedule, params: &PreviewParams, init: &ComState, terminal: &Terminal) {
    let traj = plan_com(init, terminal, schedule, params).unwrap();
    let k = params.com_height / params.gravity;
    // LIPM identity at every sample
    for (i, node) in traj.nodes.iter().enumerate().skip(1) {
        let z = traj.zmp(i as f64 * params.dt).unwrap();
        let direct = node.position - node.acceleration * k;
        assert!((z.coords - direct).norm() < 1e-9);
    }
    // support constraints
    let zmps = zmp_samples(&traj, params);
    for (s, z) in schedule.samples.iter().zip(&zmps) {
        for h in s.polygon.halfplanes() {
            assert!(h.signed_distance(z) <= -params.polygon_margin + 1e-6, "{}", h.signed_distance(z));
        }
    }
    // objective recomputed from the trajectory
    let mut recomputed = 0.0;
    for (s, z) in schedule.samples.iter().zip(&zmps) {
        recomputed += (z - s.zmp_reference).norm_squared();
    }
    recomputed += params.jerk_weight * traj.jerks.iter().map(|j| j.norm_squared()).sum::<f64>();
    assert!(
        (recomputed - traj.objective).abs() <= 1e-8 * recomputed.abs().max(1e-12),
        "{recomputed} vs {}",
        traj.objective
    );
    let end = traj.nodes.last().unwrap();
    match terminal {
        Terminal::State(f) => {
            assert!((end.position - f.position).norm() < 1e-6);
            assert!((end.velocity - f.velocity).norm() < 1e-6);
        }
        Terminal::CapturePoint { point } => {
            let xi = end.position + end.velocity * k.sqrt();
            assert!((xi - point.coords).norm() < 1e-6);
        }
        Terminal::Free => {}
    }
}

#[test]
fn receding_horizon_walk_satisfies_model_and_constraints() {
    let params = PreviewParams::default();
    let timing = Timing::default();
    let feet = walk_forward(8, 0.05);
    let period = 0.025;
    let mut state = ComState::default();
    let mut t0 = 0.0;
    while t0 < 5.0 {
        let schedule = build_schedule(&feet, &timing, &params, t0).unwrap();
        let terminal = terminal_for(&schedule);
        check_solution(&schedule, &params, &state, &terminal);
        let traj = plan_com(&state, &terminal, &schedule, &params).unwrap();
        state = traj.eval(period).unwrap();
        t0 += period;
    }
    // settled at rest over the middle of the last two prints
    let last = (feet[feet.len() - 1].pose.translation() + feet[feet.len() - 2].pose.translation()) / 2.0;
    assert!((state.position - last).norm() < 1e-3, "{state:?}");
    assert!(state.velocity.norm() < 1e-3);
    let schedule = build_schedule(&feet, &timing, &params, t0).unwrap();
    check_solution(&schedule, &params, &state, &rest_terminal(&schedule));
}

#[test]
fn march_in_place_alternates_and_stays_between_feet() {
    let params = PreviewParams::default();
    let timing = Timing::default();
    let feet = march(6);
    let schedule = build_schedule(&feet, &timing, &params, 0.0).unwrap();
    let traj = plan_com(&ComState::default(), &terminal_for(&schedule), &schedule, &params).unwrap();
    let zmps = zmp_samples(&traj, &params);
    let mut seen_left = false;
    let mut seen_right = false;
    for (s, z) in schedule.samples.iter().zip(&zmps) {
        if s.single {
            assert!(s.polygon.contains(z));
            if z.y > 0.0 {
                seen_left = true;
            } else {
                seen_right = true;
            }
        }
    }
    assert!(seen_left && seen_right);
    let ys: Vec<f64> = traj.nodes.iter().map(|n| n.position.y).collect();
    let amplitude = ys.iter().cloned().fold(f64::MIN, f64::max) - ys.iter().cloned().fold(f64::MAX, f64::min);
    assert!(amplitude > 0.0 && amplitude < SPACING, "{amplitude}");
}

#[test]
fn tiny_march_matches_interior_point_solution() {
    let params = PreviewParams {
        horizon_steps: 6,
        ..Default::default()
    };
    let timing = Timing {
        single_support: 0.072,
        double_support: 0.036,
        initial_double_support: 0.036,
        ..Default::default()
    };
    let schedule = build_schedule(&march(4), &timing, &params, 0.0).unwrap();
    let free = plan_com(&ComState::default(), &Terminal::Free, &schedule, &params).unwrap();
    let end = *free.nodes.last().unwrap();
    let k = (params.com_height / params.gravity).sqrt();
    let capture = Point2::from(end.position + end.velocity * k);
    let moved = ComState {
        position: end.position + Vector2::new(0.002, -0.003),
        ..end
    };
    for terminal in [
        Terminal::Free,
        Terminal::State(end),
        Terminal::State(moved),
        Terminal::CapturePoint { point: capture },
    ] {
        let problem = build_problem(&ComState::default(), &terminal, &schedule, &params).unwrap();
        let ours = plan_com(&ComState::default(), &terminal, &schedule, &params).unwrap();
        let x = DVector::from_iterator(12, ours.jerks.iter().map(|j| j.x).chain(ours.jerks.iter().map(|j| j.y)));
        let reference = common::interior_point_solve(&problem.qp).expect("reference solve");
        let diff = (&x - &reference).amax();
        assert!(diff < 1e-6 * reference.amax().max(1.0), "diff {diff}");
    }
}

#[test]
fn receding_horizon_consistency() {
    let params = PreviewParams::default();
    let schedule = build_schedule(&walk_forward(4, 0.04), &Timing::default(), &params, 0.0).unwrap();
    let terminal = terminal_for(&schedule);
    let full = plan_com(&ComState::default(), &terminal, &schedule, &params).unwrap();
    for j in [5, 12, 20] {
        let tail = schedule.tail(j);
        let p = PreviewParams {
            horizon_steps: params.horizon_steps - j,
            ..params
        };
        let again = plan_com(&full.nodes[j], &terminal, &tail, &p).unwrap();
        for (a, b) in again.nodes.iter().zip(&full.nodes[j..]) {
            assert!((a.position - b.position).norm() < 1e-6);
            assert!((a.velocity - b.velocity).norm() < 1e-6);
        }
    }
}

#[test]
fn zmp_offset_shifts_stationary_zmp() {
    let base = PreviewParams::default();
    let shifted = PreviewParams {
        zmp_reference_offset: [0.01, 0.0],
        ..base
    };
    let feet = [foot(0.0, Side::Left)];
    let run = |p: &PreviewParams| {
        let schedule = build_schedule(&feet, &Timing::default(), p, 0.0).unwrap();
        let Terminal::State(fin) = rest_terminal(&schedule) else { unreachable!() };
        let traj = plan_com(&fin, &Terminal::State(fin), &schedule, p).unwrap();
        zmp_samples(&traj, p)
    };
    let a = run(&base);
    let b = run(&shifted);
    for (za, zb) in a.iter().zip(&b) {
        assert!(((zb - za) - Vector2::new(0.01, 0.0)).norm() < 1e-9);
    }
}
