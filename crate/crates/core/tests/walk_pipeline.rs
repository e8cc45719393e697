use nalgebra::UnitQuaternion;
use strider_core::fixture::{biped, standing_configuration, LEFT_SOLE, RIGHT_SOLE};
use strider_core::footsteps::Side;
use strider_core::geom::Pose2;
use strider_core::kinematics::{Configuration, RobotModel};
use strider_core::preview::{Placement, PhaseKind};
use strider_core::walk::{initial_stance, plan_walk, PhaseLabel, WalkConfig, WalkOutput, WalkParams, WalkSession};
use strider_core::wbik::{FrameNames, IkMode, IkParams};

fn stance(model: &RobotModel) -> Configuration {
    let walk = WalkParams::default();
    let left = Pose2::new(0.0, 0.05, 0.0);
    let right = Pose2::new(0.0, -0.05, 0.0);
    initial_stance(model, &standing_configuration(model), &left, &right, 0.0, &walk, &IkParams::default()).unwrap()
}

fn march(n: usize) -> Vec<Placement> {
    (0..n)
        .map(|i| {
            let side = if i % 2 == 0 { Side::Right } else { Side::Left };
            Placement {
                pose: Pose2::new(0.0, side.sign() * 0.05, 0.0),
                side,
            }
        })
        .collect()
}

fn walk(mode: IkMode, target: Pose2) -> WalkOutput {
    let model = biped();
    let mut cfg = WalkConfig::new();
    cfg.walk.mode = mode;
    plan_walk(&model, &standing_configuration(&model), &Pose2::identity(), &target, &cfg).unwrap()
}

#[test]
fn march_in_place_session_shape() {
    let model = biped();
    let q0 = stance(&model);
    let session = WalkSession::new(&model, &march(2), &WalkParams::default(), &FrameNames::default(), &q0).unwrap();
    let singles = session.phases().iter().filter(|p| p.is_single()).count();
    assert_eq!(singles, 2);
    assert!(session.phases().iter().any(|p| matches!(p.kind, PhaseKind::Double { .. })));
    let com = model.com(&q0).unwrap();
    assert!((session.initial_com().position - com.coords.xy()).norm() < 1e-12);
    assert!(WalkSession::new(&model, &[], &WalkParams::default(), &FrameNames::default(), &q0).is_err());
}

#[test]
fn first_tick_is_initial_stance() {
    let model = biped();
    let q0 = stance(&model);
    let mut session = WalkSession::new(&model, &march(4), &WalkParams::default(), &FrameNames::default(), &q0).unwrap();
    let t = session.tick(0.0, true).unwrap();
    let left = model.forward_kinematics(&q0, LEFT_SOLE).unwrap();
    let right = model.forward_kinematics(&q0, RIGHT_SOLE).unwrap();
    // first step moves the right foot, so the left foot supports
    assert_eq!(t.support_side, Side::Left);
    assert!((t.support_foot.translation.vector - left.translation.vector).norm() < 1e-9);
    assert!((t.swing_foot.translation.vector - right.translation.vector).norm() < 1e-9);
    assert!((t.com_target - model.com(&q0).unwrap().coords).norm() < 1e-9);
    let trunk = model.forward_kinematics(&q0, "trunk").unwrap();
    assert!(trunk.rotation.angle_to(&t.trunk_orientation) < 1e-8);
}

#[test]
fn contact_gate_delays_by_withheld_time() {
    let model = biped();
    let q0 = stance(&model);
    let params = WalkParams::default();
    let run = |withhold: f64| {
        let mut s = WalkSession::new(&model, &march(4), &params, &FrameNames::default(), &q0).unwrap();
        let first_ss_end = s.phases().iter().find(|p| p.is_single()).unwrap().end;
        let mut ticks = Vec::new();
        let mut k = 0;
        loop {
            let now = k as f64 * params.control_period;
            let contact = !(now >= first_ss_end - 1e-9 && now < first_ss_end + withhold - 1e-9);
            ticks.push(s.tick(now, contact).unwrap());
            if s.finished() {
                return (ticks, now);
            }
            k += 1;
        }
    };
    let (plain, end_plain) = run(0.0);
    for t in &plain {
        assert!((t.trajectory_time - t.time).abs() < 1e-12);
    }
    let (delayed, end_delayed) = run(0.05);
    assert!((end_delayed - end_plain - 0.05).abs() < 1e-9, "{end_plain} {end_delayed}");
    let frozen: Vec<_> = delayed.iter().filter(|t| t.frozen).collect();
    assert_eq!(frozen.len(), 10);
    for t in &frozen {
        assert_eq!(t.com_target, frozen[0].com_target);
        assert_eq!(t.swing_foot, frozen[0].swing_foot);
        assert_eq!(t.support_foot, frozen[0].support_foot);
    }
    for w in delayed.windows(2) {
        assert!(w[1].trajectory_time >= w[0].trajectory_time);
    }
}

#[test]
fn exchanges_follow_the_nominal_period() {
    let model = biped();
    let q0 = stance(&model);
    let params = WalkParams::default();
    let mut s = WalkSession::new(&model, &march(6), &params, &FrameNames::default(), &q0).unwrap();
    let ticks = s.run_to_end().unwrap();
    let mut changes = Vec::new();
    for w in ticks.windows(2) {
        if w[0].phase == PhaseLabel::Single && w[1].phase == PhaseLabel::Double {
            changes.push(w[1].time);
        }
    }
    for w in changes.windows(2) {
        assert!((w[1] - w[0] - (0.36 + 0.036)).abs() < params.control_period + 1e-9);
    }
}

#[test]
fn walk_one_meter_tracks_feet() {
    let out = walk(IkMode::Com, Pose2::new(1.0, 0.0, 0.0));
    let model = biped();
    let ik = IkParams::default();
    let mut prev = out.initial.clone();
    for (k, (q, t)) in out.joints.configurations.iter().zip(&out.ticks).enumerate() {
        // joint limits and velocity bounds
        assert!(q.within_limits(&model), "tick {k}");
        for (i, j) in model.actuated_joints().enumerate() {
            let step = (q.joints[i] - prev.joints[i]).abs();
            assert!(step <= ik.dt * j.velocity * ik.velocity_limit_scale + 1e-12, "tick {k} joint {}", j.name);
        }
        prev = q.clone();
        let res = &out.joints.residuals[k];
        assert!(res.hard_linear <= 1e-8, "tick {k}: {}", res.hard_linear);
        // realized support foot stays on its target
        let sole = if t.support_side == Side::Left { LEFT_SOLE } else { RIGHT_SOLE };
        let p = model.forward_kinematics(q, sole).unwrap();
        assert!((p.translation.vector - t.support_foot.translation.vector).norm() < 2e-3, "tick {k}");
        let swing = if t.support_side == Side::Left { RIGHT_SOLE } else { LEFT_SOLE };
        let s = model.forward_kinematics(q, swing).unwrap();
        assert!(s.translation.z > -1e-3);
    }
    // terminal swing error at each landing
    for w in out.ticks.windows(2).zip(out.joints.configurations.windows(2)) {
        let (t, q) = w;
        if t[0].phase == PhaseLabel::Single && t[1].phase == PhaseLabel::Double {
            let swing = if t[0].support_side == Side::Left { RIGHT_SOLE } else { LEFT_SOLE };
            let p = model.forward_kinematics(&q[0], swing).unwrap();
            let target = t[0].swing_foot;
            let pos = (p.translation.vector - target.translation.vector).norm();
            let rot = p.rotation.angle_to(&target.rotation);
            assert!(pos < 2e-3 && rot < 0.01, "{pos} {rot}");
        }
    }
    println!("steps {} ticks {}", out.footsteps.len(), out.ticks.len());
    let _ = UnitQuaternion::<f64>::identity();
}

#[test]
fn trunk_mode_lowers_knee_velocity() {
    let target = Pose2::new(0.6, 0.0, 0.0);
    let com = walk(IkMode::Com, target);
    let trunk = walk(IkMode::Trunk, target);
    for knee in ["left_knee", "right_knee"] {
        let a = com.report.joint(knee).unwrap().max_abs_velocity;
        let b = trunk.report.joint(knee).unwrap().max_abs_velocity;
        println!("{knee}: com {a} trunk {b}");
    }
    let max = |o: &WalkOutput| {
        ["left_knee", "right_knee"]
            .iter()
            .map(|k| o.report.joint(k).unwrap().max_abs_velocity)
            .fold(0.0, f64::max)
    };
    assert!(max(&trunk) < max(&com));
}

#[test]
fn pipeline_is_deterministic() {
    let a = walk(IkMode::Com, Pose2::new(0.3, 0.1, 0.4));
    let b = walk(IkMode::Com, Pose2::new(0.3, 0.1, 0.4));
    assert_eq!(a.joints.configurations, b.joints.configurations);
    assert_eq!(a.ticks, b.ticks);
}
