//! Bundled test robot: a 12-joint biped with kid-size proportions (legs of
//! two 0.1 m segments, about 4.7 kg). The dimensions are invented for
//! testing; they are not measurements of any real robot.

use nalgebra::{UnitQuaternion, Vector3};

use crate::kinematics::{Configuration, RobotModel};

pub const BIPED_URDF: &str = include_str!("../assets/biped.urdf");

pub const TRUNK: &str = "trunk";
pub const LEFT_SOLE: &str = "left_foot_sole";
pub const RIGHT_SOLE: &str = "right_foot_sole";

/// Knee flexion of the standing posture, a crouch deep enough to give the
/// short legs some reach; hip and ankle pitch take half of it.
pub const STANDING_KNEE: f64 = 1.6;

pub fn biped() -> RobotModel {
    RobotModel::from_urdf_str(BIPED_URDF).expect("bundled fixture parses")
}

/// Upright, knees bent, soles flat on `z = 0`, base above the origin.
pub fn standing_configuration(model: &RobotModel) -> Configuration {
    let mut q = Configuration::neutral(model);
    for side in ["left", "right"] {
        let set = |q: &mut Configuration, joint: &str, v: f64| {
            if let Some(i) = model.joint_index(&format!("{side}_{joint}")) {
                q.joints[i] = v;
            }
        };
        set(&mut q, "hip_pitch", -STANDING_KNEE / 2.0);
        set(&mut q, "knee", STANDING_KNEE);
        set(&mut q, "ankle_pitch", -STANDING_KNEE / 2.0);
    }
    q.base_orientation = UnitQuaternion::identity();
    let sole_z = model
        .forward_kinematics(&q, LEFT_SOLE)
        .map(|p| p.translation.z)
        .unwrap_or(0.0);
    q.base_position = Vector3::new(0.0, 0.0, -sole_z);
    q
}
