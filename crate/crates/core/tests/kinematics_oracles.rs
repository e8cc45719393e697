use nalgebra::{DMatrix, DVector, Isometry3, Rotation3, Translation3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use strider_core::fixture::{biped, LEFT_SOLE, RIGHT_SOLE, TRUNK};
use strider_core::kinematics::{Configuration, RobotModel};

const EPS: f64 = 1e-6;

fn random_configuration(model: &RobotModel, rng: &mut ChaCha8Rng) -> Configuration {
    let mut q = Configuration::neutral(model);
    for (i, j) in model.actuated_joints().enumerate() {
        q.joints[i] = rng.random_range(j.lower..j.upper);
    }
    q.base_position = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.0..0.5));
    q.base_orientation = UnitQuaternion::from_euler_angles(
        rng.random_range(-0.5..0.5),
        rng.random_range(-0.5..0.5),
        rng.random_range(-3.0..3.0),
    );
    q
}

fn perturbed(q: &Configuration, i: usize, h: f64, n: usize) -> Configuration {
    let mut d = DVector::zeros(n);
    d[i] = h;
    q.integrate(&d)
}

fn check_column(analytic: &DVector<f64>, numeric: &DVector<f64>) -> f64 {
    (analytic - numeric).norm() / numeric.norm().max(1e-3)
}

#[test]
fn frame_jacobians_match_finite_differences() {
    let model = biped();
    let n = model.dof();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let q = random_configuration(&model, &mut rng);
        for frame in [LEFT_SOLE, RIGHT_SOLE, TRUNK] {
            let j = model.frame_jacobian(&q, frame).unwrap();
            for i in 0..n {
                let plus = model.forward_kinematics(&perturbed(&q, i, EPS, n), frame).unwrap();
                let minus = model.forward_kinematics(&perturbed(&q, i, -EPS, n), frame).unwrap();
                let lin = (plus.translation.vector - minus.translation.vector) / (2.0 * EPS);
                let ang = (plus.rotation * minus.rotation.inverse()).scaled_axis() / (2.0 * EPS);
                let numeric = DVector::from_iterator(6, lin.iter().chain(ang.iter()).copied());
                let err = check_column(&j.column(i).into_owned(), &numeric);
                worst = worst.max(err);
            }
        }
    }
    assert!(worst < 1e-5, "worst relative column error {worst}");
}

#[test]
fn com_jacobian_matches_finite_differences() {
    let model = biped();
    let n = model.dof();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let q = random_configuration(&model, &mut rng);
        let j: DMatrix<f64> = model.com_jacobian(&q).unwrap();
        for i in 0..n {
            let plus = model.com(&perturbed(&q, i, EPS, n)).unwrap();
            let minus = model.com(&perturbed(&q, i, -EPS, n)).unwrap();
            let numeric = DVector::from_iterator(3, ((plus - minus) / (2.0 * EPS)).iter().copied());
            worst = worst.max(check_column(&j.column(i).into_owned(), &numeric));
        }
    }
    assert!(worst < 1e-5, "worst relative column error {worst}");
}

#[test]
fn hand_composed_leg_chain() {
    let model = biped();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let q = random_configuration(&model, &mut rng);
    let angle = |name: &str| q.joints[model.joint_index(name).unwrap()];
    let t = |x: f64, y: f64, z: f64| Isometry3::from_parts(Translation3::new(x, y, z), UnitQuaternion::identity());
    let r = |axis: Vector3<f64>, a: f64| {
        Isometry3::from_parts(
            Translation3::identity(),
            UnitQuaternion::from_rotation_matrix(&Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), a)),
        )
    };
    let chain = q.base()
        * t(0.0, 0.05, -0.05)
        * r(Vector3::z(), angle("left_hip_yaw"))
        * t(0.0, 0.0, -0.03)
        * r(Vector3::x(), angle("left_hip_roll"))
        * r(Vector3::y(), angle("left_hip_pitch"))
        * t(0.0, 0.0, -0.1)
        * r(Vector3::y(), angle("left_knee"))
        * t(0.0, 0.0, -0.1)
        * r(Vector3::y(), angle("left_ankle_pitch"))
        * r(Vector3::x(), angle("left_ankle_roll"))
        * t(0.0, 0.0, -0.035);
    let fk = model.forward_kinematics(&q, LEFT_SOLE).unwrap();
    assert!((fk.translation.vector - chain.translation.vector).norm() < 1e-10);
    assert!((fk.translation.z - chain.translation.z).abs() < 1e-10);
}

#[test]
fn total_mass_is_sum_of_links() {
    let model = biped();
    let sum: f64 = model.links().iter().map(|l| l.mass).sum();
    assert_eq!(model.total_mass(), sum);
}

#[test]
fn base_rigid_motion_equivariance() {
    let model = biped();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let q = random_configuration(&model, &mut rng);
    let g = Isometry3::from_parts(
        Translation3::new(0.3, -1.2, 0.1),
        UnitQuaternion::from_euler_angles(0.1, -0.2, 0.9),
    );
    let mut moved = q.clone();
    let base = g * q.base();
    moved.base_position = base.translation.vector;
    moved.base_orientation = base.rotation;
    for frame in [LEFT_SOLE, RIGHT_SOLE, TRUNK] {
        let a = g * model.forward_kinematics(&q, frame).unwrap();
        let b = model.forward_kinematics(&moved, frame).unwrap();
        assert!((a.translation.vector - b.translation.vector).norm() < 1e-12);
        assert!(a.rotation.angle_to(&b.rotation) < 1e-12);
    }
    let c = g * model.com(&q).unwrap();
    assert!((c - model.com(&moved).unwrap()).norm() < 1e-12);
}
