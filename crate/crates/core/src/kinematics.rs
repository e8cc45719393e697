//! Floating-base kinematic tree: URDF loading, forward kinematics, frame
//! and center-of-mass Jacobians.
//!
//! Tangent vectors have `6 + joints` entries: base linear increment (world),
//! base angular increment (world), then one entry per revolute joint in
//! declaration order. Jacobians use the same column layout and are
//! world-aligned at the frame origin, rows linear then angular.

use std::collections::{HashMap, VecDeque};
use std::path::Path;

use nalgebra::{
    DMatrix, DVector, Isometry3, Matrix3, Point3, Translation3, Unit, UnitQuaternion, Vector3,
};

use crate::error::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointKind {
    Revolute,
    Fixed,
}

#[derive(Debug, Clone)]
pub struct Link {
    pub name: String,
    pub mass: f64,
    pub com: Vector3<f64>,
    pub parent_joint: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Joint {
    pub name: String,
    pub kind: JointKind,
    pub parent: usize,
    pub child: usize,
    pub origin: Isometry3<f64>,
    pub axis: Unit<Vector3<f64>>,
    pub lower: f64,
    pub upper: f64,
    pub velocity: f64,
    /// Index into the configuration's joint vector, revolute joints only.
    pub index: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RobotModel {
    name: String,
    links: Vec<Link>,
    joints: Vec<Joint>,
    /// Joint indices in parent-before-child order.
    order: Vec<usize>,
    root: usize,
    link_index: HashMap<String, usize>,
    actuated: Vec<usize>,
    /// Revolute joints on the path root → link, per link.
    ancestors: Vec<Vec<usize>>,
    total_mass: f64,
}

/// Floating-base configuration.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Configuration {
    pub base_position: Vector3<f64>,
    pub base_orientation: UnitQuaternion<f64>,
    pub joints: DVector<f64>,
}

impl Configuration {
    pub fn neutral(model: &RobotModel) -> Self {
        Self {
            base_position: Vector3::zeros(),
            base_orientation: UnitQuaternion::identity(),
            joints: DVector::zeros(model.joint_count()),
        }
    }

    pub fn base(&self) -> Isometry3<f64> {
        Isometry3::from_parts(Translation3::from(self.base_position), self.base_orientation)
    }

    /// `q ⊕ δ`: base translated in world, base rotated by `exp(δω)` on the
    /// left, joints added.
    pub fn integrate(&self, delta: &DVector<f64>) -> Configuration {
        let lin = Vector3::new(delta[0], delta[1], delta[2]);
        let ang = Vector3::new(delta[3], delta[4], delta[5]);
        let mut joints = self.joints.clone();
        for i in 0..joints.len() {
            joints[i] += delta[6 + i];
        }
        Configuration {
            base_position: self.base_position + lin,
            base_orientation: UnitQuaternion::from_scaled_axis(ang) * self.base_orientation,
            joints,
        }
    }

    /// Tangent `δ` with `other ≈ self ⊕ δ`.
    pub fn difference(&self, other: &Configuration) -> DVector<f64> {
        let n = self.joints.len();
        let mut d = DVector::zeros(6 + n);
        let lin = other.base_position - self.base_position;
        let ang = (other.base_orientation * self.base_orientation.inverse()).scaled_axis();
        d.fixed_rows_mut::<3>(0).copy_from(&lin);
        d.fixed_rows_mut::<3>(3).copy_from(&ang);
        for i in 0..n {
            d[6 + i] = other.joints[i] - self.joints[i];
        }
        d
    }

    pub fn within_limits(&self, model: &RobotModel) -> bool {
        model
            .actuated_joints()
            .enumerate()
            .all(|(i, j)| self.joints[i] >= j.lower && self.joints[i] <= j.upper)
    }
}

fn parse_vec3(s: Option<&str>, default: Vector3<f64>) -> Result<Vector3<f64>, ModelError> {
    let Some(s) = s else { return Ok(default) };
    let vals: Result<Vec<f64>, _> = s.split_whitespace().map(str::parse::<f64>).collect();
    match vals {
        Ok(v) if v.len() == 3 => Ok(Vector3::new(v[0], v[1], v[2])),
        _ => Err(ModelError::Parse(format!("expected three numbers, got `{s}`"))),
    }
}

fn parse_origin(node: Option<roxmltree::Node>) -> Result<Isometry3<f64>, ModelError> {
    let Some(node) = node else {
        return Ok(Isometry3::identity());
    };
    let xyz = parse_vec3(node.attribute("xyz"), Vector3::zeros())?;
    let rpy = parse_vec3(node.attribute("rpy"), Vector3::zeros())?;
    Ok(Isometry3::from_parts(
        Translation3::from(xyz),
        UnitQuaternion::from_euler_angles(rpy.x, rpy.y, rpy.z),
    ))
}

fn parse_f64(node: roxmltree::Node, attr: &str) -> Result<f64, ModelError> {
    node.attribute(attr)
        .ok_or_else(|| ModelError::Parse(format!("<{}> missing `{attr}`", node.tag_name().name())))?
        .trim()
        .parse()
        .map_err(|_| ModelError::Parse(format!("<{}> has non-numeric `{attr}`", node.tag_name().name())))
}

fn child<'a, 'i>(node: roxmltree::Node<'a, 'i>, tag: &str) -> Option<roxmltree::Node<'a, 'i>> {
    node.children().find(|c| c.has_tag_name(tag))
}

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

impl RobotModel {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_urdf_str(&text)
    }

    pub fn from_urdf_str(text: &str) -> Result<Self, ModelError> {
        let doc = roxmltree::Document::parse(text)?;
        let robot = doc.root_element();
        if !robot.has_tag_name("robot") {
            return Err(ModelError::Parse("root element must be <robot>".into()));
        }
        let name = robot.attribute("name").unwrap_or("robot").to_string();

        let mut links = Vec::new();
        let mut link_index = HashMap::new();
        for node in robot.children().filter(|c| c.has_tag_name("link")) {
            let lname = node
                .attribute("name")
                .ok_or_else(|| ModelError::Parse("<link> without name".into()))?
                .to_string();
            let inertial = child(node, "inertial").ok_or_else(|| ModelError::MissingInertial(lname.clone()))?;
            let mass_node =
                child(inertial, "mass").ok_or_else(|| ModelError::MissingInertial(lname.clone()))?;
            let mass = parse_f64(mass_node, "value")?;
            if !(mass >= 0.0) {
                return Err(ModelError::Parse(format!("link `{lname}` has negative mass")));
            }
            let com = parse_origin(child(inertial, "origin"))?.translation.vector;
            if link_index.insert(lname.clone(), links.len()).is_some() {
                return Err(ModelError::Parse(format!("duplicate link `{lname}`")));
            }
            links.push(Link {
                name: lname,
                mass,
                com,
                parent_joint: None,
            });
        }
        if links.is_empty() {
            return Err(ModelError::Parse("no links".into()));
        }

        let mut joints = Vec::new();
        let mut actuated = Vec::new();
        for node in robot.children().filter(|c| c.has_tag_name("joint")) {
            let jname = node
                .attribute("name")
                .ok_or_else(|| ModelError::Parse("<joint> without name".into()))?
                .to_string();
            let kind = match node.attribute("type").unwrap_or("") {
                "revolute" => JointKind::Revolute,
                "fixed" => JointKind::Fixed,
                other => {
                    return Err(ModelError::UnsupportedJoint {
                        joint: jname,
                        kind: other.to_string(),
                    })
                }
            };
            let lookup = |tag: &str| -> Result<usize, ModelError> {
                let n = child(node, tag)
                    .ok_or_else(|| ModelError::Parse(format!("joint `{jname}` missing <{tag}>")))?;
                let l = n
                    .attribute("link")
                    .ok_or_else(|| ModelError::Parse(format!("joint `{jname}` <{tag}> without link")))?;
                link_index
                    .get(l)
                    .copied()
                    .ok_or_else(|| ModelError::Parse(format!("joint `{jname}` references unknown link `{l}`")))
            };
            let parent = lookup("parent")?;
            let child_link = lookup("child")?;
            let origin = parse_origin(child(node, "origin"))?;
            let axis_raw = parse_vec3(
                child(node, "axis").and_then(|a| a.attribute("xyz")),
                Vector3::x(),
            )?;
            if axis_raw.norm() < 1e-12 {
                return Err(ModelError::Parse(format!("joint `{jname}` has a zero axis")));
            }
            let axis = Unit::new_normalize(axis_raw);
            let (mut lower, mut upper, mut velocity) = (0.0, 0.0, f64::INFINITY);
            let mut index = None;
            if kind == JointKind::Revolute {
                let limit = child(node, "limit").ok_or_else(|| ModelError::InvalidLimits(jname.clone()))?;
                lower = parse_f64(limit, "lower")?;
                upper = parse_f64(limit, "upper")?;
                velocity = parse_f64(limit, "velocity")?;
                if !(lower < upper) || !(velocity >= 0.0) {
                    return Err(ModelError::InvalidLimits(jname));
                }
                index = Some(actuated.len());
                actuated.push(joints.len());
            }
            if links[child_link].parent_joint.is_some() {
                return Err(ModelError::NotATree(format!(
                    "link `{}` has more than one parent",
                    links[child_link].name
                )));
            }
            links[child_link].parent_joint = Some(joints.len());
            joints.push(Joint {
                name: jname,
                kind,
                parent,
                child: child_link,
                origin,
                axis,
                lower,
                upper,
                velocity,
                index,
            });
        }

        let roots: Vec<usize> = (0..links.len()).filter(|&i| links[i].parent_joint.is_none()).collect();
        if roots.len() != 1 {
            return Err(ModelError::NotATree(format!("expected one root link, found {}", roots.len())));
        }
        let root = roots[0];

        // breadth-first order from the root; unreachable links mean a cycle
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); links.len()];
        for (ji, j) in joints.iter().enumerate() {
            children[j.parent].push(ji);
        }
        let mut order = Vec::with_capacity(joints.len());
        let mut ancestors = vec![Vec::new(); links.len()];
        let mut queue = VecDeque::from([root]);
        let mut seen = vec![false; links.len()];
        seen[root] = true;
        while let Some(l) = queue.pop_front() {
            for &ji in &children[l] {
                let c = joints[ji].child;
                if seen[c] {
                    return Err(ModelError::NotATree("cycle detected".into()));
                }
                seen[c] = true;
                let mut anc = ancestors[l].clone();
                if joints[ji].kind == JointKind::Revolute {
                    anc.push(ji);
                }
                ancestors[c] = anc;
                order.push(ji);
                queue.push_back(c);
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(ModelError::NotATree("cycle detected".into()));
        }

        let total_mass: f64 = links.iter().map(|l| l.mass).sum();
        if !(total_mass > 0.0) {
            return Err(ModelError::NoMass);
        }

        Ok(Self {
            name,
            links,
            joints,
            order,
            root,
            link_index,
            actuated,
            ancestors,
            total_mass,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn root_link(&self) -> &str {
        &self.links[self.root].name
    }

    pub fn joint_count(&self) -> usize {
        self.actuated.len()
    }

    /// Floating base (6) plus revolute joints.
    pub fn dof(&self) -> usize {
        6 + self.actuated.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn actuated_joints(&self) -> impl Iterator<Item = &Joint> + '_ {
        self.actuated.iter().map(move |&j| &self.joints[j])
    }

    pub fn joint_names(&self) -> Vec<String> {
        self.actuated_joints().map(|j| j.name.clone()).collect()
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.actuated_joints().position(|j| j.name == name)
    }

    pub fn frame_id(&self, frame: &str) -> Result<usize, ModelError> {
        self.link_index
            .get(frame)
            .copied()
            .ok_or_else(|| ModelError::UnknownFrame(frame.to_string()))
    }

    fn check(&self, q: &Configuration) -> Result<(), ModelError> {
        if q.joints.len() != self.joint_count() {
            return Err(ModelError::ConfigurationSize {
                expected: self.joint_count(),
                got: q.joints.len(),
            });
        }
        Ok(())
    }

    /// World pose of every link.
    pub fn link_poses(&self, q: &Configuration) -> Result<Vec<Isometry3<f64>>, ModelError> {
        self.check(q)?;
        let mut poses = vec![Isometry3::identity(); self.links.len()];
        poses[self.root] = q.base();
        for &ji in &self.order {
            let j = &self.joints[ji];
            let motion = match j.index {
                Some(i) => UnitQuaternion::from_axis_angle(&j.axis, q.joints[i]),
                None => UnitQuaternion::identity(),
            };
            poses[j.child] = poses[j.parent] * j.origin * Isometry3::from_parts(Translation3::identity(), motion);
        }
        Ok(poses)
    }

    pub fn forward_kinematics(&self, q: &Configuration, frame: &str) -> Result<Isometry3<f64>, ModelError> {
        let id = self.frame_id(frame)?;
        Ok(self.link_poses(q)?[id])
    }

    /// World pose of each joint frame (before the joint motion), indexed by joint.
    fn joint_frames(&self, poses: &[Isometry3<f64>]) -> Vec<(Vector3<f64>, Vector3<f64>)> {
        self.joints
            .iter()
            .map(|j| {
                let frame = poses[j.parent] * j.origin;
                (frame.translation.vector, frame.rotation * j.axis.into_inner())
            })
            .collect()
    }

    /// 3×n linear Jacobian of a point rigidly attached to `link`.
    fn point_jacobian_into(
        &self,
        link: usize,
        point: &Vector3<f64>,
        base: &Vector3<f64>,
        jframes: &[(Vector3<f64>, Vector3<f64>)],
        out: &mut DMatrix<f64>,
        weight: f64,
    ) {
        let r = point - base;
        for k in 0..3 {
            out[(k, k)] += weight;
        }
        let s = -skew(&r) * weight;
        for a in 0..3 {
            for b in 0..3 {
                out[(a, 3 + b)] += s[(a, b)];
            }
        }
        for &ji in &self.ancestors[link] {
            let (o, axis) = &jframes[ji];
            let col = 6 + self.joints[ji].index.unwrap();
            let v = axis.cross(&(point - o)) * weight;
            for k in 0..3 {
                out[(k, col)] += v[k];
            }
        }
    }

    pub fn frame_jacobian(&self, q: &Configuration, frame: &str) -> Result<DMatrix<f64>, ModelError> {
        let id = self.frame_id(frame)?;
        let poses = self.link_poses(q)?;
        let jframes = self.joint_frames(&poses);
        let mut jac = DMatrix::zeros(6, self.dof());
        let mut lin = DMatrix::zeros(3, self.dof());
        self.point_jacobian_into(id, &poses[id].translation.vector, &q.base_position, &jframes, &mut lin, 1.0);
        jac.rows_mut(0, 3).copy_from(&lin);
        for k in 0..3 {
            jac[(3 + k, 3 + k)] = 1.0;
        }
        for &ji in &self.ancestors[id] {
            let col = 6 + self.joints[ji].index.unwrap();
            let axis = jframes[ji].1;
            for k in 0..3 {
                jac[(3 + k, col)] = axis[k];
            }
        }
        Ok(jac)
    }

    pub fn com(&self, q: &Configuration) -> Result<Point3<f64>, ModelError> {
        let poses = self.link_poses(q)?;
        let mut acc = Vector3::zeros();
        for (l, pose) in self.links.iter().zip(&poses) {
            acc += (pose * Point3::from(l.com)).coords * l.mass;
        }
        Ok(Point3::from(acc / self.total_mass))
    }

    pub fn com_jacobian(&self, q: &Configuration) -> Result<DMatrix<f64>, ModelError> {
        let poses = self.link_poses(q)?;
        let jframes = self.joint_frames(&poses);
        let mut jac = DMatrix::zeros(3, self.dof());
        for (i, (l, pose)) in self.links.iter().zip(&poses).enumerate() {
            if l.mass == 0.0 {
                continue;
            }
            let p = (pose * Point3::from(l.com)).coords;
            self.point_jacobian_into(i, &p, &q.base_position, &jframes, &mut jac, l.mass / self.total_mass);
        }
        Ok(jac)
    }

    pub fn velocity_limits(&self) -> DVector<f64> {
        DVector::from_iterator(self.joint_count(), self.actuated_joints().map(|j| j.velocity))
    }
}

/// Reads and validates a URDF document.
pub fn load_model(model_text: &str) -> Result<RobotModel, ModelError> {
    RobotModel::from_urdf_str(model_text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;
    use approx::assert_relative_eq;

    #[test]
    fn fixture_has_eighteen_dof() {
        let model = fixture::biped();
        assert_eq!(model.dof(), 18);
        assert_eq!(model.joint_count(), 12);
        let sum: f64 = model.links().iter().map(|l| l.mass).sum();
        assert_eq!(model.total_mass(), sum);
    }

    const SINGLE: &str = r#"<robot name="brick">
        <link name="body"><inertial><origin xyz="0.1 0 0"/><mass value="2"/></inertial></link>
    </robot>"#;

    #[test]
    fn single_link_is_floating_base_only() {
        let model = load_model(SINGLE).unwrap();
        assert_eq!(model.dof(), 6);
        let mut q = Configuration::neutral(&model);
        q.base_position = Vector3::new(1.0, 2.0, 3.0);
        q.base_orientation = UnitQuaternion::from_euler_angles(0.0, 0.0, std::f64::consts::FRAC_PI_2);
        let c = model.com(&q).unwrap();
        assert_relative_eq!(c, Point3::new(1.0, 2.1, 3.0), epsilon = 1e-15);
        let j = model.frame_jacobian(&q, "body").unwrap();
        assert_eq!(j.fixed_view::<3, 3>(0, 0).clone_owned(), Matrix3::identity());
        assert_eq!(j.fixed_view::<3, 3>(3, 3).clone_owned(), Matrix3::identity());
    }

    #[test]
    fn rejects_planar_joint() {
        let text = r#"<robot name="r">
            <link name="a"><inertial><mass value="1"/></inertial></link>
            <link name="b"><inertial><mass value="1"/></inertial></link>
            <joint name="j" type="planar"><parent link="a"/><child link="b"/></joint>
        </robot>"#;
        assert!(matches!(load_model(text), Err(ModelError::UnsupportedJoint { .. })));
    }

    #[test]
    fn rejects_missing_inertial() {
        let text = r#"<robot name="r"><link name="a"/></robot>"#;
        assert!(matches!(load_model(text), Err(ModelError::MissingInertial(_))));
    }

    #[test]
    fn rejects_cycles_and_bad_limits() {
        let cyc = r#"<robot name="r">
            <link name="a"><inertial><mass value="1"/></inertial></link>
            <link name="b"><inertial><mass value="1"/></inertial></link>
            <link name="c"><inertial><mass value="1"/></inertial></link>
            <joint name="j1" type="fixed"><parent link="a"/><child link="b"/></joint>
            <joint name="j2" type="fixed"><parent link="b"/><child link="c"/></joint>
            <joint name="j3" type="fixed"><parent link="c"/><child link="b"/></joint>
        </robot>"#;
        assert!(matches!(load_model(cyc), Err(ModelError::NotATree(_))));
        let limits = r#"<robot name="r">
            <link name="a"><inertial><mass value="1"/></inertial></link>
            <link name="b"><inertial><mass value="1"/></inertial></link>
            <joint name="j" type="revolute"><parent link="a"/><child link="b"/>
              <limit lower="1" upper="-1" velocity="1"/></joint>
        </robot>"#;
        assert!(matches!(load_model(limits), Err(ModelError::InvalidLimits(_))));
    }

    #[test]
    fn unknown_frame() {
        let model = fixture::biped();
        let q = Configuration::neutral(&model);
        assert!(matches!(model.forward_kinematics(&q, "nose"), Err(ModelError::UnknownFrame(_))));
    }

    #[test]
    fn zero_configuration_is_chain_of_offsets() {
        let model = fixture::biped();
        let q = Configuration::neutral(&model);
        let sole = model.forward_kinematics(&q, fixture::LEFT_SOLE).unwrap();
        // hip (0, 0.05, -0.05), roll offset -0.03, thigh -0.1, tibia -0.1, sole -0.035
        assert_relative_eq!(sole.translation.vector, Vector3::new(0.0, 0.05, -0.315), epsilon = 1e-15);
    }

    #[test]
    fn yawed_base_rotates_frames() {
        let model = fixture::biped();
        let q = fixture::standing_configuration(&model);
        let mut qr = q.clone();
        let yaw = UnitQuaternion::from_euler_angles(0.0, 0.0, std::f64::consts::FRAC_PI_2);
        qr.base_orientation = yaw * q.base_orientation;
        for frame in [fixture::LEFT_SOLE, fixture::RIGHT_SOLE, fixture::TRUNK] {
            let a = model.forward_kinematics(&q, frame).unwrap().translation.vector - q.base_position;
            let b = model.forward_kinematics(&qr, frame).unwrap().translation.vector - q.base_position;
            assert_relative_eq!(yaw * a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn symmetric_posture_has_centered_com() {
        let model = fixture::biped();
        let q = fixture::standing_configuration(&model);
        assert!(model.com(&q).unwrap().y.abs() < 1e-15);
    }

    #[test]
    fn off_path_columns_are_zero() {
        let model = fixture::biped();
        let q = fixture::standing_configuration(&model);
        let j = model.frame_jacobian(&q, fixture::LEFT_SOLE).unwrap();
        for name in model.joint_names() {
            if name.starts_with("right") {
                let c = 6 + model.joint_index(&name).unwrap();
                assert!(j.column(c).iter().all(|v| *v == 0.0), "{name}");
            }
        }
    }

    #[test]
    fn integrate_difference_round_trip() {
        let model = fixture::biped();
        let q = fixture::standing_configuration(&model);
        let delta = DVector::from_fn(model.dof(), |i, _| 0.01 * (i as f64 + 1.0).sin());
        let q2 = q.integrate(&delta);
        assert_relative_eq!(q.difference(&q2), delta, epsilon = 1e-14);
    }
}
