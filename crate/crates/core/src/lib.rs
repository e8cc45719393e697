pub mod error;
pub mod fixture;
pub mod footsteps;
pub mod geom;
pub mod kick;
pub mod kinematics;
pub mod preview;
pub mod qp;
pub mod walk;
pub mod wbik;
