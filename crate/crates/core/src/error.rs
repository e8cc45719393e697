use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("degenerate geometry: {0}")]
    Degenerate(&'static str),
    #[error("invalid duration {0}, must be positive")]
    InvalidDuration(f64),
    #[error("invalid footprint {length}x{width}")]
    InvalidFootprint { length: f64, width: f64 },
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("malformed robot description: {0}")]
    Xml(#[from] roxmltree::Error),
    #[error("malformed robot description: {0}")]
    Parse(String),
    #[error("joint `{joint}` has unsupported type `{kind}` (only revolute and fixed are accepted)")]
    UnsupportedJoint { joint: String, kind: String },
    #[error("link `{0}` has no inertial element")]
    MissingInertial(String),
    #[error("kinematic structure is not a tree: {0}")]
    NotATree(String),
    #[error("invalid limits on joint `{0}`")]
    InvalidLimits(String),
    #[error("unknown frame `{0}`")]
    UnknownFrame(String),
    #[error("configuration has {got} joint values, model has {expected}")]
    ConfigurationSize { expected: usize, got: usize },
    #[error("total mass must be positive")]
    NoMass,
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("cost matrix is not positive definite")]
    NotPositiveDefinite,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PreviewError {
    #[error("invalid preview parameters: {0}")]
    InvalidParams(String),
    #[error("no footsteps given")]
    EmptyFootsteps,
    #[error("schedule has {got} samples, expected {expected}")]
    ScheduleLength { expected: usize, got: usize },
    #[error("center of mass plan infeasible ({family} constraints)")]
    Infeasible { family: &'static str },
    #[error("solver stopped after {0} iterations")]
    MaxIterations(usize),
    #[error("time {t} outside trajectory range [0, {end}]")]
    OutOfRange { t: f64, end: f64 },
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Qp(#[from] QpError),
}

#[derive(Debug, Error)]
pub enum IkError {
    #[error("inverse kinematics infeasible ({family} constraints)")]
    Infeasible { family: &'static str },
    #[error("solver stopped after {0} iterations")]
    MaxIterations(usize),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("configuration outside joint limits on `{0}`")]
    OutsideLimits(String),
    #[error("tick {tick}: {source}")]
    AtTick {
        tick: usize,
        #[source]
        source: Box<IkError>,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Qp(#[from] QpError),
}

#[derive(Debug, Error)]
pub enum WalkError {
    #[error("invalid walk parameters: {0}")]
    InvalidParams(String),
    #[error("footstep list is empty")]
    EmptyFootsteps,
    #[error("need at least two samples, got {0}")]
    TooFewSamples(usize),
    #[error(transparent)]
    Preview(#[from] PreviewError),
    #[error(transparent)]
    Ik(#[from] IkError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StrategyError {
    #[error("invalid field: {0}")]
    InvalidField(String),
    #[error("invalid strategy parameters: {0}")]
    InvalidParams(String),
    #[error("value grid is empty")]
    EmptyGrid,
    #[error("value grid geometry does not match the field model")]
    GeometryMismatch,
    #[error("no kick templates")]
    NoTemplates,
    #[error("acting robot index {0} out of range")]
    BadRobotIndex(usize),
}
