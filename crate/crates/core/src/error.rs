use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum PastelError {
    #[error("singular matrix: pivot {pivot:e} at column {column}")]
    SingularMatrix { column: usize, pivot: f64 },
    #[error("infeasible transport: source mass {source_mass} vs target mass {target_mass}")]
    InfeasibleTransport { source_mass: f64, target_mass: f64 },
    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("graph has no edges")]
    EmptyGraph,
    #[error("class {class} has {available} members, {requested} requested")]
    InsufficientClassMembers {
        class: usize,
        available: usize,
        requested: usize,
    },
    #[error("parse error at {file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },
    #[error("inconsistent node count: {0}")]
    InconsistentNodeCount(String),
    #[error("({0}, {1}) is not an edge")]
    NotAnEdge(usize, usize),
    #[error("diameter {0} is below 2")]
    DegenerateDiameter(usize),
    #[error("no unlabeled node reaches a same-class anchor")]
    NoReachablePairs,
    #[error("anchor set of class {0} is empty")]
    EmptyAnchorSet(usize),
    #[error("row {0} has no mass")]
    ZeroRow(usize),
    #[error("no labeled nodes")]
    NoLabeledNodes,
    #[error("forward tape already consumed")]
    ConsumedTape,
    #[error("loss diverged at epoch {0}")]
    DivergedLoss(usize),
    #[error("evaluation mask is empty")]
    EmptyMask,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl PastelError {
    /// Short machine-readable tag used in structured CLI errors.
    pub fn kind(&self) -> &'static str {
        match self {
            PastelError::SingularMatrix { .. } => "SingularMatrix",
            PastelError::InfeasibleTransport { .. } => "InfeasibleTransport",
            PastelError::NonFiniteGradient(_) => "NonFiniteGradient",
            PastelError::ShapeMismatch(_) => "ShapeMismatch",
            PastelError::InvalidParams(_) => "InvalidParams",
            PastelError::EmptyGraph => "EmptyGraph",
            PastelError::InsufficientClassMembers { .. } => "InsufficientClassMembers",
            PastelError::Parse { .. } => "ParseError",
            PastelError::InconsistentNodeCount(_) => "InconsistentNodeCount",
            PastelError::NotAnEdge(..) => "NotAnEdge",
            PastelError::DegenerateDiameter(_) => "DegenerateDiameter",
            PastelError::NoReachablePairs => "NoReachablePairs",
            PastelError::EmptyAnchorSet(_) => "EmptyAnchorSet",
            PastelError::ZeroRow(_) => "ZeroRow",
            PastelError::NoLabeledNodes => "NoLabeledNodes",
            PastelError::ConsumedTape => "ConsumedTape",
            PastelError::DivergedLoss(_) => "DivergedLoss",
            PastelError::EmptyMask => "EmptyMask",
            PastelError::Io(_) => "Io",
            PastelError::Json(_) => "Json",
        }
    }

    /// Process exit code: 2 for bad input, 3 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            PastelError::SingularMatrix { .. }
            | PastelError::NonFiniteGradient(_)
            | PastelError::DivergedLoss(_)
            | PastelError::InfeasibleTransport { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, PastelError>;
